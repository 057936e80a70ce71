#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "spnf/encoding.hpp"
#include "spnf/errors.hpp"
#include "spnf/rng.hpp"

namespace spnf {

// Desk-scale radiance field MLP: 4 hidden ReLU layers with the encoded position
// skipped into layer 3, a softplus density head on the layer-4 features, and a
// color branch that runs (features ++ encoded direction) through one hidden
// layer into a sigmoid RGB head. Density never sees the view direction.
struct FieldArch {
    int hidden = 64;
    int color_hidden = 32;
    EncodingConfig enc;

    int in_pos() const { return encoded_dim(3, enc.levels_pos, enc.include_input); }
    int in_dir() const { return encoded_dim(3, enc.levels_dir, enc.include_input); }

    bool operator==(const FieldArch& o) const {
        return hidden == o.hidden && color_hidden == o.color_hidden &&
               enc.levels_pos == o.enc.levels_pos && enc.levels_dir == o.enc.levels_dir &&
               enc.include_input == o.enc.include_input;
    }
};

template <typename S>
struct FieldOutputT {
    S sigma = S(0);
    Eigen::Matrix<S, 3, 1> color = Eigen::Matrix<S, 3, 1>::Zero();
};
using FieldOutput = FieldOutputT<float>;

namespace detail {
// One named parameter tensor: rows x cols block of the flat parameter vector.
struct ParamSeg {
    const char* name;
    int rows;
    int cols;
    size_t offset;
};

inline std::vector<ParamSeg> param_layout(const FieldArch& a) {
    std::vector<ParamSeg> segs;
    size_t off = 0;
    auto add = [&](const char* name, int r, int c) {
        segs.push_back({name, r, c, off});
        off += static_cast<size_t>(r) * c;
    };
    const int h = a.hidden, ch = a.color_hidden, ip = a.in_pos(), id = a.in_dir();
    add("w0", h, ip);
    add("b0", h, 1);
    add("w1", h, h);
    add("b1", h, 1);
    add("w2", h, h + ip);  // skip connection of the encoded position
    add("b2", h, 1);
    add("w3", h, h);
    add("b3", h, 1);
    add("w_sigma", 1, h);
    add("b_sigma", 1, 1);
    add("w_col0", ch, h + id);
    add("b_col0", ch, 1);
    add("w_col1", 3, ch);
    add("b_col1", 3, 1);
    return segs;
}

inline size_t param_count(const FieldArch& a) {
    auto segs = param_layout(a);
    const auto& last = segs.back();
    return last.offset + static_cast<size_t>(last.rows) * last.cols;
}
}  // namespace detail

// All learnable weights, stored as one flat vector in declaration order with
// Eigen map views per tensor. The flat layout is the checkpoint layout.
template <typename S>
class FieldParamsT {
public:
    using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
    using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
    using MapM = Eigen::Map<Mat>;
    using CMapM = Eigen::Map<const Mat>;

    FieldParamsT() : FieldParamsT(FieldArch{}) {}
    explicit FieldParamsT(const FieldArch& arch)
        : arch_(arch), segs_(detail::param_layout(arch)), data_(detail::param_count(arch), S(0)) {}

    // He-style uniform fan-in init; biases zero.
    static FieldParamsT init(const FieldArch& arch, uint64_t seed) {
        FieldParamsT p(arch);
        Rng rng = make_rng(derive_seed(seed, 0x1d1));
        for (size_t i = 0; i < p.segs_.size(); i += 2) {  // weight tensors only
            const auto& seg = p.segs_[i];
            S bound = std::sqrt(S(6) / S(seg.cols));
            std::uniform_real_distribution<double> dist(-double(bound), double(bound));
            S* d = p.data_.data() + seg.offset;
            for (size_t j = 0; j < static_cast<size_t>(seg.rows) * seg.cols; ++j)
                d[j] = static_cast<S>(dist(rng));
        }
        return p;
    }

    const FieldArch& arch() const { return arch_; }
    size_t size() const { return data_.size(); }
    S* data() { return data_.data(); }
    const S* data() const { return data_.data(); }
    std::vector<S>& raw() { return data_; }
    const std::vector<S>& raw() const { return data_; }

    void set_zero() { std::fill(data_.begin(), data_.end(), S(0)); }

    MapM map(int i) { return MapM(data_.data() + segs_[i].offset, segs_[i].rows, segs_[i].cols); }
    CMapM map(int i) const {
        return CMapM(data_.data() + segs_[i].offset, segs_[i].rows, segs_[i].cols);
    }

    template <typename T>
    FieldParamsT<T> cast() const {
        FieldParamsT<T> out(arch_);
        for (size_t i = 0; i < data_.size(); ++i) out.data()[i] = static_cast<T>(data_[i]);
        return out;
    }

private:
    FieldArch arch_;
    std::vector<detail::ParamSeg> segs_;
    std::vector<S> data_;
};

using FieldParams = FieldParamsT<float>;

// Tensor indices in declaration order.
enum : int {
    P_W0, P_B0, P_W1, P_B1, P_W2, P_B2, P_W3, P_B3,
    P_WSIG, P_BSIG, P_WCOL0, P_BCOL0, P_WCOL1, P_BCOL1
};

// Post-activation values kept by the batch forward pass for reverse mode.
template <typename S>
struct FieldTape {
    using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
    Mat xenc, denc;          // encoded inputs
    Mat h0, h1, h2, h3, c0;  // post-ReLU hidden activations
    Mat rgb;                 // post-sigmoid colors (3 x B)
    Eigen::Matrix<S, Eigen::Dynamic, 1> a_sigma;  // pre-softplus density (B)
};

template <typename S>
S softplus(S x) {
    return x > S(20) ? x : std::log1p(std::exp(x));
}

template <typename S>
S logistic(S x) {
    return S(1) / (S(1) + std::exp(-x));
}

// Encodes raw positions (3 x B) and directions (3 x B) into the tape.
template <typename S>
void field_encode_batch(const FieldArch& arch,
                        const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& pos,
                        const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& dir,
                        FieldTape<S>& tape) {
    const int b = static_cast<int>(pos.cols());
    tape.xenc.resize(arch.in_pos(), b);
    tape.denc.resize(arch.in_dir(), b);
    for (int i = 0; i < b; ++i) {
        S p[3] = {pos(0, i), pos(1, i), pos(2, i)};
        S d[3] = {dir(0, i), dir(1, i), dir(2, i)};
        positional_encode(p, 3, arch.enc.levels_pos, arch.enc.include_input, tape.xenc.col(i).data());
        positional_encode(d, 3, arch.enc.levels_dir, arch.enc.include_input, tape.denc.col(i).data());
    }
}

// Forward pass over a batch of already-encoded inputs. sigma_out gets the
// softplus density (B), rgb lives in tape.rgb (3 x B).
template <typename S>
void field_forward_encoded(const FieldParamsT<S>& p, FieldTape<S>& tape,
                           Eigen::Matrix<S, Eigen::Dynamic, 1>& sigma_out) {
    using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
    const int b = static_cast<int>(tape.xenc.cols());
    const int h = p.arch().hidden;

    tape.h0 = ((p.map(P_W0) * tape.xenc).colwise() + p.map(P_B0).col(0)).cwiseMax(S(0));
    tape.h1 = ((p.map(P_W1) * tape.h0).colwise() + p.map(P_B1).col(0)).cwiseMax(S(0));
    Mat skip(h + tape.xenc.rows(), b);
    skip.topRows(h) = tape.h1;
    skip.bottomRows(tape.xenc.rows()) = tape.xenc;
    tape.h2 = ((p.map(P_W2) * skip).colwise() + p.map(P_B2).col(0)).cwiseMax(S(0));
    tape.h3 = ((p.map(P_W3) * tape.h2).colwise() + p.map(P_B3).col(0)).cwiseMax(S(0));

    tape.a_sigma = (p.map(P_WSIG) * tape.h3).transpose().col(0);
    tape.a_sigma.array() += p.map(P_BSIG)(0, 0);
    sigma_out.resize(b);
    for (int i = 0; i < b; ++i) sigma_out[i] = softplus(tape.a_sigma[i]);

    Mat feat(h + tape.denc.rows(), b);
    feat.topRows(h) = tape.h3;
    feat.bottomRows(tape.denc.rows()) = tape.denc;
    tape.c0 = ((p.map(P_WCOL0) * feat).colwise() + p.map(P_BCOL0).col(0)).cwiseMax(S(0));
    Mat a_rgb = (p.map(P_WCOL1) * tape.c0).colwise() + p.map(P_BCOL1).col(0);
    tape.rgb = a_rgb.unaryExpr([](S x) { return logistic(x); });
}

template <typename S>
void field_forward_batch(const FieldParamsT<S>& p,
                         const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& pos,
                         const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& dir,
                         FieldTape<S>& tape, Eigen::Matrix<S, Eigen::Dynamic, 1>& sigma_out) {
    field_encode_batch(p.arch(), pos, dir, tape);
    field_forward_encoded(p, tape, sigma_out);
}

// Accumulates d(sum_i <cot, output_i>)/dparams into grads given the tape of a
// prior forward pass. cot_sigma is B, cot_rgb is 3 x B.
template <typename S>
void field_backward_batch(const FieldParamsT<S>& p, const FieldTape<S>& tape,
                          const Eigen::Matrix<S, Eigen::Dynamic, 1>& cot_sigma,
                          const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& cot_rgb,
                          FieldParamsT<S>& grads) {
    using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
    const int b = static_cast<int>(tape.xenc.cols());
    const int h = p.arch().hidden;
    if (b == 0) throw ValidationError("field_backward: empty batch");
    if (cot_sigma.size() != b || cot_rgb.cols() != b || cot_rgb.rows() != 3)
        throw ValidationError("field_backward: cotangent shape mismatch");
    if (!(grads.arch() == p.arch()))
        throw ValidationError("field_backward: gradient arch mismatch");

    // color head
    Mat d_argb = cot_rgb.cwiseProduct(tape.rgb.cwiseProduct(Mat::Constant(3, b, S(1)) - tape.rgb));
    grads.map(P_WCOL1) += d_argb * tape.c0.transpose();
    grads.map(P_BCOL1).col(0) += d_argb.rowwise().sum();
    Mat dc0 = (p.map(P_WCOL1).transpose() * d_argb)
                  .cwiseProduct(tape.c0.unaryExpr([](S x) { return x > S(0) ? S(1) : S(0); }));
    Mat feat(h + tape.denc.rows(), b);
    feat.topRows(h) = tape.h3;
    feat.bottomRows(tape.denc.rows()) = tape.denc;
    grads.map(P_WCOL0) += dc0 * feat.transpose();
    grads.map(P_BCOL0).col(0) += dc0.rowwise().sum();
    Mat dfeat = p.map(P_WCOL0).transpose() * dc0;

    // density head
    Eigen::Matrix<S, Eigen::Dynamic, 1> d_asig(b);
    for (int i = 0; i < b; ++i) d_asig[i] = cot_sigma[i] * logistic(tape.a_sigma[i]);
    grads.map(P_WSIG) += d_asig.transpose() * tape.h3.transpose();
    grads.map(P_BSIG)(0, 0) += d_asig.sum();

    Mat dh3 = dfeat.topRows(h) + p.map(P_WSIG).transpose() * d_asig.transpose();
    dh3 = dh3.cwiseProduct(tape.h3.unaryExpr([](S x) { return x > S(0) ? S(1) : S(0); }));
    grads.map(P_W3) += dh3 * tape.h2.transpose();
    grads.map(P_B3).col(0) += dh3.rowwise().sum();

    Mat dh2 = (p.map(P_W3).transpose() * dh3)
                  .cwiseProduct(tape.h2.unaryExpr([](S x) { return x > S(0) ? S(1) : S(0); }));
    Mat skip(h + tape.xenc.rows(), b);
    skip.topRows(h) = tape.h1;
    skip.bottomRows(tape.xenc.rows()) = tape.xenc;
    grads.map(P_W2) += dh2 * skip.transpose();
    grads.map(P_B2).col(0) += dh2.rowwise().sum();

    Mat dh1 = (p.map(P_W2).transpose() * dh2).topRows(h);
    dh1 = dh1.cwiseProduct(tape.h1.unaryExpr([](S x) { return x > S(0) ? S(1) : S(0); }));
    grads.map(P_W1) += dh1 * tape.h0.transpose();
    grads.map(P_B1).col(0) += dh1.rowwise().sum();

    Mat dh0 = (p.map(P_W1).transpose() * dh1)
                  .cwiseProduct(tape.h0.unaryExpr([](S x) { return x > S(0) ? S(1) : S(0); }));
    grads.map(P_W0) += dh0 * tape.xenc.transpose();
    grads.map(P_B0).col(0) += dh0.rowwise().sum();
}

// Single-sample forward. d must be unit length within 1e-6.
template <typename S>
FieldOutputT<S> field_forward(const FieldParamsT<S>& p, const Eigen::Matrix<S, 3, 1>& x,
                              const Eigen::Matrix<S, 3, 1>& d) {
    if (!x.allFinite() || !d.allFinite())
        throw ValidationError("field_forward: non-finite input");
    if (std::abs(d.norm() - S(1)) > S(1e-5))
        throw ValidationError("field_forward: direction not unit length");
    Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> pos = x, dir = d;
    FieldTape<S> tape;
    Eigen::Matrix<S, Eigen::Dynamic, 1> sigma;
    field_forward_batch(p, pos, dir, tape, sigma);
    FieldOutputT<S> out;
    out.sigma = sigma[0];
    out.color = tape.rgb.col(0);
    return out;
}

}  // namespace spnf
