#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <vector>

#include "spnf/camera.hpp"
#include "spnf/errors.hpp"
#include "spnf/field.hpp"
#include "spnf/rng.hpp"

namespace spnf {

struct Ray {
    Eigen::Vector3f origin = Eigen::Vector3f::Zero();
    Eigen::Vector3f dir = Eigen::Vector3f::UnitZ();  // unit length
    float t_near = 0.f;
    float t_far = 0.f;
};

// Ascending sample distances along a ray and the interval lengths
// delta_i = t_i - t_{i-1}, with delta_1 = t_1 - t_near.
template <typename S>
struct RaySamplesT {
    std::vector<S> t;
    std::vector<S> delta;
};
using RaySamples = RaySamplesT<float>;

template <typename S>
struct RenderedPixelT {
    Eigen::Matrix<S, 3, 1> color = Eigen::Matrix<S, 3, 1>::Zero();
    S depth = S(0);          // expected depth sum_i w_i t_i (not opacity-normalized)
    std::vector<S> weights;  // w_i = T_i (1 - exp(-sigma_i delta_i))
    S opacity = S(0);        // sum_i w_i
};
using RenderedPixel = RenderedPixelT<float>;

// Ray through pixel (px, py) offset by jitter in [0,1)^2; (0.5, 0.5) is the
// pixel center. Camera-space direction ((x-cx)/fx, -(y-cy)/fy, -1), rotated
// and normalized.
Ray generate_ray(const Camera& cam, int px, int py, float jx = 0.5f, float jy = 0.5f);

// n equal bins over [t_near, t_far]; one uniform draw per bin when rng is
// given, bin midpoints otherwise.
RaySamples stratified_sample(const Ray& ray, int n, Rng* rng);

// Alpha compositing per the transmittance weights
// w_i = T_i (1 - exp(-sigma_i delta_i)), T_i = exp(-sum_{j<i} sigma_j delta_j).
template <typename S>
RenderedPixelT<S> composite(const RaySamplesT<S>& samples, const std::vector<S>& sigmas,
                            const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& colors) {
    const int n = static_cast<int>(samples.t.size());
    if (static_cast<int>(sigmas.size()) != n || colors.cols() != n)
        throw ValidationError("composite: array length mismatch");
    RenderedPixelT<S> out;
    out.weights.resize(n);
    S log_trans = S(0);  // log T_i
    for (int i = 0; i < n; ++i) {
        if (sigmas[i] < S(0)) throw ValidationError("composite: negative sigma");
        S a = sigmas[i] * samples.delta[i];
        S w = std::exp(log_trans) * (-std::expm1(-a));
        out.weights[i] = w;
        out.color += w * colors.col(i);
        out.depth += w * samples.t[i];
        out.opacity += w;
        log_trans -= a;
    }
    return out;
}

// Reverse mode for composite: cotangents on (color, depth, opacity) propagate
// to sigmas and colors. Appends into d_sigmas / d_colors (must be pre-sized).
template <typename S>
void composite_backward(const RaySamplesT<S>& samples, const std::vector<S>& sigmas,
                        const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& colors,
                        const RenderedPixelT<S>& fwd, const Eigen::Matrix<S, 3, 1>& cot_color,
                        S cot_depth, S cot_opacity, std::vector<S>& d_sigmas,
                        Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& d_colors) {
    const int n = static_cast<int>(samples.t.size());
    // a_i = dL/dw_i
    std::vector<S> a(n);
    for (int i = 0; i < n; ++i)
        a[i] = colors.col(i).dot(cot_color) + samples.t[i] * cot_depth + cot_opacity;
    // dL/dsigma_k = a_k T_k delta_k exp(-sigma_k delta_k) - delta_k sum_{i>k} a_i w_i
    S suffix = S(0);
    std::vector<S> suffix_after(n);
    for (int i = n - 1; i >= 0; --i) {
        suffix_after[i] = suffix;
        suffix += a[i] * fwd.weights[i];
    }
    S log_trans = S(0);
    for (int k = 0; k < n; ++k) {
        S ak_term = a[k] * std::exp(log_trans - sigmas[k] * samples.delta[k]);
        d_sigmas[k] += samples.delta[k] * (ak_term - suffix_after[k]);
        d_colors.col(k) += fwd.weights[k] * cot_color;
        log_trans -= sigmas[k] * samples.delta[k];
    }
}

// composite(stratified_sample(...), field at each sample point).
RenderedPixel render_pixel(const FieldParams& params, const Ray& ray, int n, Rng* rng);

// floor(cbrt(h * w * k)): the number of resolvable voxels per cube edge given
// h*w*k pixel constraints.
long long constraint_budget(long long h, long long w, long long k);

}  // namespace spnf
