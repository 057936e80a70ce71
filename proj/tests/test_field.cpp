#include <doctest.h>

#include <cmath>
#include <fstream>

#include "spnf/checkpoint.hpp"
#include "spnf/field.hpp"

using namespace spnf;

namespace {

FieldArch tiny_arch() {
    FieldArch a;
    a.hidden = 8;
    a.color_hidden = 6;
    a.enc.levels_pos = 2;
    a.enc.levels_dir = 1;
    return a;
}

// Scalar objective sum_i <cot, output_i> for finite differencing.
double field_objective(const FieldParamsT<double>& p,
                       const Eigen::MatrixXd& pos, const Eigen::MatrixXd& dir,
                       const Eigen::VectorXd& cot_sigma, const Eigen::MatrixXd& cot_rgb) {
    FieldTape<double> tape;
    Eigen::VectorXd sigma;
    field_forward_batch(p, pos, dir, tape, sigma);
    return sigma.dot(cot_sigma) + (tape.rgb.array() * cot_rgb.array()).sum();
}

}  // namespace

TEST_CASE("positional_encode: zero vector, dimensions, identity case") {
    double v[3] = {0.0, 0.0, 0.0};
    double out[63];
    positional_encode(v, 3, 10, true, out);
    CHECK(encoded_dim(3, 10, true) == 63);
    for (int i = 0; i < 3; ++i) CHECK(out[i] == 0.0);
    for (int j = 0; j < 10; ++j)
        for (int i = 0; i < 3; ++i) {
            CHECK(out[3 + 6 * j + i] == 0.0);      // sin
            CHECK(out[3 + 6 * j + 3 + i] == 1.0);  // cos
        }

    double w[2] = {0.3, -1.7};
    double id[2];
    positional_encode(w, 2, 0, true, id);
    CHECK(id[0] == w[0]);
    CHECK(id[1] == w[1]);

    for (int n : {1, 2, 3})
        for (int L : {0, 1, 4, 10})
            for (bool inc : {false, true})
                CHECK(encoded_dim(n, L, inc) == n * ((inc ? 1 : 0) + 2 * L));
}

TEST_CASE("positional_encode: frequencies double per level") {
    double v = 0.37;
    double out[7];
    positional_encode(&v, 1, 3, true, out);
    CHECK(out[0] == doctest::Approx(0.37));
    CHECK(out[1] == doctest::Approx(std::sin(0.37)));
    CHECK(out[2] == doctest::Approx(std::cos(0.37)));
    CHECK(out[3] == doctest::Approx(std::sin(0.74)));
    CHECK(out[5] == doctest::Approx(std::sin(1.48)));
}

TEST_CASE("field_forward: determinism, activation ranges, view-independent density") {
    FieldParams p = FieldParams::init(tiny_arch(), 42);
    Eigen::Vector3f x(0.3f, -0.2f, 0.9f);
    Eigen::Vector3f d = Eigen::Vector3f(0.5f, 0.5f, -0.7f).normalized();
    FieldOutput a = field_forward(p, x, d);
    FieldOutput b = field_forward(p, x, d);
    CHECK(a.sigma == b.sigma);
    CHECK(a.color == b.color);

    Rng rng = make_rng(99);
    std::uniform_real_distribution<float> uni(-1.f, 1.f);
    for (int i = 0; i < 50; ++i) {
        Eigen::Vector3f xs(uni(rng), uni(rng), uni(rng));
        Eigen::Vector3f d1 = Eigen::Vector3f(uni(rng), uni(rng), uni(rng) + 1.5f).normalized();
        Eigen::Vector3f d2 = Eigen::Vector3f(uni(rng), uni(rng), uni(rng) - 1.5f).normalized();
        FieldOutput o1 = field_forward(p, xs, d1);
        FieldOutput o2 = field_forward(p, xs, d2);
        CHECK(o1.sigma >= 0.f);
        for (int c = 0; c < 3; ++c) {
            CHECK(o1.color[c] > 0.f);
            CHECK(o1.color[c] < 1.f);
        }
        CHECK(o1.sigma == o2.sigma);  // density never sees the direction
    }

    Eigen::Vector3f bad(std::nanf(""), 0.f, 0.f);
    CHECK_THROWS_AS(field_forward(p, bad, d), ValidationError);
    CHECK_THROWS_AS(field_forward(p, x, Eigen::Vector3f(1.f, 1.f, 1.f)), ValidationError);
}

TEST_CASE("field_forward: continuity in position") {
    FieldParams p = FieldParams::init(tiny_arch(), 5);
    Eigen::Vector3f d(0.f, 0.f, -1.f);
    Rng rng = make_rng(7);
    std::uniform_real_distribution<float> uni(-1.f, 1.f);
    const float eps = 1e-4f;
    const float bound = 1e-1f;  // empirical Lipschitz bound for the tiny arch at eps
    for (int i = 0; i < 30; ++i) {
        Eigen::Vector3f x(uni(rng), uni(rng), uni(rng));
        FieldOutput a = field_forward(p, x, d);
        FieldOutput b = field_forward(p, Eigen::Vector3f(x.x() + eps, x.y(), x.z()), d);
        CHECK(std::abs(a.sigma - b.sigma) <= bound);
        CHECK((a.color - b.color).cwiseAbs().maxCoeff() <= bound);
    }
}

TEST_CASE("field_backward: linearity in the cotangents") {
    FieldArch arch = tiny_arch();
    FieldParamsT<double> p = FieldParamsT<double>::init(arch, 17).cast<double>();
    const int b = 5;
    Rng rng = make_rng(3);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Eigen::MatrixXd pos(3, b), dir(3, b);
    for (int i = 0; i < b; ++i) {
        pos.col(i) = Eigen::Vector3d(uni(rng), uni(rng), uni(rng));
        dir.col(i) = Eigen::Vector3d(uni(rng), uni(rng), uni(rng) + 2.0).normalized();
    }
    FieldTape<double> tape;
    Eigen::VectorXd sigma;
    field_forward_batch(p, pos, dir, tape, sigma);

    Eigen::VectorXd cs = Eigen::VectorXd::Zero(b);
    Eigen::MatrixXd cc = Eigen::MatrixXd::Zero(3, b);
    FieldParamsT<double> g0(arch);
    field_backward_batch(p, tape, cs, cc, g0);
    for (size_t i = 0; i < g0.size(); ++i) CHECK(g0.data()[i] == 0.0);

    for (int i = 0; i < b; ++i) {
        cs[i] = uni(rng);
        cc.col(i) = Eigen::Vector3d(uni(rng), uni(rng), uni(rng));
    }
    FieldParamsT<double> g1(arch), g2(arch);
    field_backward_batch(p, tape, cs, cc, g1);
    Eigen::VectorXd cs2 = 2.0 * cs;
    Eigen::MatrixXd cc2 = 2.0 * cc;
    field_backward_batch(p, tape, cs2, cc2, g2);
    for (size_t i = 0; i < g1.size(); ++i)
        CHECK(g2.data()[i] == doctest::Approx(2.0 * g1.data()[i]).epsilon(1e-12));
}

TEST_CASE("field_backward: matches central finite differences on every parameter") {
    FieldArch arch = tiny_arch();
    Rng rng = make_rng(1234);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    int failures = 0;
    for (int trial = 0; trial < 5; ++trial) {
        FieldParamsT<double> p =
            FieldParamsT<double>::init(arch, 1000 + trial).cast<double>();
        const int b = 3;
        Eigen::MatrixXd pos(3, b), dir(3, b);
        for (int i = 0; i < b; ++i) {
            pos.col(i) = Eigen::Vector3d(uni(rng), uni(rng), uni(rng));
            dir.col(i) = Eigen::Vector3d(uni(rng), uni(rng), uni(rng) + 2.0).normalized();
        }
        Eigen::VectorXd cs(b);
        Eigen::MatrixXd cc(3, b);
        for (int i = 0; i < b; ++i) {
            cs[i] = uni(rng);
            cc.col(i) = Eigen::Vector3d(uni(rng), uni(rng), uni(rng));
        }
        FieldTape<double> tape;
        Eigen::VectorXd sigma;
        field_forward_batch(p, pos, dir, tape, sigma);
        FieldParamsT<double> grads(arch);
        field_backward_batch(p, tape, cs, cc, grads);

        const double step = 1e-5;
        for (size_t i = 0; i < p.size(); ++i) {
            FieldParamsT<double> pp = p, pm = p;
            pp.data()[i] += step;
            pm.data()[i] -= step;
            double fd = (field_objective(pp, pos, dir, cs, cc) -
                         field_objective(pm, pos, dir, cs, cc)) /
                        (2.0 * step);
            double g = grads.data()[i];
            double denom = std::max({std::abs(fd), std::abs(g), 1e-6});
            if (std::abs(fd - g) / denom >= 1e-4) ++failures;
        }
    }
    CHECK(failures == 0);
}

TEST_CASE("checkpoint: SPNF round trip preserves params and iteration") {
    FieldArch arch;
    arch.hidden = 16;
    arch.color_hidden = 8;
    arch.enc.levels_pos = 4;
    arch.enc.levels_dir = 2;
    FieldParams p = FieldParams::init(arch, 77);
    const std::string path = "/tmp/spnf_test_ckpt.spnf";
    save_checkpoint(path, p, 1234);
    Checkpoint c = load_checkpoint(path);
    CHECK(c.iteration == 1234);
    CHECK(c.params.arch() == arch);
    CHECK(c.params.raw() == p.raw());

    // magic bytes
    std::ifstream f(path, std::ios::binary);
    char magic[4];
    f.read(magic, 4);
    CHECK(std::string(magic, 4) == "SPNF");
}
