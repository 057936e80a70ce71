#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "spnf/distill.hpp"

using namespace spnf;

namespace {

DepthPrior random_prior(int w, int h, uint64_t seed, double mask_frac = 0.0) {
    DepthPrior p;
    p.values = ImageGray(w, h);
    p.mask = MaskImage(w, h, 1);
    Rng rng = make_rng(seed);
    std::uniform_real_distribution<float> uni(0.f, 1.f);
    for (auto& v : p.values.data) v = uni(rng);
    if (mask_frac > 0.0) {
        std::bernoulli_distribution drop(mask_frac);
        for (auto& m : p.mask.data)
            if (drop(rng)) m = 0;
    }
    return p;
}

// Exhaustive reference: dense-rank the window's values (anchor included) and
// sort candidates by (|rank difference to the anchor|, flat index).
std::vector<int> knn_reference(const DepthPrior& prior, int anchor, const DistillConfig& cfg) {
    const int w = prior.width(), h = prior.height();
    const int ax = anchor % w, ay = anchor / w;
    const int lo = -((cfg.knn_region - 1) / 2), hi = cfg.knn_region / 2;
    std::vector<std::pair<float, int>> window;
    for (int y = ay + lo; y <= ay + hi; ++y)
        for (int x = ax + lo; x <= ax + hi; ++x) {
            if (x < 0 || x >= w || y < 0 || y >= h) continue;
            int flat = y * w + x;
            if (!prior.mask.data[flat]) continue;
            window.push_back({prior.values.data[flat], flat});
        }
    std::vector<float> vals;
    for (auto& [v, f] : window) vals.push_back(v);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    auto rank = [&](float v) {
        return int(std::lower_bound(vals.begin(), vals.end(), v) - vals.begin());
    };
    const int ar = rank(prior.values.data[anchor]);
    std::vector<std::pair<int, int>> cand;
    for (auto& [v, f] : window)
        if (f != anchor) cand.push_back({std::abs(rank(v) - ar), f});
    std::sort(cand.begin(), cand.end());
    std::vector<int> out;
    for (size_t i = 0; i < cand.size() && i < static_cast<size_t>(cfg.knn_k); ++i)
        out.push_back(cand[i].second);
    return out;
}

std::vector<int> sorted_unique_pixels(const PairBatch& b) {
    std::set<int> s(b.k1.begin(), b.k1.end());
    s.insert(b.k2.begin(), b.k2.end());
    return {s.begin(), s.end()};
}

}  // namespace

TEST_CASE("sample_pairs: ordering, masks, forced pair, determinism") {
    DistillConfig cfg;
    cfg.patch_size = 8;
    cfg.knn_region = 6;
    cfg.pairs_per_patch = 32;
    cfg.patches_per_iter = 3;

    DepthPrior prior = random_prior(24, 24, 7, 0.3);
    Rng rng = make_rng(21);
    PairBatch b = sample_pairs(prior, cfg, rng);
    CHECK(b.size() == 96);
    for (size_t i = 0; i < b.size(); ++i) {
        CHECK(b.k1[i] != b.k2[i]);
        CHECK(prior.mask.data[b.k1[i]] != 0);
        CHECK(prior.mask.data[b.k2[i]] != 0);
        CHECK(b.prior_k1[i] <= b.prior_k2[i]);
        CHECK(b.prior_k1[i] == prior.values.data[b.k1[i]]);
        CHECK(b.prior_k2[i] == prior.values.data[b.k2[i]]);
    }

    Rng r1 = make_rng(33), r2 = make_rng(33);
    PairBatch b1 = sample_pairs(prior, cfg, r1);
    PairBatch b2 = sample_pairs(prior, cfg, r2);
    CHECK(b1.k1 == b2.k1);
    CHECK(b1.k2 == b2.k2);

    // all but two pixels masked: every pair is that pair
    DepthPrior forced = random_prior(8, 8, 3);
    std::fill(forced.mask.data.begin(), forced.mask.data.end(), 0);
    forced.mask.data[10] = 1;
    forced.mask.data[45] = 1;
    forced.values.data[10] = 0.9f;
    forced.values.data[45] = 0.2f;
    Rng r3 = make_rng(1);
    PairBatch fb = sample_pairs(forced, cfg, r3);
    for (size_t i = 0; i < fb.size(); ++i) {
        CHECK(fb.k1[i] == 45);  // the nearer pixel first
        CHECK(fb.k2[i] == 10);
    }

    DepthPrior empty = random_prior(8, 8, 3);
    std::fill(empty.mask.data.begin(), empty.mask.data.end(), 0);
    Rng r4 = make_rng(1);
    CHECK_THROWS_AS(sample_pairs(empty, cfg, r4), ValidationError);
}

TEST_CASE("knn_neighbors: hand examples and tie break") {
    DistillConfig cfg;
    cfg.patch_size = 8;
    cfg.knn_region = 3;
    cfg.knn_k = 2;

    // window depths around anchor 0.5: {0.1, 0.45, 0.55, 0.9}
    DepthPrior p = random_prior(3, 3, 0);
    std::fill(p.mask.data.begin(), p.mask.data.end(), 0);
    p.values.data[4] = 0.5f;  // anchor, center
    p.mask.data[4] = 1;
    p.values.data[0] = 0.1f;
    p.values.data[2] = 0.45f;
    p.values.data[6] = 0.55f;
    p.values.data[8] = 0.9f;
    for (int i : {0, 2, 6, 8}) p.mask.data[i] = 1;
    NeighborBatch nb = knn_neighbors(p, {4}, cfg);
    REQUIRE(nb.neighbors[0].size() == 2);
    CHECK(std::set<int>(nb.neighbors[0].begin(), nb.neighbors[0].end()) == std::set<int>{2, 6});

    // constant depth: k lowest row-major indices win
    DistillConfig cfg4 = cfg;
    cfg4.knn_k = 4;
    cfg4.knn_region = 6;
    DepthPrior flat = random_prior(10, 10, 0);
    std::fill(flat.values.data.begin(), flat.values.data.end(), 0.5f);
    NeighborBatch fb = knn_neighbors(flat, {55}, cfg4);
    // window rows start at y=3 (lo=-2); earliest row-major valid pixels
    REQUIRE(fb.neighbors[0].size() == 4);
    CHECK(fb.neighbors[0] == std::vector<int>{33, 34, 35, 36});

    // short window at the corner returns all available
    DistillConfig cfg9 = cfg;
    cfg9.knn_k = 9;
    cfg9.knn_region = 3;
    NeighborBatch corner = knn_neighbors(flat, {0}, cfg9);
    CHECK(corner.neighbors[0].size() == 3);

    CHECK_THROWS_AS(knn_neighbors(p, {1}, cfg), ValidationError);  // masked anchor
}

TEST_CASE("knn_neighbors: matches brute-force oracle on random patches") {
    DistillConfig cfg;
    cfg.patch_size = 8;
    cfg.knn_region = 6;
    cfg.knn_k = 4;
    for (int rep = 0; rep < 100; ++rep) {
        DepthPrior prior = random_prior(8, 8, 500 + rep, rep % 3 == 0 ? 0.25 : 0.0);
        std::vector<int> anchors;
        for (int i = 0; i < 64; ++i)
            if (prior.mask.data[i]) anchors.push_back(i);
        NeighborBatch nb = knn_neighbors(prior, anchors, cfg);
        for (size_t i = 0; i < anchors.size(); ++i)
            CHECK(nb.neighbors[i] == knn_reference(prior, anchors[i], cfg));
    }
}

TEST_CASE("ranking_loss: hand examples") {
    PairBatch pairs;
    pairs.k1 = {0};
    pairs.k2 = {1};
    pairs.prior_k1 = {0.1f};
    pairs.prior_k2 = {0.9f};
    std::vector<int> pixels = {0, 1};

    CHECK(ranking_loss(pairs, pixels, {0.5f, 0.3f}, 1e-4f) == doctest::Approx(0.2001).epsilon(1e-6));
    CHECK(ranking_loss(pairs, pixels, {0.4f, 0.4f}, 1e-4f) == doctest::Approx(1e-4).epsilon(1e-6));
    CHECK(ranking_loss(pairs, pixels, {0.2f, 0.7f}, 1e-4f) == 0.0);

    CHECK_THROWS_AS(ranking_loss(PairBatch{}, pixels, {0.f, 0.f}, 1e-4f), ValidationError);
}

TEST_CASE("ranking_loss: brute-force oracle, translation invariance, zero condition") {
    Rng rng = make_rng(99);
    std::uniform_real_distribution<float> uni(0.f, 1.f);
    DistillConfig cfg;
    cfg.patch_size = 8;
    cfg.pairs_per_patch = 64;
    cfg.patches_per_iter = 1;
    const float m = 1e-4f;
    for (int rep = 0; rep < 100; ++rep) {
        DepthPrior prior = random_prior(8, 8, 900 + rep);
        Rng prng = make_rng(4000 + rep);
        PairBatch pairs = sample_pairs(prior, cfg, prng);
        std::vector<int> pixels = sorted_unique_pixels(pairs);
        std::vector<float> d_r(pixels.size());
        for (auto& v : d_r) v = uni(rng);

        double expect = 0.0;
        for (size_t i = 0; i < pairs.size(); ++i) {
            double t = double(d_r[pixel_slot(pixels, pairs.k1[i])]) -
                       double(d_r[pixel_slot(pixels, pairs.k2[i])]) + m;
            expect += std::max(t, 0.0);
        }
        expect /= static_cast<double>(pairs.size());
        double got = ranking_loss(pairs, pixels, d_r, m);
        CHECK(got == doctest::Approx(expect).epsilon(1e-12));

        std::vector<float> shifted = d_r;
        for (auto& v : shifted) v += 0.25f;
        CHECK(ranking_loss(pairs, pixels, shifted, m) == doctest::Approx(got).epsilon(1e-4));
    }

    // zero iff every pair satisfies the margin: order d_r by the prior order
    DepthPrior prior = random_prior(8, 8, 1);
    Rng prng = make_rng(5);
    PairBatch pairs = sample_pairs(prior, cfg, prng);
    std::vector<int> pixels = sorted_unique_pixels(pairs);
    std::vector<float> agree(pixels.size());
    for (size_t i = 0; i < pixels.size(); ++i) agree[i] = prior.values.data[pixels[i]];
    CHECK(ranking_loss(pairs, pixels, agree, 0.f) == 0.0);
}

TEST_CASE("continuity_loss: hand examples and symmetry") {
    NeighborBatch nb;
    nb.anchors = {0};
    nb.neighbors = {{1}};
    std::vector<int> pixels = {0, 1};
    CHECK(continuity_loss(nb, pixels, {0.7f, 0.4f}, 1e-4f) == doctest::Approx(0.2999).epsilon(1e-6));
    CHECK(continuity_loss(nb, pixels, {0.4f, 0.7f}, 1e-4f) == doctest::Approx(0.2999).epsilon(1e-6));
    CHECK(continuity_loss(nb, pixels, {0.55f, 0.55f}, 1e-4f) == 0.0);
    CHECK(continuity_loss(NeighborBatch{}, pixels, {0.f, 0.f}, 1e-4f) == 0.0);

    // translation invariance
    NeighborBatch nb2;
    nb2.anchors = {0, 1};
    nb2.neighbors = {{1}, {0}};
    double a = continuity_loss(nb2, pixels, {0.2f, 0.9f}, 1e-4f);
    double b = continuity_loss(nb2, pixels, {0.7f, 1.4f}, 1e-4f);
    CHECK(a == doctest::Approx(b).epsilon(1e-5));
}

TEST_CASE("losses: gradients match finite differences away from kinks") {
    Rng rng = make_rng(1618);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    DistillConfig cfg;
    cfg.patch_size = 8;
    cfg.pairs_per_patch = 32;
    cfg.patches_per_iter = 1;
    cfg.knn_region = 6;
    cfg.knn_k = 4;
    const float m = 1e-4f;
    const double step = 1e-5;
    int checks = 0, failures = 0;

    for (int rep = 0; rep < 30; ++rep) {
        DepthPrior prior = random_prior(8, 8, 7000 + rep);
        Rng prng = make_rng(300 + rep);
        PairBatch pairs = sample_pairs(prior, cfg, prng);
        std::vector<int> pixels = sorted_unique_pixels(pairs);
        std::vector<int> anchors(pixels.begin(),
                                 pixels.begin() + std::min<size_t>(8, pixels.size()));
        NeighborBatch nb = knn_neighbors(prior, anchors, cfg);
        for (auto& lst : nb.neighbors)
            lst.erase(std::remove_if(lst.begin(), lst.end(),
                                     [&](int px) {
                                         return !std::binary_search(pixels.begin(), pixels.end(),
                                                                    px);
                                     }),
                      lst.end());

        std::vector<float> d_r(pixels.size());
        for (auto& v : d_r) v = static_cast<float>(uni(rng));

        // a coordinate sits near a hinge kink if any term touching it could
        // change its active branch under a +-step perturbation
        const double kink_band = 3.0 * step;
        std::vector<char> near_kink(pixels.size(), 0);
        for (size_t i = 0; i < pairs.size(); ++i) {
            int s1 = pixel_slot(pixels, pairs.k1[i]);
            int s2 = pixel_slot(pixels, pairs.k2[i]);
            double t = double(d_r[s1]) - double(d_r[s2]) + m;
            if (std::abs(t) <= kink_band) near_kink[s1] = near_kink[s2] = 1;
        }
        for (size_t i = 0; i < nb.anchors.size(); ++i) {
            int s1 = pixel_slot(pixels, nb.anchors[i]);
            for (int nbr : nb.neighbors[i]) {
                int s2 = pixel_slot(pixels, nbr);
                double diff = double(d_r[s1]) - double(d_r[s2]);
                if (std::abs(std::abs(diff) - m) <= kink_band || std::abs(diff) <= kink_band)
                    near_kink[s1] = near_kink[s2] = 1;
            }
        }

        for (int which = 0; which < 2; ++which) {
            std::vector<float> grad(pixels.size(), 0.f);
            auto eval = [&](const std::vector<float>& d) {
                return which == 0 ? ranking_loss(pairs, pixels, d, m)
                                  : continuity_loss(nb, pixels, d, m);
            };
            if (which == 0)
                ranking_loss(pairs, pixels, d_r, m, &grad);
            else
                continuity_loss(nb, pixels, d_r, m, &grad);
            for (size_t i = 0; i < d_r.size(); ++i) {
                if (near_kink[i]) continue;
                std::vector<float> dp = d_r, dm = d_r;
                dp[i] = static_cast<float>(double(d_r[i]) + step);
                dm[i] = static_cast<float>(double(d_r[i]) - step);
                // achieved step (float rounding makes it differ from `step`)
                double h = double(dp[i]) - double(dm[i]);
                double fd = (eval(dp) - eval(dm)) / h;
                double denom = std::max({std::abs(fd), double(std::abs(grad[i])), 1e-8});
                ++checks;
                if (std::abs(fd - grad[i]) / denom >= 1e-4) ++failures;
            }
        }
    }
    CHECK(checks >= 100);
    CHECK(failures == 0);
}

TEST_CASE("losses: monotone transforms of the prior change nothing") {
    DistillConfig cfg;
    cfg.patch_size = 8;
    cfg.pairs_per_patch = 64;
    cfg.patches_per_iter = 2;
    cfg.knn_region = 6;
    cfg.knn_k = 4;
    const float m = 1e-4f;

    auto transforms = std::vector<std::pair<const char*, float (*)(float)>>{
        {"square", [](float x) { return x * x; }},
        {"exp", [](float x) { return std::exp(x); }},
        {"affine", [](float x) { return 3.f * x + 1.f; }},
    };

    Rng drng = make_rng(42);
    std::uniform_real_distribution<float> uni(0.f, 1.f);
    for (int rep = 0; rep < 10; ++rep) {
        DepthPrior prior = random_prior(16, 16, 8800 + rep);
        Rng r0 = make_rng(77 + rep);
        PairBatch base_pairs = sample_pairs(prior, cfg, r0);
        std::vector<int> pair_pixels = sorted_unique_pixels(base_pairs);
        std::vector<int> anchors(pair_pixels.begin(),
                                 pair_pixels.begin() + std::min<size_t>(16, pair_pixels.size()));
        NeighborBatch base_nb = knn_neighbors(prior, anchors, cfg);
        std::set<int> all(pair_pixels.begin(), pair_pixels.end());
        for (const auto& lst : base_nb.neighbors) all.insert(lst.begin(), lst.end());
        std::vector<int> pixels(all.begin(), all.end());
        std::vector<float> d_r(pixels.size());
        for (auto& v : d_r) v = uni(drng);
        double rank0 = ranking_loss(base_pairs, pixels, d_r, m);
        double conti0 = continuity_loss(base_nb, pixels, d_r, m);

        for (auto& [name, g] : transforms) {
            CAPTURE(name);
            DepthPrior tp = prior;
            for (auto& v : tp.values.data) v = g(v);
            Rng r1 = make_rng(77 + rep);
            PairBatch tpairs = sample_pairs(tp, cfg, r1);
            CHECK(tpairs.k1 == base_pairs.k1);
            CHECK(tpairs.k2 == base_pairs.k2);
            NeighborBatch tnb = knn_neighbors(tp, anchors, cfg);
            for (size_t i = 0; i < tnb.neighbors.size(); ++i)
                CHECK(tnb.neighbors[i] == base_nb.neighbors[i]);
            CHECK(ranking_loss(tpairs, pixels, d_r, m) == doctest::Approx(rank0).epsilon(1e-12));
            CHECK(continuity_loss(tnb, pixels, d_r, m) == doctest::Approx(conti0).epsilon(1e-12));
        }
    }
}

TEST_CASE("losses: masked pixels are never referenced") {
    DistillConfig cfg;
    cfg.patch_size = 8;
    cfg.pairs_per_patch = 64;
    cfg.patches_per_iter = 2;
    cfg.knn_region = 6;
    cfg.knn_k = 4;

    DepthPrior prior = random_prior(16, 16, 5, 0.4);
    // poison everything the mask forbids
    for (size_t i = 0; i < prior.mask.data.size(); ++i)
        if (!prior.mask.data[i]) prior.values.data[i] = std::nanf("");

    Rng rng = make_rng(3);
    PairBatch pairs = sample_pairs(prior, cfg, rng);
    std::vector<int> pair_pixels = sorted_unique_pixels(pairs);
    std::vector<int> anchors(pair_pixels.begin(),
                             pair_pixels.begin() + std::min<size_t>(16, pair_pixels.size()));
    NeighborBatch nb = knn_neighbors(prior, anchors, cfg);
    std::set<int> all(pair_pixels.begin(), pair_pixels.end());
    for (const auto& lst : nb.neighbors) all.insert(lst.begin(), lst.end());
    std::vector<int> pixels(all.begin(), all.end());

    std::vector<float> d_r(pixels.size(), 0.f);
    for (size_t i = 0; i < pixels.size(); ++i) d_r[i] = prior.values.data[pixels[i]];
    for (float v : d_r) CHECK(std::isfinite(v));
    CHECK(std::isfinite(ranking_loss(pairs, pixels, d_r, 1e-4f)));
    CHECK(std::isfinite(continuity_loss(nb, pixels, d_r, 1e-4f)));
}
