#include "spnf/distill.hpp"

#include <algorithm>
#include <cmath>

namespace spnf {

namespace {

// Valid flat pixel indices inside the patch with origin (ox, oy).
std::vector<int> valid_in_patch(const DepthPrior& prior, int ox, int oy, int edge) {
    std::vector<int> out;
    for (int y = oy; y < oy + edge; ++y)
        for (int x = ox; x < ox + edge; ++x)
            if (prior.mask.at(x, y)) out.push_back(y * prior.width() + x);
    return out;
}

}  // namespace

PairBatch sample_pairs(const DepthPrior& prior, const DistillConfig& cfg, Rng& rng) {
    cfg.validate();
    const int w = prior.width(), h = prior.height();
    const int edge = std::min({cfg.patch_size, w, h});
    std::uniform_int_distribution<int> dx(0, w - edge), dy(0, h - edge);

    PairBatch batch;
    for (int p = 0; p < cfg.patches_per_iter; ++p) {
        std::vector<int> valid;
        bool found = false;
        for (int attempt = 0; attempt < 64; ++attempt) {
            valid = valid_in_patch(prior, dx(rng), dy(rng), edge);
            if (valid.size() >= 2) { found = true; break; }
        }
        if (!found) {
            // exhaustive fallback before giving up
            for (int oy = 0; oy <= h - edge && !found; ++oy)
                for (int ox = 0; ox <= w - edge && !found; ++ox) {
                    valid = valid_in_patch(prior, ox, oy, edge);
                    if (valid.size() >= 2) found = true;
                }
            if (!found) throw ValidationError("sample_pairs: no patch with >= 2 valid pixels");
        }
        std::uniform_int_distribution<size_t> pick(0, valid.size() - 1);
        for (int i = 0; i < cfg.pairs_per_patch; ++i) {
            size_t ia = pick(rng), ib = pick(rng);
            while (ib == ia) ib = pick(rng);
            int a = valid[ia], b = valid[ib];
            float da = prior.values.data[a], db = prior.values.data[b];
            if (da > db) { std::swap(a, b); std::swap(da, db); }
            batch.k1.push_back(a);
            batch.k2.push_back(b);
            batch.prior_k1.push_back(da);
            batch.prior_k2.push_back(db);
        }
    }
    return batch;
}

NeighborBatch knn_neighbors(const DepthPrior& prior, const std::vector<int>& anchors,
                            const DistillConfig& cfg) {
    const int w = prior.width(), h = prior.height();
    const int lo = -((cfg.knn_region - 1) / 2);
    const int hi = cfg.knn_region / 2;

    NeighborBatch nb;
    nb.anchors = anchors;
    nb.neighbors.resize(anchors.size());
    for (size_t i = 0; i < anchors.size(); ++i) {
        const int ax = anchors[i] % w, ay = anchors[i] / w;
        if (!prior.mask.at(ax, ay)) throw ValidationError("knn_neighbors: invalid anchor pixel");
        std::vector<std::pair<float, int>> window;  // (prior value, flat index), anchor included
        for (int oy = lo; oy <= hi; ++oy)
            for (int ox = lo; ox <= hi; ++ox) {
                int x = ax + ox, y = ay + oy;
                if (x < 0 || x >= w || y < 0 || y >= h) continue;
                if (!prior.mask.at(x, y)) continue;
                window.emplace_back(prior.values.at(x, y), y * w + x);
            }
        // Depth proximity measured in rank space so that only the prior's
        // order statistics matter (equal values share a rank).
        std::vector<float> distinct;
        distinct.reserve(window.size());
        for (const auto& [v, flat] : window) distinct.push_back(v);
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        auto rank_of = [&](float v) {
            return static_cast<int>(std::lower_bound(distinct.begin(), distinct.end(), v) -
                                    distinct.begin());
        };
        const int arank = rank_of(prior.values.at(ax, ay));
        std::vector<std::pair<int, int>> cand;  // (|rank diff|, flat index)
        for (const auto& [v, flat] : window)
            if (flat != anchors[i]) cand.emplace_back(std::abs(rank_of(v) - arank), flat);
        std::sort(cand.begin(), cand.end());
        const size_t k = std::min(cand.size(), static_cast<size_t>(cfg.knn_k));
        for (size_t j = 0; j < k; ++j) nb.neighbors[i].push_back(cand[j].second);
    }
    return nb;
}

int pixel_slot(const std::vector<int>& pixels, int pixel) {
    auto it = std::lower_bound(pixels.begin(), pixels.end(), pixel);
    if (it == pixels.end() || *it != pixel)
        throw ValidationError("pixel_slot: pixel not in rendered set");
    return static_cast<int>(it - pixels.begin());
}

double ranking_loss(const PairBatch& pairs, const std::vector<int>& pixels,
                    const std::vector<float>& d_r, float margin, std::vector<float>* grad) {
    if (pairs.size() == 0) throw ValidationError("ranking_loss: empty pair batch");
    double sum = 0.0;
    const double inv = 1.0 / static_cast<double>(pairs.size());
    for (size_t i = 0; i < pairs.size(); ++i) {
        int s1 = pixel_slot(pixels, pairs.k1[i]);
        int s2 = pixel_slot(pixels, pairs.k2[i]);
        double term = static_cast<double>(d_r[s1]) - static_cast<double>(d_r[s2]) + margin;
        if (term > 0.0) {
            sum += term;
            if (grad) {
                (*grad)[s1] += static_cast<float>(inv);
                (*grad)[s2] -= static_cast<float>(inv);
            }
        }
    }
    return sum * inv;
}

double continuity_loss(const NeighborBatch& nb, const std::vector<int>& pixels,
                       const std::vector<float>& d_r, float margin, std::vector<float>* grad) {
    size_t n_terms = 0;
    for (const auto& lst : nb.neighbors) n_terms += lst.size();
    if (n_terms == 0) return 0.0;
    const double inv = 1.0 / static_cast<double>(n_terms);
    double sum = 0.0;
    for (size_t i = 0; i < nb.anchors.size(); ++i) {
        int s1 = pixel_slot(pixels, nb.anchors[i]);
        for (int nbr : nb.neighbors[i]) {
            int s2 = pixel_slot(pixels, nbr);
            double diff = static_cast<double>(d_r[s1]) - static_cast<double>(d_r[s2]);
            double term = std::abs(diff) - margin;
            if (term > 0.0) {
                sum += term;
                if (grad) {
                    float g = static_cast<float>(inv) * (diff > 0.0 ? 1.f : -1.f);
                    (*grad)[s1] += g;
                    (*grad)[s2] -= g;
                }
            }
        }
    }
    return sum * inv;
}

}  // namespace spnf
