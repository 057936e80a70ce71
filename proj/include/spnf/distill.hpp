#pragma once

#include <vector>

#include "spnf/errors.hpp"
#include "spnf/rng.hpp"
#include "spnf/scene.hpp"

namespace spnf {

struct DistillConfig {
    int patch_size = 32;       // square patch edge for pair sampling
    int pairs_per_patch = 128;
    int patches_per_iter = 4;
    int anchors_per_patch = 32;  // continuity anchors drawn from the pair pixels
    int knn_k = 4;
    int knn_region = 6;          // neighborhood window edge for KNN
    float margin_rank = 1e-4f;   // m
    float margin_conti = 1e-4f;  // m'

    void validate() const {
        if (patch_size < 2) throw ValidationError("distill: patch_size must be >= 2");
        if (knn_region > patch_size)
            throw ValidationError("distill: knn_region must be <= patch_size");
        if (knn_k >= knn_region * knn_region)
            throw ValidationError("distill: knn_k must be < knn_region^2");
        if (margin_rank < 0.f || margin_conti < 0.f)
            throw ValidationError("distill: margins must be >= 0");
    }
};

// Sampled near/far pixel pairs. Pixel indices are row-major flat indices into
// the prior; every pair satisfies prior[k1] <= prior[k2] and both pixels are
// valid and inside one patch.
struct PairBatch {
    int view = 0;
    std::vector<int> k1, k2;
    std::vector<float> prior_k1, prior_k2;

    size_t size() const { return k1.size(); }
};

// Per-anchor depth-nearest neighbor sets within the knn window.
struct NeighborBatch {
    int view = 0;
    std::vector<int> anchors;
    std::vector<std::vector<int>> neighbors;  // parallel to anchors
};

// patches_per_iter random patch origins; pairs_per_patch uniformly random
// valid distinct-pixel pairs per patch, each ordered so prior[k1] <= prior[k2]
// (ties keep sampled order).
PairBatch sample_pairs(const DepthPrior& prior, const DistillConfig& cfg, Rng& rng);

// For each anchor: the knn_k valid pixels in the centered knn_region window
// (anchor excluded) nearest in prior depth, measured by rank distance over the
// window's distinct values so only order statistics matter; ties broken by
// row-major index; short windows return all available.
NeighborBatch knn_neighbors(const DepthPrior& prior, const std::vector<int>& anchors,
                            const DistillConfig& cfg);

// Mean over pairs of max(d_r[k1] - d_r[k2] + m, 0). pixels is the sorted
// unique pixel list the rendered depths d_r are aligned with; grad (same
// length as d_r, may be null) accumulates d loss / d d_r.
double ranking_loss(const PairBatch& pairs, const std::vector<int>& pixels,
                    const std::vector<float>& d_r, float margin,
                    std::vector<float>* grad = nullptr);

// Mean over (anchor, neighbor) terms of max(|d_r[k1] - d_r[k2]| - m', 0);
// empty batch gives 0.
double continuity_loss(const NeighborBatch& nb, const std::vector<int>& pixels,
                       const std::vector<float>& d_r, float margin,
                       std::vector<float>* grad = nullptr);

// Slot of a flat pixel index in the sorted unique pixel list.
int pixel_slot(const std::vector<int>& pixels, int pixel);

}  // namespace spnf
