#pragma once

#include <string>
#include <utility>
#include <vector>

#include "spnf/scene.hpp"

namespace spnf {

// Scene directory layout: cameras.json + images/ (8-bit RGB PNG), optional
// depth/ (16-bit gray PNG or PFM) and masks/ (8-bit PNG, 0 = invalid).
Scene load_scene(const std::string& dir);
void write_scene(const std::string& dir, const Scene& scene, DepthSource source,
                 int depth_scale = 65535, float depth_clip = 0.f);

// Held-out test protocol: every 8-th view is test; k_train views sampled
// evenly from the remaining pool by rounded linear interpolation with
// endpoints included.
std::pair<std::vector<int>, std::vector<int>> select_views(int n_total, int k_train);

// Sensor depth: raw 0 = invalid ("black regions"); valid values clipped to
// clip and divided by it, giving canonical values in (0,1].
DepthPrior normalize_sensor_depth(const ImageGray& raw, float clip);

// Monocular-model disparity (larger = nearer): negated and min-max normalized
// so the nearest pixel maps to 0 and the farthest to 1.
DepthPrior normalize_model_depth(const ImageGray& raw_disparity);

struct SyntheticConfig {
    std::string preset = "two-planes";  // or "sphere-on-plane"
    int n_views = 6;
    int resolution = 64;
    uint64_t seed = 0;
    // Prior distortion: canonical depth warped by d -> d^warp_exponent plus
    // uniform noise in [-noise, noise], clamped to [0,1]. Exponent 1 and
    // noise 0 reproduce the ground-truth ordering exactly.
    float warp_exponent = 1.5f;
    float noise = 0.02f;
};

// Analytically ray-traced Lambertian scene with exact gt_depth and priors
// derived from it; deterministic given the seed.
Scene make_synthetic_scene(const SyntheticConfig& cfg);

}  // namespace spnf
