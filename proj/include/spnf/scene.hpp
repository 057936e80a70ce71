#pragma once

#include <optional>
#include <vector>

#include "spnf/camera.hpp"
#include "spnf/image.hpp"

namespace spnf {

enum class DepthSource { sensor, model, analytic };

// Canonicalized coarse depth map: values in [0,1], larger = farther.
// Pixels with mask == false must never be read by any loss.
struct DepthPrior {
    ImageGray values;
    MaskImage mask;
    DepthSource source = DepthSource::analytic;

    int width() const { return values.width; }
    int height() const { return values.height; }
};

struct Scene {
    std::vector<Camera> cameras;
    std::vector<ImageRGB> images;
    std::vector<std::optional<DepthPrior>> priors;    // one slot per view, may be empty
    std::vector<std::optional<ImageGray>> gt_depth;   // synthetic scenes only

    size_t view_count() const { return cameras.size(); }
    int width() const { return cameras.empty() ? 0 : cameras[0].width; }
    int height() const { return cameras.empty() ? 0 : cameras[0].height; }
};

}  // namespace spnf
