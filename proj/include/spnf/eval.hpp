#pragma once

#include <vector>

#include "spnf/field.hpp"
#include "spnf/metrics.hpp"
#include "spnf/scene.hpp"

namespace spnf {

// Full-frame render at pixel centers. depth is the raw expected depth
// sum w_i t_i; norm_depth the opacity-normalized diagnostic variant.
struct ViewRender {
    ImageRGB color;
    ImageGray depth;
    ImageGray norm_depth;
    ImageGray opacity;
};
ViewRender render_view(const FieldParams& params, const Camera& cam, int n_samples,
                       int threads = 1);

struct ViewMetrics {
    int view = 0;
    double psnr = 0.0;
    double ssim = 0.0;
    double depth_error = 0.0;
    int n_valid = 0;
    bool has_depth = false;
};

// PSNR/SSIM against the stored images; scale-invariant depth error of the
// opacity-normalized depth (pixels with opacity <= 0.5 masked out) against
// gt_depth where present.
std::vector<ViewMetrics> evaluate_views(const FieldParams& params, const Scene& scene,
                                        const std::vector<int>& view_ids, int n_samples,
                                        int threads = 1);

}  // namespace spnf
