#pragma once

#include "spnf/image.hpp"

namespace spnf {

struct DepthErrorReport {
    double w = 0.0;      // fitted scale
    double b = 0.0;      // fitted offset
    double error = 0.0;  // mean squared residual after the fit
    int n_valid = 0;
};

// 10 log10(peak^2 / MSE); identical images report +inf.
double psnr(const ImageRGB& a, const ImageRGB& b, double peak = 1.0);

// Standard structural similarity: C1 = 0.01^2, C2 = 0.03^2, 11x11 Gaussian
// window sigma 1.5, per channel on [0,1] data, mean over the valid region.
double ssim(const ImageRGB& a, const ImageRGB& b);

// Least-squares affine fit w * d_hat + b ~ d over valid pixels; error is the
// mean squared residual. Errors out when d_hat is constant over the mask.
DepthErrorReport scale_invariant_depth_error(const ImageGray& d_hat, const ImageGray& d,
                                             const MaskImage& mask);

}  // namespace spnf
