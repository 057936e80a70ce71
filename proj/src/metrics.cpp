#include "spnf/metrics.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "spnf/errors.hpp"

namespace spnf {

double psnr(const ImageRGB& a, const ImageRGB& b, double peak) {
    if (a.width != b.width || a.height != b.height)
        throw ValidationError("psnr: image shape mismatch");
    if (!(peak > 0.0)) throw ValidationError("psnr: peak must be > 0");
    double mse = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        mse += d * d;
    }
    mse /= static_cast<double>(a.data.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::vector<double> gaussian_kernel() {
    std::vector<double> k(kWin);
    double sum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        double x = i - (kWin - 1) / 2.0;
        k[i] = std::exp(-x * x / (2.0 * kSigma * kSigma));
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Separable valid-region convolution of a (w x h) channel plane.
std::vector<double> conv_valid(const std::vector<double>& img, int w, int h,
                               const std::vector<double>& k) {
    const int ow = w - kWin + 1, oh = h - kWin + 1;
    std::vector<double> tmp(static_cast<size_t>(ow) * h, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < kWin; ++i) s += k[i] * img[static_cast<size_t>(y) * w + x + i];
            tmp[static_cast<size_t>(y) * ow + x] = s;
        }
    std::vector<double> out(static_cast<size_t>(ow) * oh, 0.0);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < kWin; ++i) s += k[i] * tmp[static_cast<size_t>(y + i) * ow + x];
            out[static_cast<size_t>(y) * ow + x] = s;
        }
    return out;
}

}  // namespace

double ssim(const ImageRGB& a, const ImageRGB& b) {
    if (a.width != b.width || a.height != b.height)
        throw ValidationError("ssim: image shape mismatch");
    if (a.width < kWin || a.height < kWin)
        throw ValidationError("ssim: image smaller than the 11x11 window");
    const int w = a.width, h = a.height;
    const auto kern = gaussian_kernel();
    const size_t n = static_cast<size_t>(w) * h;

    double total = 0.0;
    size_t count = 0;
    std::vector<double> pa(n), pb(n), paa(n), pbb(n), pab(n);
    for (int c = 0; c < 3; ++c) {
        for (size_t i = 0; i < n; ++i) {
            double va = a.data[3 * i + c], vb = b.data[3 * i + c];
            pa[i] = va;
            pb[i] = vb;
            paa[i] = va * va;
            pbb[i] = vb * vb;
            pab[i] = va * vb;
        }
        auto mu_a = conv_valid(pa, w, h, kern);
        auto mu_b = conv_valid(pb, w, h, kern);
        auto m_aa = conv_valid(paa, w, h, kern);
        auto m_bb = conv_valid(pbb, w, h, kern);
        auto m_ab = conv_valid(pab, w, h, kern);
        for (size_t i = 0; i < mu_a.size(); ++i) {
            double va = m_aa[i] - mu_a[i] * mu_a[i];
            double vb = m_bb[i] - mu_b[i] * mu_b[i];
            double cov = m_ab[i] - mu_a[i] * mu_b[i];
            double num = (2.0 * mu_a[i] * mu_b[i] + kC1) * (2.0 * cov + kC2);
            double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + kC1) * (va + vb + kC2);
            total += num / den;
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

DepthErrorReport scale_invariant_depth_error(const ImageGray& d_hat, const ImageGray& d,
                                             const MaskImage& mask) {
    if (d_hat.width != d.width || d_hat.height != d.height || mask.width != d.width ||
        mask.height != d.height)
        throw ValidationError("scale_invariant_depth_error: shape mismatch");
    // 2x2 normal equations for min ||w d_hat + b - d||^2
    double sxx = 0, sx = 0, sxy = 0, sy = 0;
    int n = 0;
    for (size_t i = 0; i < d.pixel_count(); ++i) {
        if (!mask.data[i]) continue;
        double x = d_hat.data[i], y = d.data[i];
        sxx += x * x;
        sx += x;
        sxy += x * y;
        sy += y;
        ++n;
    }
    if (n < 2) throw ValidationError("scale_invariant_depth_error: fewer than 2 valid pixels");
    double det = sxx * static_cast<double>(n) - sx * sx;
    double scale = std::max(sxx, 1.0);
    if (std::abs(det) <= 1e-12 * scale * n)
        throw ValidationError("scale_invariant_depth_error: constant prediction, fit degenerate");
    DepthErrorReport rep;
    rep.n_valid = n;
    rep.w = (sxy * n - sx * sy) / det;
    rep.b = (sy - rep.w * sx) / static_cast<double>(n);
    double err = 0.0;
    for (size_t i = 0; i < d.pixel_count(); ++i) {
        if (!mask.data[i]) continue;
        double r = rep.w * d_hat.data[i] + rep.b - d.data[i];
        err += r * r;
    }
    rep.error = err / static_cast<double>(n);
    return rep;
}

}  // namespace spnf
