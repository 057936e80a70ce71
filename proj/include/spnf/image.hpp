#pragma once

#include <cstdint>
#include <vector>

namespace spnf {

// Row-major H x W x 3 float image, values nominally in [0,1].
struct ImageRGB {
    int width = 0;
    int height = 0;
    std::vector<float> data;  // 3 * width * height

    ImageRGB() = default;
    ImageRGB(int w, int h) : width(w), height(h), data(static_cast<size_t>(3) * w * h, 0.f) {}

    float* px(int x, int y) { return data.data() + 3 * (static_cast<size_t>(y) * width + x); }
    const float* px(int x, int y) const {
        return data.data() + 3 * (static_cast<size_t>(y) * width + x);
    }
    size_t pixel_count() const { return static_cast<size_t>(width) * height; }
};

// Row-major H x W scalar map.
struct ImageGray {
    int width = 0;
    int height = 0;
    std::vector<float> data;

    ImageGray() = default;
    ImageGray(int w, int h, float fill = 0.f)
        : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {}

    float& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
    float at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }
    size_t pixel_count() const { return static_cast<size_t>(width) * height; }
};

// Row-major H x W boolean mask; nonzero = valid.
struct MaskImage {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> data;

    MaskImage() = default;
    MaskImage(int w, int h, uint8_t fill = 1)
        : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {}

    bool at(int x, int y) const { return data[static_cast<size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool v) { data[static_cast<size_t>(y) * width + x] = v ? 1 : 0; }
    size_t pixel_count() const { return static_cast<size_t>(width) * height; }
};

}  // namespace spnf
