#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spnf/image.hpp"

namespace spnf {

// 8-bit RGB PNG. Values map linearly between [0,1] floats and 0..255.
ImageRGB read_png_rgb8(const std::string& path);
void write_png_rgb8(const std::string& path, const ImageRGB& img);

// 16-bit grayscale PNG, raw integer samples.
struct Gray16 {
    int width = 0;
    int height = 0;
    std::vector<uint16_t> data;
};
Gray16 read_png_gray16(const std::string& path);
void write_png_gray16(const std::string& path, const Gray16& img);

// 8-bit grayscale PNG mask; 0 = invalid.
MaskImage read_png_mask(const std::string& path);
void write_png_mask(const std::string& path, const MaskImage& mask);

// Grayscale PFM ("Pf"), float samples, rows stored bottom-to-top.
ImageGray read_pfm(const std::string& path);
void write_pfm(const std::string& path, const ImageGray& img);

}  // namespace spnf
