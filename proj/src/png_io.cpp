#include "spnf/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "spnf/errors.hpp"

namespace spnf {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReader() { png_destroy_read_struct(&png, &info, nullptr); }
};

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWriter() { png_destroy_write_struct(&png, &info); }
};

void read_png(const std::string& path, int want_depth, int want_color, int& w, int& h,
              std::vector<uint8_t>& bytes, size_t row_bytes_expected_per_px) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw IoError("cannot open " + path);
    PngReader r;
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    r.info = png_create_info_struct(r.png);
    if (setjmp(png_jmpbuf(r.png))) throw IoError("failed to decode PNG " + path);
    png_init_io(r.png, f.get());
    png_read_info(r.png, r.info);

    int depth = png_get_bit_depth(r.png, r.info);
    int color = png_get_color_type(r.png, r.info);

    if (want_color == PNG_COLOR_TYPE_RGB) {
        if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
        if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
            png_set_gray_to_rgb(r.png);
        if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(r.png);
        if (depth == 16) png_set_strip_16(r.png);
        if (depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
    } else {  // grayscale
        if (color != PNG_COLOR_TYPE_GRAY)
            throw ValidationError(path + ": expected grayscale PNG");
        if (want_depth == 16) {
            if (depth != 16) throw ValidationError(path + ": expected 16-bit depth PNG");
            png_set_swap(r.png);  // stored big-endian
        } else {
            if (depth == 16) png_set_strip_16(r.png);
            if (depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
        }
    }
    png_read_update_info(r.png, r.info);

    w = static_cast<int>(png_get_image_width(r.png, r.info));
    h = static_cast<int>(png_get_image_height(r.png, r.info));
    size_t row_bytes = png_get_rowbytes(r.png, r.info);
    if (row_bytes != static_cast<size_t>(w) * row_bytes_expected_per_px)
        throw IoError(path + ": unexpected PNG row layout");
    bytes.resize(row_bytes * h);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y) rows[y] = bytes.data() + row_bytes * y;
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);
}

void write_png(const std::string& path, int w, int h, int depth, int color,
               const std::vector<uint8_t>& bytes, size_t row_bytes) {
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw IoError("cannot open " + path + " for writing");
    PngWriter wr;
    wr.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    wr.info = png_create_info_struct(wr.png);
    if (setjmp(png_jmpbuf(wr.png))) throw IoError("failed to encode PNG " + path);
    png_init_io(wr.png, f.get());
    png_set_IHDR(wr.png, wr.info, w, h, depth, color, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(wr.png, wr.info);
    if (depth == 16) png_set_swap(wr.png);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y)
        rows[y] = const_cast<png_bytep>(bytes.data() + row_bytes * y);
    png_write_image(wr.png, rows.data());
    png_write_end(wr.png, nullptr);
}

}  // namespace

ImageRGB read_png_rgb8(const std::string& path) {
    int w, h;
    std::vector<uint8_t> bytes;
    read_png(path, 8, PNG_COLOR_TYPE_RGB, w, h, bytes, 3);
    ImageRGB img(w, h);
    for (size_t i = 0; i < img.data.size(); ++i)
        img.data[i] = static_cast<float>(bytes[i]) / 255.f;
    return img;
}

void write_png_rgb8(const std::string& path, const ImageRGB& img) {
    std::vector<uint8_t> bytes(img.data.size());
    for (size_t i = 0; i < img.data.size(); ++i) {
        float v = std::min(1.f, std::max(0.f, img.data[i]));
        bytes[i] = static_cast<uint8_t>(std::lround(v * 255.f));
    }
    write_png(path, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, bytes, 3u * img.width);
}

Gray16 read_png_gray16(const std::string& path) {
    int w, h;
    std::vector<uint8_t> bytes;
    read_png(path, 16, PNG_COLOR_TYPE_GRAY, w, h, bytes, 2);
    Gray16 img;
    img.width = w;
    img.height = h;
    img.data.resize(static_cast<size_t>(w) * h);
    std::memcpy(img.data.data(), bytes.data(), bytes.size());
    return img;
}

void write_png_gray16(const std::string& path, const Gray16& img) {
    std::vector<uint8_t> bytes(img.data.size() * 2);
    std::memcpy(bytes.data(), img.data.data(), bytes.size());
    write_png(path, img.width, img.height, 16, PNG_COLOR_TYPE_GRAY, bytes, 2u * img.width);
}

MaskImage read_png_mask(const std::string& path) {
    int w, h;
    std::vector<uint8_t> bytes;
    read_png(path, 8, PNG_COLOR_TYPE_GRAY, w, h, bytes, 1);
    MaskImage mask(w, h);
    for (size_t i = 0; i < mask.data.size(); ++i) mask.data[i] = bytes[i] ? 1 : 0;
    return mask;
}

void write_png_mask(const std::string& path, const MaskImage& mask) {
    std::vector<uint8_t> bytes(mask.data.size());
    for (size_t i = 0; i < bytes.size(); ++i) bytes[i] = mask.data[i] ? 255 : 0;
    write_png(path, mask.width, mask.height, 8, PNG_COLOR_TYPE_GRAY, bytes, 1u * mask.width);
}

ImageGray read_pfm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::string magic;
    int w, h;
    double scale;
    f >> magic >> w >> h >> scale;
    if (magic != "Pf") throw ValidationError(path + ": not a grayscale PFM");
    if (scale >= 0) throw ValidationError(path + ": big-endian PFM not supported");
    f.get();  // single whitespace before the raster
    ImageGray img(w, h);
    // rows are stored bottom-to-top
    for (int y = h - 1; y >= 0; --y)
        f.read(reinterpret_cast<char*>(img.data.data() + static_cast<size_t>(y) * w),
               sizeof(float) * w);
    if (!f) throw IoError(path + ": truncated PFM");
    return img;
}

void write_pfm(const std::string& path, const ImageGray& img) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << "Pf\n" << img.width << " " << img.height << "\n-1.0\n";
    for (int y = img.height - 1; y >= 0; --y)
        f.write(reinterpret_cast<const char*>(img.data.data() +
                                              static_cast<size_t>(y) * img.width),
                sizeof(float) * img.width);
    if (!f) throw IoError("failed writing " + path);
}

}  // namespace spnf
