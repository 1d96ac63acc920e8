#pragma once

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "panonerf/common.hpp"
#include "panonerf/image.hpp"

namespace panonerf {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline uint8_t quantize8(float v) {
    float c = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
    return static_cast<uint8_t>(std::lround(c * 255.0f));
}

}  // namespace detail

// 8-bit RGB PNG. Values are clamped to [0,1] and rounded; no gamma chunk is
// written, the bytes are the raw quantized floats.
inline void write_png_rgb8(const std::string& path, const ErpImage& img) {
    require_data(img.width > 0 && img.height > 0, "write_png_rgb8: empty image");
    detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
    require_data(fp != nullptr, "write_png_rgb8: cannot open " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    require_data(png != nullptr, "write_png_rgb8: png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw DataError("write_png_rgb8: png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("write_png_rgb8: libpng error writing " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<uint8_t> row(static_cast<size_t>(img.width) * 3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < 3; ++c) row[3 * x + c] = detail::quantize8(img.at(x, y, c));
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// 8-bit grayscale PNG from doubles in [0,1] (row-major, w*h values).
inline void write_png_gray8(const std::string& path, const std::vector<double>& values, int width,
                            int height) {
    require_data(width > 0 && height > 0, "write_png_gray8: empty image");
    require_data(values.size() == static_cast<size_t>(width) * height,
                 "write_png_gray8: size mismatch");
    detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
    require_data(fp != nullptr, "write_png_gray8: cannot open " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    require_data(png != nullptr, "write_png_gray8: png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw DataError("write_png_gray8: png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("write_png_gray8: libpng error writing " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<uint8_t> row(static_cast<size_t>(width));
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            row[x] = detail::quantize8(static_cast<float>(values[static_cast<size_t>(y) * width + x]));
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// Reads an 8-bit (or 16-bit, downconverted) PNG as RGB floats in [0,1].
// Palette/gray/alpha variants are expanded to RGB; alpha is dropped.
inline ErpImage read_png_rgb(const std::string& path) {
    detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
    require_data(fp != nullptr, "read_png_rgb: cannot open " + path);

    uint8_t sig[8];
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw DataError("read_png_rgb: not a PNG file: " + path);
    }

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    require_data(png != nullptr, "read_png_rgb: png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw DataError("read_png_rgb: png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("read_png_rgb: libpng error reading " + path);
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);

    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    require_data(png_get_rowbytes(png, info) == static_cast<size_t>(w) * 3,
                 "read_png_rgb: unexpected row size in " + path);

    ErpImage img(static_cast<int>(w), static_cast<int>(h));
    std::vector<uint8_t> row(static_cast<size_t>(w) * 3);
    for (png_uint_32 y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (png_uint_32 x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                img.at(static_cast<int>(x), static_cast<int>(y), c) = row[3 * x + c] / 255.0f;
            }
        }
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

}  // namespace panonerf
