#pragma once

#include <vector>

#include "panonerf/common.hpp"

namespace panonerf {

// W x H RGB raster with float channels in [0, 1]; row 0 is the top of the
// panorama (latitude +90 deg). Data is row-major, 3 floats per pixel.
struct ErpImage {
    int width = 0;
    int height = 0;
    std::vector<float> data;

    ErpImage() = default;
    ErpImage(int w, int h, float fill = 0.0f)
        : width(w), height(h), data(static_cast<size_t>(w) * h * 3, fill) {}

    float& at(int x, int y, int c) { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }
    float at(int x, int y, int c) const { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }

    size_t pixel_count() const { return static_cast<size_t>(width) * height; }

    bool same_dims(const ErpImage& other) const {
        return width == other.width && height == other.height;
    }
};

// Rec. 601 luminance.
inline std::vector<double> luminance(const ErpImage& img) {
    std::vector<double> lum(img.pixel_count());
    for (size_t i = 0; i < lum.size(); ++i) {
        lum[i] = 0.299 * img.data[3 * i] + 0.587 * img.data[3 * i + 1] + 0.114 * img.data[3 * i + 2];
    }
    return lum;
}

}  // namespace panonerf
