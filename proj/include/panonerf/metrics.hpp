#ifndef PANONERF_METRICS_HPP
#define PANONERF_METRICS_HPP

// Image-quality metrics: PSNR, Gaussian-windowed SSIM, PSNR split over five
// fixed latitude bands, and automatic low/high-frequency 60x60 crop selection
// by Laplacian response. Everything works on [0,1] RGB ERP images.

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "panonerf/common.hpp"
#include "panonerf/image.hpp"

namespace panonerf {

// PSNR is capped here so CSV cells stay finite when images coincide.
inline constexpr double kPsnrCap = 99.0;

inline double mse(const ErpImage& a, const ErpImage& b) {
    require_domain(a.same_dims(b), "mse: image dims differ");
    double se = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        se += d * d;
    }
    return se / static_cast<double>(a.data.size());
}

inline double psnr_from_mse(double m) {
    require_domain(m >= 0.0, "psnr_from_mse: negative MSE");
    if (m == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / m));
}

inline double psnr(const ErpImage& a, const ErpImage& b) { return psnr_from_mse(mse(a, b)); }

// ---------------------------------------------------------------------------
// SSIM: mean local SSIM over all fully-interior 11x11 windows, Gaussian
// weighted (sigma 1.5), k1=0.01 k2=0.03, dynamic range 1. Computed on
// luminance (0.299, 0.587, 0.114).

namespace detail {

inline const std::array<double, 121>& ssim_window() {
    static const std::array<double, 121> w = [] {
        std::array<double, 121> k{};
        double g[11], sum = 0.0;
        for (int i = 0; i < 11; ++i) g[i] = std::exp(-(i - 5.0) * (i - 5.0) / (2.0 * 1.5 * 1.5));
        for (int y = 0; y < 11; ++y)
            for (int x = 0; x < 11; ++x) sum += (k[y * 11 + x] = g[y] * g[x]);
        for (double& v : k) v /= sum;
        return k;
    }();
    return w;
}

}  // namespace detail

inline double ssim(const ErpImage& a, const ErpImage& b) {
    require_domain(a.same_dims(b), "ssim: image dims differ");
    require_domain(a.width >= 11 && a.height >= 11, "ssim: image smaller than the 11x11 window");
    std::vector<double> la = luminance(a), lb = luminance(b);
    const auto& win = detail::ssim_window();
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double acc = 0.0;
    long long count = 0;
    for (int y0 = 0; y0 + 11 <= a.height; ++y0) {
        for (int x0 = 0; x0 + 11 <= a.width; ++x0) {
            double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
            for (int dy = 0; dy < 11; ++dy)
                for (int dx = 0; dx < 11; ++dx) {
                    double w = win[dy * 11 + dx];
                    double px = la[(y0 + dy) * a.width + (x0 + dx)];
                    double py = lb[(y0 + dy) * a.width + (x0 + dx)];
                    mx += w * px;
                    my += w * py;
                    sxx += w * px * px;
                    syy += w * py * py;
                    sxy += w * px * py;
                }
            sxx -= mx * mx;
            syy -= my * my;
            sxy -= mx * my;
            acc += ((2.0 * mx * my + c1) * (2.0 * sxy + c2)) /
                   ((mx * mx + my * my + c1) * (sxx + syy + c2));
            ++count;
        }
    }
    return acc / static_cast<double>(count);
}

// ---------------------------------------------------------------------------
// Latitude bands. Index 0 is the southernmost band (bottom rows); the five
// intervals in degrees are [-90,-54], [-54,-18], [-18,18], [18,54], [54,90].

inline constexpr std::array<double, 6> kBandEdgesDeg{-90.0, -54.0, -18.0, 18.0, 54.0, 90.0};

inline int band_of_row(int v, int height) {
    require_domain(v >= 0 && v < height, "band_of_row: row out of range");
    double lat = 90.0 - 180.0 * (v + 0.5) / height;  // row-center latitude
    for (int k = 0; k < 4; ++k)
        if (lat < kBandEdgesDeg[k + 1]) return k;
    return 4;
}

// Per-band MSE; bands with no rows report NaN.
inline std::array<double, 5> band_mse(const ErpImage& a, const ErpImage& b) {
    require_domain(a.same_dims(b), "band_mse: image dims differ");
    std::array<double, 5> se{};
    std::array<long long, 5> n{};
    for (int v = 0; v < a.height; ++v) {
        int k = band_of_row(v, a.height);
        for (int u = 0; u < a.width; ++u)
            for (int c = 0; c < 3; ++c) {
                double d = static_cast<double>(a.at(u, v, c)) - static_cast<double>(b.at(u, v, c));
                se[k] += d * d;
                n[k] += 1;
            }
    }
    std::array<double, 5> out{};
    for (int k = 0; k < 5; ++k)
        out[k] = n[k] ? se[k] / static_cast<double>(n[k]) : std::numeric_limits<double>::quiet_NaN();
    return out;
}

inline std::array<double, 5> band_psnr(const ErpImage& a, const ErpImage& b) {
    std::array<double, 5> m = band_mse(a, b);
    std::array<double, 5> out{};
    for (int k = 0; k < 5; ++k)
        out[k] = std::isnan(m[k]) ? m[k] : psnr_from_mse(m[k]);
    return out;
}

// ---------------------------------------------------------------------------
// Frequency crops: score each 60x60 window by mean |3x3 Laplacian| (center 8,
// eight neighbors -1, replicate border) of the luminance; the max-score
// window is the high-frequency crop, the min-score window the low-frequency
// one. Windows slide on a stride grid; ties keep the top-left-most window.

struct CropRect {
    int x = 0, y = 0, w = 0, h = 0;
};

struct FrequencyCrops {
    CropRect low, high;
};

inline std::vector<double> laplacian_abs(const ErpImage& img) {
    std::vector<double> lum = luminance(img);
    std::vector<double> out(lum.size());
    auto clamp_at = [&](int x, int y) {
        x = std::max(0, std::min(img.width - 1, x));
        y = std::max(0, std::min(img.height - 1, y));
        return lum[static_cast<size_t>(y) * img.width + x];
    };
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            double acc = 8.0 * clamp_at(x, y);
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx)
                    if (dx || dy) acc -= clamp_at(x + dx, y + dy);
            out[static_cast<size_t>(y) * img.width + x] = std::abs(acc);
        }
    return out;
}

inline FrequencyCrops frequency_crops(const ErpImage& gt, int crop = 60, int stride = 10) {
    require_domain(crop >= 1 && stride >= 1, "frequency_crops: crop and stride must be positive");
    require_domain(gt.width >= crop && gt.height >= crop, "frequency_crops: image smaller than crop");
    std::vector<double> lap = laplacian_abs(gt);
    double best_hi = -1.0, best_lo = std::numeric_limits<double>::infinity();
    CropRect hi, lo;
    for (int y = 0; y + crop <= gt.height; y += stride) {
        for (int x = 0; x + crop <= gt.width; x += stride) {
            double sum = 0.0;
            for (int dy = 0; dy < crop; ++dy)
                for (int dx = 0; dx < crop; ++dx)
                    sum += lap[static_cast<size_t>(y + dy) * gt.width + (x + dx)];
            double score = sum / (static_cast<double>(crop) * crop);
            if (score > best_hi) {
                best_hi = score;
                hi = CropRect{x, y, crop, crop};
            }
            if (score < best_lo) {
                best_lo = score;
                lo = CropRect{x, y, crop, crop};
            }
        }
    }
    return FrequencyCrops{lo, hi};
}

inline double crop_psnr(const ErpImage& a, const ErpImage& b, const CropRect& r) {
    require_domain(a.same_dims(b), "crop_psnr: image dims differ");
    require_domain(r.w >= 1 && r.h >= 1 && r.x >= 0 && r.y >= 0 && r.x + r.w <= a.width &&
                       r.y + r.h <= a.height,
                   "crop_psnr: rect out of bounds");
    double se = 0.0;
    for (int v = r.y; v < r.y + r.h; ++v)
        for (int u = r.x; u < r.x + r.w; ++u)
            for (int c = 0; c < 3; ++c) {
                double d = static_cast<double>(a.at(u, v, c)) - static_cast<double>(b.at(u, v, c));
                se += d * d;
            }
    return psnr_from_mse(se / (static_cast<double>(r.w) * r.h * 3.0));
}

}  // namespace panonerf

#endif  // PANONERF_METRICS_HPP
