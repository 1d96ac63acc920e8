#pragma once

#include <utility>
#include <vector>

#include "panonerf/common.hpp"
#include "panonerf/erp.hpp"
#include "panonerf/fenwick.hpp"
#include "panonerf/image.hpp"

namespace panonerf {

// One training pixel across the whole dataset.
struct PixelId {
    int image_index = 0;
    int row = 0;
    int col = 0;

    bool operator==(const PixelId&) const = default;
};

// Maps PixelId <-> flat index over the concatenated training images.
class PixelLayout {
 public:
    explicit PixelLayout(std::vector<std::pair<int, int>> dims) : dims_(std::move(dims)) {
        require_domain(!dims_.empty(), "PixelLayout: no images");
        offsets_.reserve(dims_.size() + 1);
        offsets_.push_back(0);
        for (auto [w, h] : dims_) {
            require_domain(w >= 1 && h >= 1, "PixelLayout: image dims must be >= 1");
            offsets_.push_back(offsets_.back() + static_cast<size_t>(w) * h);
        }
    }

    size_t total_pixels() const { return offsets_.back(); }
    size_t image_count() const { return dims_.size(); }
    std::pair<int, int> dims(int image_index) const { return dims_[image_index]; }

    size_t flat_index(const PixelId& p) const {
        require_domain(p.image_index >= 0 && static_cast<size_t>(p.image_index) < dims_.size(),
                       "PixelLayout: image index out of range");
        auto [w, h] = dims_[p.image_index];
        require_domain(p.row >= 0 && p.row < h && p.col >= 0 && p.col < w,
                       "PixelLayout: pixel out of range");
        return offsets_[p.image_index] + static_cast<size_t>(p.row) * w + p.col;
    }

    PixelId pixel(size_t flat) const {
        require_domain(flat < total_pixels(), "PixelLayout: flat index out of range");
        int img = 0;
        while (offsets_[img + 1] <= flat) ++img;
        size_t rem = flat - offsets_[img];
        int w = dims_[img].first;
        return PixelId{img, static_cast<int>(rem / w), static_cast<int>(rem % w)};
    }

    bool operator==(const PixelLayout& other) const { return dims_ == other.dims_; }

 private:
    std::vector<std::pair<int, int>> dims_;
    std::vector<size_t> offsets_;
};

// Per-pixel base probability, normalized to sum 1.
struct DistortionTable {
    std::vector<double> p;
};

// Builds the distortion-aware base distribution: each pixel's probability is
// proportional to the solid angle its row subtends.
inline DistortionTable build_distortion_table(const PixelLayout& layout) {
    DistortionTable table;
    table.p.resize(layout.total_pixels());
    size_t cursor = 0;
    for (size_t img = 0; img < layout.image_count(); ++img) {
        auto [w, h] = layout.dims(static_cast<int>(img));
        std::vector<double> rows = solid_angle_rows(w, h);
        for (int v = 0; v < h; ++v) {
            for (int u = 0; u < w; ++u) table.p[cursor++] = rows[v];
        }
    }
    double total = kahan_sum(table.p);
    for (double& x : table.p) x /= total;
    return table;
}

// Equal probability everywhere; the base table used when distortion-aware
// sampling is disabled, so the rest of the pipeline is unchanged.
inline DistortionTable build_uniform_table(const PixelLayout& layout) {
    DistortionTable table;
    table.p.assign(layout.total_pixels(), 1.0 / static_cast<double>(layout.total_pixels()));
    return table;
}

// Loss-driven per-pixel state. Starts at 1 everywhere; each update overwrites
// a sampled pixel's entry with its most recent reconstruction loss, floored so
// no pixel ever becomes unreachable.
struct ContentState {
    std::vector<double> s;
    double floor_eps = 1e-4;

    ContentState(size_t n, double floor = 1e-4) : s(n, 1.0), floor_eps(floor) {
        require_domain(floor > 0.0, "ContentState: floor must be positive");
    }
};

// Applies a batch of (flat pixel, loss) updates; the last occurrence of a
// repeated pixel wins because updates land in batch order.
inline void content_update(ContentState& state,
                           const std::vector<std::pair<size_t, double>>& batch) {
    for (auto [flat, loss] : batch) {
        require_domain(flat < state.s.size(), "content_update: pixel out of range");
        require_data(std::isfinite(loss) && loss >= 0.0,
                     "content_update: loss must be finite and nonnegative");
        state.s[flat] = std::max(loss, state.floor_eps);
    }
}

// Combined draw table: w = p_d * s_c per pixel, kept in a Fenwick tree so both
// point updates from content feedback and inverse-CDF draws are O(log n).
// Normalization is implicit in the draw (probabilities are w / total).
class SamplingTable {
 public:
    SamplingTable(PixelLayout layout, const DistortionTable& pd, const ContentState& sc)
        : layout_(std::move(layout)), tree_(combined(pd, sc, layout_.total_pixels())) {}

    const PixelLayout& layout() const { return layout_; }
    double total_weight() const { return tree_.total(); }
    double weight(size_t flat) const { return tree_.value(flat); }
    double prefix_sum(size_t count) const { return tree_.prefix_sum(count); }
    size_t size() const { return tree_.size(); }

    // Re-derives w for the touched pixels only; everything else is untouched.
    void rebuild_combined(const DistortionTable& pd, const ContentState& sc,
                          const std::vector<size_t>& touched) {
        for (size_t flat : touched) {
            require_domain(flat < tree_.size(), "rebuild_combined: pixel out of range");
            tree_.set(flat, pd.p[flat] * sc.s[flat]);
        }
    }

    // m independent with-replacement draws, one uniform variate each.
    std::vector<PixelId> draw_batch(size_t m, Rng& rng) const {
        require_domain(m >= 1, "draw_batch: m must be >= 1");
        double total = tree_.total();
        require_finite(total > 0.0 && std::isfinite(total),
                       "draw_batch: degenerate total weight");
        std::vector<PixelId> out;
        out.reserve(m);
        for (size_t i = 0; i < m; ++i) {
            out.push_back(layout_.pixel(tree_.select(rng.uniform() * total)));
        }
        return out;
    }

    // Throws if the maintained total has drifted from a compensated fresh sum.
    void verify_total(double rel_tol = 1e-9) const {
        double fresh = kahan_sum(tree_.values());
        double maintained = tree_.total();
        require_finite(std::abs(maintained - fresh) <= rel_tol * std::abs(fresh),
                       "SamplingTable: maintained total drifted from fresh sum");
    }

 private:
    static std::vector<double> combined(const DistortionTable& pd, const ContentState& sc,
                                        size_t n) {
        require_domain(pd.p.size() == n && sc.s.size() == n,
                       "SamplingTable: table sizes disagree with layout");
        std::vector<double> w(n);
        for (size_t i = 0; i < n; ++i) {
            require_data(pd.p[i] > 0.0 && sc.s[i] > 0.0, "SamplingTable: nonpositive weight");
            w[i] = pd.p[i] * sc.s[i];
        }
        return w;
    }

    PixelLayout layout_;
    FenwickTree tree_;
};

// Per-pixel draw probability of one image, max-normalized to [0,1]. The
// weights vector is in flat-index order (e.g. a live table's weights or a
// persisted snapshot of them).
inline ErpImage sampling_heatmap(const PixelLayout& layout, const std::vector<double>& weights,
                                 int image_index) {
    require_domain(weights.size() == layout.total_pixels(), "sampling_heatmap: weight count mismatch");
    auto [w, h] = layout.dims(image_index);
    ErpImage img(w, h);
    double peak = 0.0;
    std::vector<double> vals(static_cast<size_t>(w) * h);
    for (int v = 0; v < h; ++v) {
        for (int u = 0; u < w; ++u) {
            double x = weights[layout.flat_index({image_index, v, u})];
            vals[static_cast<size_t>(v) * w + u] = x;
            peak = std::max(peak, x);
        }
    }
    require_finite(peak > 0.0 && std::isfinite(peak), "sampling_heatmap: degenerate weights");
    for (int v = 0; v < h; ++v) {
        for (int u = 0; u < w; ++u) {
            float g = static_cast<float>(vals[static_cast<size_t>(v) * w + u] / peak);
            img.at(u, v, 0) = g;
            img.at(u, v, 1) = g;
            img.at(u, v, 2) = g;
        }
    }
    return img;
}

inline ErpImage sampling_heatmap(const SamplingTable& table, int image_index) {
    std::vector<double> w(table.size());
    for (size_t i = 0; i < w.size(); ++i) w[i] = table.weight(i);
    return sampling_heatmap(table.layout(), w, image_index);
}

}  // namespace panonerf
