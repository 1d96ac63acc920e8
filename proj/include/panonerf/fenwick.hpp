#pragma once

#include <bit>
#include <vector>

#include "panonerf/common.hpp"

namespace panonerf {

// Fenwick (binary indexed) tree over nonnegative doubles, supporting point
// assignment, prefix sums, and inverse-CDF selection, all O(log n). The raw
// value array is kept alongside the tree so assignments are exact deltas and
// a from-scratch rebuild is always available for verification.
class FenwickTree {
 public:
    explicit FenwickTree(std::vector<double> values) : values_(std::move(values)) {
        require_domain(!values_.empty(), "FenwickTree: empty value array");
        n_ = values_.size();
        build();
    }

    size_t size() const { return n_; }
    double value(size_t i) const { return values_[i]; }
    const std::vector<double>& values() const { return values_; }

    // Point assignment (not increment).
    void set(size_t i, double v) {
        require_domain(i < n_, "FenwickTree::set: index out of range");
        double delta = v - values_[i];
        values_[i] = v;
        for (size_t j = i + 1; j <= n_; j += j & (~j + 1)) tree_[j] += delta;
    }

    // Sum of values_[0..count).
    double prefix_sum(size_t count) const {
        require_domain(count <= n_, "FenwickTree::prefix_sum: count out of range");
        double s = 0.0;
        for (size_t j = count; j > 0; j -= j & (~j + 1)) s += tree_[j];
        return s;
    }

    double total() const { return prefix_sum(n_); }

    // Smallest i with prefix_sum(i+1) > target, i.e. the item an inverse-CDF
    // lookup at `target` selects. The descent visits exactly the nodes a
    // prefix_sum query of the returned index would, so the comparison is
    // bit-identical to searching the tree's own prefix sums.
    size_t select(double target) const {
        size_t pos = 0;
        for (size_t step = std::bit_floor(n_); step > 0; step >>= 1) {
            size_t next = pos + step;
            if (next <= n_ && tree_[next] <= target) {
                pos = next;
                target -= tree_[next];
            }
        }
        return pos < n_ ? pos : n_ - 1;
    }

    // Exact recomputation of every tree node from the value array.
    void rebuild() { build(); }

 private:
    void build() {
        tree_.assign(n_ + 1, 0.0);
        for (size_t i = 1; i <= n_; ++i) {
            tree_[i] += values_[i - 1];
            size_t parent = i + (i & (~i + 1));
            if (parent <= n_) tree_[parent] += tree_[i];
        }
    }

    size_t n_ = 0;
    std::vector<double> values_;
    std::vector<double> tree_;  // 1-indexed
};

}  // namespace panonerf
