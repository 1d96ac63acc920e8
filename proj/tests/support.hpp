#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "panonerf/common.hpp"

namespace testsupport {

// Upper-tail chi-square critical values at significance 0.001, precomputed
// with scipy.stats.chi2.ppf(0.999, dof).
inline double chi2_crit_999(int dof) {
    static const std::map<int, double> table = {
        {7, 24.321886},   {31, 61.098306},   {63, 103.442377},
        {127, 181.993045}, {999, 1142.847984}, {2047, 2250.439180},
    };
    auto it = table.find(dof);
    if (it != table.end()) return it->second;
    // Wilson-Hilferty approximation; relative error < 1% for dof >= 7.
    const double z = 3.0902323061678132;  // Phi^{-1}(0.999)
    double d = static_cast<double>(dof);
    double t = 1.0 - 2.0 / (9.0 * d) + z * std::sqrt(2.0 / (9.0 * d));
    return d * t * t * t;
}

// Asymptotic two-sided Kolmogorov-Smirnov critical value at alpha = 0.001:
// sqrt(-ln(alpha/2)/2) / sqrt(n).
inline double ks_crit_999(size_t n) {
    return 1.949475 / std::sqrt(static_cast<double>(n));
}

// Pearson chi-square statistic of observed counts against probabilities p
// (sum normalized internally). Cells below min_expected are pooled into
// their predecessor to keep the statistic valid.
inline double chi2_stat(const std::vector<long long>& counts, const std::vector<double>& probs,
                        long long total, int& dof_out, double min_expected = 5.0) {
    double psum = 0.0;
    for (double p : probs) psum += p;
    double stat = 0.0;
    double pool_exp = 0.0, pool_obs = 0.0;
    int cells = 0;
    for (size_t i = 0; i < counts.size(); ++i) {
        pool_exp += static_cast<double>(total) * probs[i] / psum;
        pool_obs += static_cast<double>(counts[i]);
        if (pool_exp >= min_expected) {
            double d = pool_obs - pool_exp;
            stat += d * d / pool_exp;
            pool_exp = pool_obs = 0.0;
            ++cells;
        }
    }
    if (pool_exp > 0.0) {
        if (cells == 0) {
            double d = pool_obs - pool_exp;
            stat += d * d / pool_exp;
            ++cells;
        } else {
            // fold the tail into the last closed cell
            double d = pool_obs - pool_exp;
            stat += d * d / pool_exp;
        }
    }
    dof_out = cells - 1;
    return stat;
}

// Two-sided KS statistic of samples against the uniform CDF on [lo, hi].
inline double ks_stat_uniform(std::vector<double> samples, double lo, double hi) {
    std::sort(samples.begin(), samples.end());
    double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (size_t i = 0; i < samples.size(); ++i) {
        double cdf = (samples[i] - lo) / (hi - lo);
        d = std::max(d, std::abs(cdf - static_cast<double>(i) / n));
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - cdf));
    }
    return d;
}

// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::current_path() / "scratch" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

}  // namespace testsupport
