#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace panonerf {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

template <typename S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using ArrX = Eigen::Array<S, Eigen::Dynamic, 1>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// Bad caller input (out-of-range pixel coordinates, invalid intervals, ...).
class InputDomainError : public std::runtime_error {
public:
    explicit InputDomainError(const std::string& msg) : std::runtime_error(msg) {}
};

// Broken or missing on-disk data (manifests, images, checkpoints, configs).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values where the pipeline requires finite ones; training aborts on these.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require_domain(bool ok, const std::string& msg) {
    if (!ok) throw InputDomainError(msg);
}
inline void require_data(bool ok, const std::string& msg) {
    if (!ok) throw DataError(msg);
}
inline void require_finite(bool ok, const std::string& msg) {
    if (!ok) throw NumericError(msg);
}

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Mix an arbitrary number of 64-bit words into one stream seed.
template <typename... Ts>
uint64_t mix_seed(uint64_t first, Ts... rest) {
    uint64_t h = splitmix64(first);
    ((h = splitmix64(h ^ splitmix64(static_cast<uint64_t>(rest)))), ...);
    return h;
}

// Kahan compensated summation; error stays O(eps) independent of length.
inline double kahan_sum(const std::vector<double>& xs) {
    double s = 0.0, c = 0.0;
    for (double x : xs) {
        double y = x - c;
        double t = s + y;
        c = (t - s) - y;
        s = t;
    }
    return s;
}

// Deterministic uniform generator (xorshift64*). Doubles are built from the
// top 53 bits of the raw output so the stream does not depend on the standard
// library's distribution implementations.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : state_(splitmix64(seed ^ 0x7f4a7c15ULL)) {}

    uint64_t next_u64() {
        uint64_t x = state_;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        state_ = x;
        return x * 0x2545f4914f6cdd1dULL;
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    uint64_t next_below(uint64_t n) {
        // Rejection-free modulo bias is irrelevant at the n used here, but the
        // multiply-shift trick keeps it exact for n << 2^64.
        return static_cast<uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
    }

private:
    uint64_t state_;
};

}  // namespace panonerf
