#pragma once

// Hand-rolled generators and fit helpers for the property tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

namespace testsupport {

/// SplitMix64 stream; deterministic across platforms.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : s_(seed) {}
    std::uint64_t next() {
        std::uint64_t z = (s_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Log-uniform on [lo, hi], lo > 0.
    double log_uniform(double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); }
    std::int64_t integer(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(next() % static_cast<std::uint64_t>(hi - lo + 1));
    }

private:
    std::uint64_t s_;
};

/// Running [min, max] of observed ratios.
struct RatioFit {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    std::size_t count = 0;
    void add(double r) {
        lo = std::min(lo, r);
        hi = std::max(hi, r);
        ++count;
    }
    [[nodiscard]] double spread() const { return hi / lo; }
    [[nodiscard]] std::string str() const {
        char buf[128];
        std::snprintf(buf, sizeof buf, "c=%.4g C=%.4g C/c=%.4g (n=%zu)", lo, hi, spread(), count);
        return buf;
    }
};

inline bool rel_close(double a, double b, double tol) {
    if (a == b) return true;
    return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}

} // namespace testsupport
