#pragma once

// Log-domain arithmetic helpers shared by the binomial, oracle and simulator code.

#include <cmath>
#include <limits>
#include <utility>

namespace devbound {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kLn2 = 0.693147180559945309417232121458176568;

/// Natural-log probability. `value` is in [-inf, 0].
struct LogProb {
    double value = kNegInf;

    [[nodiscard]] double prob() const { return std::exp(value); }
    friend bool operator==(const LogProb&, const LogProb&) = default;
};

/// ln(e^a + e^b) without overflow.
inline double log_add_exp(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    if (a < b) std::swap(a, b);
    return a + std::log1p(std::exp(b - a));
}

/// ln(1 - e^x) for x <= 0, accurate at both ends.
inline double log1m_exp(double x) {
    if (x > -kLn2) return std::log(-std::expm1(x));
    return std::log1p(-std::exp(x));
}

/// ln(1 + e^x).
inline double log1p_exp(double x) {
    if (x > 36.0) return x + std::exp(-x);
    return std::log1p(std::exp(x));
}

/// ln(-ln(1 - e^x)) for x <= 0; the log of the "hazard" of a complementary
/// probability e^x. Stays accurate when e^x is far below machine epsilon,
/// which is what lets exponents like e^{10^4} multiply it.
inline double log_neg_log1m_exp(double x) {
    if (x == kNegInf) return kNegInf;
    if (x < -18.0) {
        // -ln(1-u) = u (1 + u/2 + u^2/3 + ...)
        const double u = std::exp(x);
        return x + std::log1p(u / 2.0 + u * u / 3.0);
    }
    const double l = log1m_exp(x);
    if (l == kNegInf) return kInf;
    return std::log(-l);
}

/// Neumaier compensated sum.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    [[nodiscard]] double value() const { return sum_ + comp_; }
    void scale(double f) {
        sum_ *= f;
        comp_ *= f;
    }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Running log-sum-exp with a compensated mantissa. Terms are rescaled to the
/// largest one seen so far.
class LogAccumulator {
public:
    void add(double log_term) {
        if (log_term == kNegInf) return;
        if (log_term > anchor_) {
            if (anchor_ != kNegInf) acc_.scale(std::exp(anchor_ - log_term));
            anchor_ = log_term;
        }
        acc_.add(std::exp(log_term - anchor_));
    }
    [[nodiscard]] double value() const {
        if (anchor_ == kNegInf) return kNegInf;
        return anchor_ + std::log(acc_.value());
    }

private:
    double anchor_ = kNegInf;
    CompensatedSum acc_;
};

} // namespace devbound
