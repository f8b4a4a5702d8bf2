#pragma once

// Log-space binomial machinery: pmf, tails, tail inversion, KL divergence,
// the classical analytic tail bounds and absolute central moments.

#include "devbound/constants.hpp"
#include "devbound/errors.hpp"
#include "devbound/logspace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace devbound {

/// Y ~ Binomial(n, p).
struct BinomialSpec {
    std::int64_t n = 1;
    double p = 0.5;

    BinomialSpec() = default;
    BinomialSpec(std::int64_t n_, double p_) : n(n_), p(p_) { validate(); }

    void validate() const {
        if (n < 1) throw ValidationError("binomial n must be >= 1, got " + std::to_string(n));
        if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("binomial p must lie in [0,1]");
    }
};

namespace detail {

inline constexpr double kLn2Pi = 1.837877066409345483560659472811235279;

/// ln(k!) - [(k + 1/2) ln k - k + ln sqrt(2 pi)], the Stirling remainder.
inline double stirlerr(double k) {
    constexpr double S0 = 1.0 / 12.0;
    constexpr double S1 = 1.0 / 360.0;
    constexpr double S2 = 1.0 / 1260.0;
    constexpr double S3 = 1.0 / 1680.0;
    constexpr double S4 = 1.0 / 1188.0;
    if (k <= 15.0) {
        const long double kk = k;
        return static_cast<double>(std::lgamma(kk + 1.0L) - (kk + 0.5L) * std::log(kk) + kk -
                                   0.918938533204672741780329736405617639861L);
    }
    const double kk = k * k;
    if (k > 500.0) return (S0 - S1 / kk) / k;
    if (k > 80.0) return (S0 - (S1 - S2 / kk) / kk) / k;
    if (k > 35.0) return (S0 - (S1 - (S2 - S3 / kk) / kk) / kk) / k;
    return (S0 - (S1 - (S2 - (S3 - S4 / kk) / kk) / kk) / kk) / k;
}

/// Deviance term x ln(x/m) + m - x, evaluated without cancellation near x = m.
inline double bd0(double x, double m) {
    if (std::abs(x - m) < 0.1 * (x + m)) {
        double v = (x - m) / (x + m);
        double s = (x - m) * v;
        double ej = 2.0 * x * v;
        v *= v;
        for (int j = 1; j < 1000; ++j) {
            ej *= v;
            const double s1 = s + ej / (2 * j + 1);
            if (s1 == s) return s1;
            s = s1;
        }
        return s;
    }
    return x * std::log(x / m) + m - x;
}

} // namespace detail

/// ln P(Y = k) via the saddle-point expansion (Loader's form), accurate to a
/// few ulps of the log for every k in [0, n].
inline double log_pmf(const BinomialSpec& spec, std::int64_t k) {
    const double n = static_cast<double>(spec.n);
    const double p = spec.p;
    const double q = 1.0 - p;
    if (k < 0 || k > spec.n) return kNegInf;
    if (p == 0.0) return k == 0 ? 0.0 : kNegInf;
    if (p == 1.0) return k == spec.n ? 0.0 : kNegInf;
    const double x = static_cast<double>(k);
    if (k == 0) return p < 0.1 ? -detail::bd0(n, n * q) - n * p : n * std::log1p(-p);
    if (k == spec.n) return q < 0.1 ? -detail::bd0(n, n * p) - n * q : n * std::log(p);
    const double lc = detail::stirlerr(n) - detail::stirlerr(x) - detail::stirlerr(n - x) -
                      detail::bd0(x, n * p) - detail::bd0(n - x, n * q);
    const double lf = detail::kLn2Pi + std::log(x) + std::log1p(-x / n);
    return lc - 0.5 * lf;
}

namespace detail {

inline std::int64_t binomial_mode(const BinomialSpec& spec) {
    const auto m = static_cast<std::int64_t>(std::floor((static_cast<double>(spec.n) + 1.0) * spec.p));
    return std::clamp<std::int64_t>(m, 0, spec.n);
}

/// ln sum_{j} P(Y = j) walking from `start` by `step` while terms keep
/// shrinking; stops once the geometric remainder is below double resolution.
/// Terms are summed smallest first.
inline double log_monotone_tail_sum(const BinomialSpec& spec, std::int64_t start, int step) {
    const double first = log_pmf(spec, start);
    if (first == kNegInf) return kNegInf;
    std::vector<double> rel;
    rel.push_back(1.0);
    double running = 1.0;
    double prev = first;
    for (std::int64_t j = start + step; j >= 0 && j <= spec.n; j += step) {
        const double lt = log_pmf(spec, j);
        const double r = std::exp(lt - prev);
        const double term = std::exp(lt - first);
        rel.push_back(term);
        running += term;
        prev = lt;
        if (r < 1.0 && term * r / (1.0 - r) < 1e-18 * running) break;
        if (term == 0.0) break;
    }
    CompensatedSum s;
    for (auto it = rel.rbegin(); it != rel.rend(); ++it) s.add(*it);
    return first + std::log(s.value());
}

} // namespace detail

/// ln P(Y >= k). k <= 0 gives 0, k > n gives -inf.
inline LogProb log_upper_tail(const BinomialSpec& spec, std::int64_t k) {
    if (k <= 0) return {0.0};
    if (k > spec.n) return {kNegInf};
    if (spec.p == 0.0) return {kNegInf};
    if (spec.p == 1.0) return {0.0};
    const std::int64_t mode = detail::binomial_mode(spec);
    if (k > mode) return {detail::log_monotone_tail_sum(spec, k, +1)};
    // Complement of the lower tail P(Y <= k-1), whose terms shrink downward.
    const double lower = detail::log_monotone_tail_sum(spec, k - 1, -1);
    return {std::min(0.0, log1m_exp(lower))};
}

/// ln P(Y <= k).
inline LogProb log_lower_tail(const BinomialSpec& spec, std::int64_t k) {
    if (k < 0) return {kNegInf};
    if (k >= spec.n) return {0.0};
    if (spec.p == 0.0) return {0.0};
    if (spec.p == 1.0) return {kNegInf};
    const std::int64_t mode = detail::binomial_mode(spec);
    if (k < mode) return {detail::log_monotone_tail_sum(spec, k, -1)};
    const double upper = detail::log_monotone_tail_sum(spec, k + 1, +1);
    return {std::min(0.0, log1m_exp(upper))};
}

/// Smallest k in [0, n+1] with ln P(Y >= k) <= log_target.
inline std::int64_t binom_quantile(const BinomialSpec& spec, LogProb log_target) {
    std::int64_t lo = 0;
    std::int64_t hi = spec.n + 1;
    while (lo < hi) {
        const std::int64_t mid = lo + (hi - lo) / 2;
        if (log_upper_tail(spec, mid).value <= log_target.value)
            hi = mid;
        else
            lo = mid + 1;
    }
    return lo;
}

/// Every lower and upper log tail of one binomial, built once by cumulative
/// log-sums that start at each extremity and move inward.
class TailTable {
public:
    explicit TailTable(const BinomialSpec& spec) : spec_(spec) {
        const auto n = spec.n;
        log_pmf_.resize(static_cast<std::size_t>(n + 1));
        for (std::int64_t k = 0; k <= n; ++k) log_pmf_[static_cast<std::size_t>(k)] = log_pmf(spec, k);
        log_ge_.assign(static_cast<std::size_t>(n + 2), kNegInf);
        log_le_.assign(static_cast<std::size_t>(n + 2), kNegInf);
        LogAccumulator up;
        for (std::int64_t k = n; k >= 0; --k) {
            up.add(log_pmf_[static_cast<std::size_t>(k)]);
            log_ge_[static_cast<std::size_t>(k)] = std::min(0.0, up.value());
        }
        LogAccumulator down;
        for (std::int64_t k = 0; k <= n; ++k) {
            down.add(log_pmf_[static_cast<std::size_t>(k)]);
            log_le_[static_cast<std::size_t>(k + 1)] = std::min(0.0, down.value());
        }
        // Pin the totals so that complements behave exactly at the ends.
        log_ge_[0] = 0.0;
        log_le_[static_cast<std::size_t>(n + 1)] = 0.0;
    }

    [[nodiscard]] const BinomialSpec& spec() const { return spec_; }
    [[nodiscard]] std::int64_t n() const { return spec_.n; }

    [[nodiscard]] double log_pmf_at(std::int64_t k) const {
        if (k < 0 || k > spec_.n) return kNegInf;
        return log_pmf_[static_cast<std::size_t>(k)];
    }
    /// ln P(Y >= k)
    [[nodiscard]] double log_ge(std::int64_t k) const {
        if (k <= 0) return 0.0;
        if (k > spec_.n) return kNegInf;
        return log_ge_[static_cast<std::size_t>(k)];
    }
    /// ln P(Y <= k)
    [[nodiscard]] double log_le(std::int64_t k) const {
        if (k < 0) return kNegInf;
        if (k >= spec_.n) return 0.0;
        return log_le_[static_cast<std::size_t>(k + 1)];
    }

private:
    BinomialSpec spec_;
    std::vector<double> log_pmf_;
    std::vector<double> log_ge_;
    std::vector<double> log_le_;
};

/// Bernoulli KL divergence D(q || p) with 0 ln 0 = 0.
inline double kl_bernoulli(double q, double p) {
    if (!(q >= 0.0 && q <= 1.0)) throw DomainError("kl_bernoulli: q must lie in [0,1]");
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("kl_bernoulli: p must lie in [0,1]");
    if (p == 0.0 || p == 1.0) {
        if (q == p) return 0.0;
        throw DomainError("kl_bernoulli: p in {0,1} requires q == p");
    }
    const double a = q == 0.0 ? 0.0 : q * std::log(q / p);
    const double b = q == 1.0 ? 0.0 : (1.0 - q) * (std::log1p(-q) - std::log1p(-p));
    return std::max(0.0, a + b);
}

/// Bennett's h(u) = (1+u) ln(1+u) - u for u >= -1.
inline double bennett_h(double u) {
    if (u < -1.0) throw DomainError("bennett_h: u must be >= -1");
    if (std::abs(u) < 1e-4) {
        const double u2 = u * u;
        return u2 / 2.0 - u2 * u / 6.0 + u2 * u2 / 12.0;
    }
    if (u == -1.0) return 1.0;
    return (1.0 + u) * std::log1p(u) - u;
}

struct TailBounds {
    LogProb chernoff;
    std::optional<LogProb> anti;  ///< absent outside 1/n <= q <= (1+p)/2
    LogProb bennett;
};

/// Chernoff upper bound, anti-concentration lower bound and Bennett upper
/// bound on ln P(Y/n >= q), for p <= q <= 1.
inline TailBounds analytic_tail_bounds(const BinomialSpec& spec, double q,
                                       const ConcentrationConstants& consts = {}) {
    spec.validate();
    const double p = spec.p;
    const double n = static_cast<double>(spec.n);
    if (!(q >= p)) throw DomainError("analytic_tail_bounds: requires p <= q");
    if (!(q <= 1.0)) throw DomainError("analytic_tail_bounds: requires q <= 1");

    double d = 0.0;
    if (p == 0.0 || p == 1.0)
        d = (q == p) ? 0.0 : kInf;
    else
        d = kl_bernoulli(q, p);

    TailBounds out;
    out.chernoff = {d == kInf ? kNegInf : -n * d};
    if (p > 0.0 && q < 1.0 && q >= 1.0 / n && q <= (1.0 + p) / 2.0)
        out.anti = LogProb{std::min(0.0, std::log(consts.c0) - consts.c_anti * n * d)};

    const double var = p * (1.0 - p);
    const double t = q - p;
    if (var == 0.0)
        out.bennett = {t == 0.0 ? 0.0 : kNegInf};
    else
        out.bennett = {-n * var * bennett_h(t / var)};
    return out;
}

inline constexpr std::int64_t kMomentSupportCap = 1'000'000;

/// E|Y - np|^q by summation over the support.
inline double abs_central_moment_exact(const BinomialSpec& spec, double q) {
    spec.validate();
    if (!(q >= 1.0)) throw DomainError("abs_central_moment_exact: q must be >= 1");
    if (spec.n > kMomentSupportCap)
        throw ResourceError("abs_central_moment_exact: n exceeds support cap of 10^6");
    if (spec.p == 0.0 || spec.p == 1.0) return 0.0;
    const double np = static_cast<double>(spec.n) * spec.p;
    LogAccumulator acc;
    for (std::int64_t k = 0; k <= spec.n; ++k) {
        const double dev = std::abs(static_cast<double>(k) - np);
        if (dev == 0.0) continue;
        acc.add(log_pmf(spec, k) + q * std::log(dev));
    }
    return std::exp(acc.value());
}

enum class MomentRegime { subgaussian, loggamma, poisson };

inline const char* to_string(MomentRegime r) {
    switch (r) {
    case MomentRegime::subgaussian: return "subgaussian";
    case MomentRegime::loggamma: return "loggamma";
    case MomentRegime::poisson: return "poisson";
    }
    return "?";
}

struct PsiQ {
    double value = 0.0;
    MomentRegime regime = MomentRegime::poisson;
};

/// Three-regime closed form matching E|Y - np|^q up to factors exponential in q.
/// Ties at a threshold go to the larger-p regime.
inline PsiQ psi_q(const BinomialSpec& spec, double q) {
    spec.validate();
    if (!(q >= 1.0)) throw DomainError("psi_q: q must be >= 1");
    if (spec.p > 0.5) throw ValidationError("psi_q: p must lie in [0, 1/2]");
    const double n = static_cast<double>(spec.n);
    const double p = spec.p;
    if (p >= q / (2.0 * n)) return {std::pow(n * p * q, q / 2.0), MomentRegime::subgaussian};
    if (p >= q / (n * std::exp(q))) return {std::pow(q / std::log(q / (n * p)), q), MomentRegime::loggamma};
    return {n * p, MomentRegime::poisson};
}

} // namespace devbound
