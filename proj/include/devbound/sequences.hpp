#pragma once

// Non-increasing probability (or variance) sequences and their block views.
// Block counts are carried as logarithms so dimensions like e^{10^4} are
// ordinary values.

#include "devbound/errors.hpp"
#include "devbound/logspace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace devbound {

enum class SeqKind { mean, variance };

inline const char* to_string(SeqKind k) { return k == SeqKind::mean ? "mean" : "variance"; }

struct ExplicitFamily {
    std::vector<double> values;
};

/// q on the first J = e^{logJ} coordinates. J need not be an integer.
struct StepFamily {
    double logJ = 0.0;
    double q = 0.0;
};

struct Block {
    double log_count = 0.0;
    double q = 0.0;
};

struct BlocksFamily {
    std::vector<Block> blocks;
};

/// p(j) = min(a j^{-b}, 1/2), zero past cap_index when given.
struct PowerLawFamily {
    double a = 1.0;
    double b = 1.0;
    std::optional<std::int64_t> cap_index;
};

/// p(j) = 1/(K sqrt(n_ref)) while ln(j+1) <= K sqrt(n_ref).
struct OpenProblemFamily {
    std::int64_t n_ref = 100;
    double K = 2.0;
};

/// p(j) = alpha / (2 n_ref j) for j <= J.
struct PoissonianFamily {
    double alpha = 0.5;
    std::int64_t n_ref = 1;
    std::int64_t J = 1;
};

using Family = std::variant<ExplicitFamily, StepFamily, BlocksFamily, PowerLawFamily, OpenProblemFamily,
                            PoissonianFamily>;

inline constexpr std::int64_t kMaxPoissonianJ = 1'000'000;

struct ProbSeq {
    Family family;
    SeqKind kind = SeqKind::mean;
};

struct BlockEntry {
    double log_count = 0.0;
    double q = 0.0;
    double end_log_index = 0.0;           ///< ln(1 + cumulative count)
    std::optional<std::int64_t> count;    ///< set when the count is a representable integer
};

struct BlockView {
    std::vector<BlockEntry> blocks;

    [[nodiscard]] bool empty() const { return blocks.empty(); }
    [[nodiscard]] bool integer_counts() const {
        return std::all_of(blocks.begin(), blocks.end(), [](const BlockEntry& b) { return b.count.has_value(); });
    }
    /// Append a block; q must be below the previous block's q.
    void push(double log_count, double q);
};

namespace detail {

inline constexpr double kMaxExactLogCount = 34.5;  // ~ 9.6e14, well inside 2^53

inline std::optional<std::int64_t> integer_count(double log_count) {
    if (!(log_count <= kMaxExactLogCount)) return std::nullopt;
    const double c = std::exp(log_count);
    const double r = std::round(c);
    // exp(ln k) carries a relative error of a few ulps times ln k.
    const double tol = 16.0 * std::numeric_limits<double>::epsilon() * (1.0 + log_count) * r;
    if (r >= 1.0 && std::abs(c - r) <= tol) return static_cast<std::int64_t>(r);
    return std::nullopt;
}

inline std::string fmt_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

} // namespace detail

inline void BlockView::push(double log_count, double q) {
    if (!(log_count >= 0.0) || !std::isfinite(log_count))
        throw ValidationError("block log_count must be finite and >= 0");
    if (!(q >= 0.0 && q <= 0.5)) throw ValidationError("block q must lie in [0, 1/2]");
    if (!blocks.empty() && !(q < blocks.back().q))
        throw ValidationError("block q values must be strictly decreasing");
    double prev_cum = kNegInf;  // ln(cumulative count) before this block
    if (!blocks.empty()) prev_cum = log1m_exp(-blocks.back().end_log_index) + blocks.back().end_log_index;
    const double cum = log_add_exp(prev_cum, log_count);
    BlockEntry e;
    e.log_count = log_count;
    e.q = q;
    e.end_log_index = log1p_exp(cum);
    e.count = detail::integer_count(log_count);
    if (e.count && (blocks.empty() || blocks.back().count)) {
        std::int64_t total = *e.count;
        for (const auto& b : blocks) total += *b.count;
        e.end_log_index = std::log1p(static_cast<double>(total));
    }
    blocks.push_back(e);
}

namespace detail {

inline double open_problem_q(const OpenProblemFamily& f) {
    return 1.0 / (f.K * std::sqrt(static_cast<double>(f.n_ref)));
}

/// ln J for J = floor(e^x) - 1, the last index with ln(j+1) <= x.
inline double open_problem_log_count(const OpenProblemFamily& f) {
    const double x = f.K * std::sqrt(static_cast<double>(f.n_ref));
    if (x <= kMaxExactLogCount) return std::log(std::floor(std::exp(x)) - 1.0);
    return x + log1m_exp(-x);
}

inline double power_law_value(const PowerLawFamily& f, double j) {
    if (f.cap_index && j > static_cast<double>(*f.cap_index)) return 0.0;
    return std::min(0.5, f.a * std::pow(j, -f.b));
}

inline void validate_family(const ExplicitFamily& f) {
    for (std::size_t i = 0; i < f.values.size(); ++i) {
        const double v = f.values[i];
        if (!(v >= 0.0 && v <= 0.5))
            throw ValidationError("explicit.values[" + std::to_string(i) + "] must lie in [0, 1/2]");
        if (i > 0 && v > f.values[i - 1])
            throw ValidationError("explicit.values must be non-increasing (index " + std::to_string(i) + ")");
    }
}

inline void validate_family(const StepFamily& f) {
    if (!(f.logJ >= 0.0) || !std::isfinite(f.logJ)) throw ValidationError("step.logJ must be finite and >= 0");
    if (!(f.q >= 0.0 && f.q <= 0.5)) throw ValidationError("step.q must lie in [0, 1/2]");
}

inline void validate_family(const BlocksFamily& f) {
    BlockView probe;
    for (const auto& b : f.blocks) probe.push(b.log_count, b.q);
}

inline void validate_family(const PowerLawFamily& f) {
    if (!(f.a > 0.0) || !std::isfinite(f.a)) throw ValidationError("power_law.a must be > 0");
    if (!(f.b > 0.0) || !std::isfinite(f.b)) throw ValidationError("power_law.b must be > 0");
    if (f.cap_index && *f.cap_index < 1) throw ValidationError("power_law.cap_index must be >= 1");
}

inline void validate_family(const OpenProblemFamily& f) {
    if (f.n_ref < 1) throw ValidationError("open_problem.n_ref must be >= 1");
    const double root = std::sqrt(static_cast<double>(f.n_ref));
    if (!(f.K >= 2.0 && f.K <= root)) throw ValidationError("open_problem.K must lie in [2, sqrt(n_ref)]");
}

inline void validate_family(const PoissonianFamily& f) {
    if (!(f.alpha > 0.0 && f.alpha <= 0.5)) throw ValidationError("poissonian.alpha must lie in (0, 1/2]");
    if (f.n_ref < 1) throw ValidationError("poissonian.n_ref must be >= 1");
    if (f.J < 1 || f.J > kMaxPoissonianJ) throw ValidationError("poissonian.J must lie in [1, 10^6]");
}

} // namespace detail

/// Validate a family and wrap it.
inline ProbSeq build(Family family, SeqKind kind = SeqKind::mean) {
    std::visit([](const auto& f) { detail::validate_family(f); }, family);
    return ProbSeq{std::move(family), kind};
}

inline bool is_power_law(const ProbSeq& seq) { return std::holds_alternative<PowerLawFamily>(seq.family); }

/// p(j) for j >= 1, zero past the support.
inline double value_at(const ProbSeq& seq, std::int64_t j) {
    if (j < 1) throw ValidationError("value_at: j must be >= 1");
    const double jd = static_cast<double>(j);
    struct V {
        std::int64_t j;
        double jd;
        double operator()(const ExplicitFamily& f) const {
            return j <= static_cast<std::int64_t>(f.values.size()) ? f.values[static_cast<std::size_t>(j - 1)] : 0.0;
        }
        double operator()(const StepFamily& f) const {
            const double J = std::floor(std::exp(f.logJ) * (1.0 + 1e-12));
            return jd <= J ? f.q : 0.0;
        }
        double operator()(const BlocksFamily& f) const {
            double cum = 0.0;
            for (const auto& b : f.blocks) {
                cum += std::exp(b.log_count);
                if (jd <= std::floor(cum * (1.0 + 1e-12))) return b.q;
            }
            return 0.0;
        }
        double operator()(const PowerLawFamily& f) const { return detail::power_law_value(f, jd); }
        double operator()(const OpenProblemFamily& f) const {
            const double x = f.K * std::sqrt(static_cast<double>(f.n_ref));
            return std::log1p(jd) <= x ? detail::open_problem_q(f) : 0.0;
        }
        double operator()(const PoissonianFamily& f) const {
            return j <= f.J ? f.alpha / (2.0 * static_cast<double>(f.n_ref) * jd) : 0.0;
        }
    };
    return std::visit(V{j, jd}, seq.family);
}

/// Short human-readable identifier used in reports.
inline std::string label(const ProbSeq& seq) {
    using detail::fmt_real;
    struct L {
        std::string operator()(const ExplicitFamily& f) const {
            return "explicit(len=" + std::to_string(f.values.size()) + ")";
        }
        std::string operator()(const StepFamily& f) const {
            return "step(logJ=" + fmt_real(f.logJ) + ";q=" + fmt_real(f.q) + ")";
        }
        std::string operator()(const BlocksFamily& f) const {
            return "blocks(n=" + std::to_string(f.blocks.size()) + ")";
        }
        std::string operator()(const PowerLawFamily& f) const {
            std::string s = "power_law(a=" + fmt_real(f.a) + ";b=" + fmt_real(f.b);
            if (f.cap_index) s += ";cap=" + std::to_string(*f.cap_index);
            return s + ")";
        }
        std::string operator()(const OpenProblemFamily& f) const {
            return "open_problem(n_ref=" + std::to_string(f.n_ref) + ";K=" + fmt_real(f.K) + ")";
        }
        std::string operator()(const PoissonianFamily& f) const {
            return "poissonian(alpha=" + fmt_real(f.alpha) + ";n_ref=" + std::to_string(f.n_ref) +
                   ";J=" + std::to_string(f.J) + ")";
        }
    };
    return std::visit(L{}, seq.family);
}

/// Exact block view for every family except power_law.
inline BlockView exact_view(const ProbSeq& seq) {
    struct E {
        BlockView operator()(const ExplicitFamily& f) const {
            BlockView v;
            std::size_t i = 0;
            while (i < f.values.size()) {
                std::size_t k = i;
                while (k < f.values.size() && f.values[k] == f.values[i]) ++k;
                if (f.values[i] > 0.0) v.push(std::log(static_cast<double>(k - i)), f.values[i]);
                i = k;
            }
            return v;
        }
        BlockView operator()(const StepFamily& f) const {
            BlockView v;
            if (f.q > 0.0) v.push(f.logJ, f.q);
            return v;
        }
        BlockView operator()(const BlocksFamily& f) const {
            BlockView v;
            for (const auto& b : f.blocks)
                if (b.q > 0.0) v.push(b.log_count, b.q);
            return v;
        }
        BlockView operator()(const PowerLawFamily&) const {
            throw ValidationError("power_law has no exact block view; use blocks() envelopes");
        }
        BlockView operator()(const OpenProblemFamily& f) const {
            BlockView v;
            const double lc = detail::open_problem_log_count(f);
            if (lc >= 0.0) v.push(lc, detail::open_problem_q(f));
            return v;
        }
        BlockView operator()(const PoissonianFamily& f) const {
            BlockView v;
            for (std::int64_t j = 1; j <= f.J; ++j)
                v.push(0.0, f.alpha / (2.0 * static_cast<double>(f.n_ref) * static_cast<double>(j)));
            return v;
        }
    };
    return std::visit(E{}, seq.family);
}

/// Stopping rule for infinite families: keep adding geometric blocks until
/// n * sum_{j > J_cut} p(j) <= tail_mass_tol, or max_doublings is reached.
struct TruncationPolicy {
    std::int64_t n = 1;
    double tail_mass_tol = -1.0;  ///< negative selects the default 1e-3 / n
    int max_doublings = 62;

    [[nodiscard]] double tolerance() const {
        return tail_mass_tol >= 0.0 ? tail_mass_tol : 1e-3 / static_cast<double>(n);
    }
};

struct BlockEnvelope {
    BlockView upper;                  ///< pointwise >= the sequence on the covered indices
    BlockView lower;                  ///< pointwise <= the sequence
    bool exact = false;               ///< upper == lower == the sequence
    double last_log_index = 0.0;      ///< ln J_cut, the last covered index
    double tail_success_bound = 0.0;  ///< n * sum_{j > J_cut} p(j); +inf when divergent
};

struct HeadMass {
    double head_sum = 0.0;
    double tail_success_bound = 0.0;
    bool diverges = false;
};

namespace detail {

/// sum_{j > J} a j^{-b} bounded by the integral from J, truncated at cap.
inline double power_law_tail_bound(const PowerLawFamily& f, double J) {
    if (f.cap_index && J >= static_cast<double>(*f.cap_index)) return 0.0;
    // Below the 1/2 cap, p(j) <= 1/2 <= a j^{-b} still holds, so the integral bound applies.
    if (f.cap_index) {
        const double cap = static_cast<double>(*f.cap_index);
        if (f.b == 1.0) return f.a * (std::log(cap) - std::log(J));
        return f.a * (std::pow(J, 1.0 - f.b) - std::pow(cap, 1.0 - f.b)) / (f.b - 1.0);
    }
    if (f.b <= 1.0) return kInf;
    return f.a * std::pow(J, 1.0 - f.b) / (f.b - 1.0);
}

/// Sum of c * j^{-s} for j = N..infinity by Euler-Maclaurin, N around 1000.
inline double zeta_tail(double c, double s, double N) {
    const double f = c * std::pow(N, -s);
    const double integral = c * std::pow(N, 1.0 - s) / (s - 1.0);
    const double d1 = -s * f / N;
    const double d3 = -s * (s + 1.0) * (s + 2.0) * f / (N * N * N);
    return integral + f / 2.0 - d1 / 12.0 + d3 / 720.0;
}

/// Exact sum of p(j)^r over j in [from, to] (to may be +inf) for a power law.
inline double power_law_power_sum(const PowerLawFamily& f, double r, double from, double to) {
    constexpr double kDirect = 2000.0;
    CompensatedSum s;
    double j = from;
    for (; j <= to && j < kDirect; j += 1.0) s.add(std::pow(power_law_value(f, j), r));
    if (j > to) return s.value();
    const double c = std::pow(f.a, r);
    const double sexp = f.b * r;
    // a j^{-b} < 1/2 for all j >= kDirect here or the terms are tiny anyway; check it.
    if (f.a * std::pow(j, -f.b) >= 0.5) {
        // Cap still active: sum the capped stretch explicitly.
        const double j0 = std::ceil(std::pow(2.0 * f.a, 1.0 / f.b));
        const double stop = std::min(to, j0 - 1.0);
        if (stop >= j) s.add((stop - j + 1.0) * std::pow(0.5, r));
        j = std::max(j, j0);
        if (j > to) return s.value();
    }
    if (std::isinf(to)) {
        if (sexp <= 1.0) return kInf;
        s.add(zeta_tail(c, sexp, j));
    } else if (to - j < 1e7) {
        for (; j <= to; j += 1.0) s.add(c * std::pow(j, -sexp));
    } else {
        if (sexp == 1.0)
            return kInf;  // not reached for finite caps below 2^63 in practice
        s.add(zeta_tail(c, sexp, j) - zeta_tail(c, sexp, to + 1.0));
    }
    return s.value();
}

} // namespace detail

/// Block envelopes. Exact for every family but power_law, which is covered by
/// geometric blocks [2^i, 2^{i+1}) valued at the block start (upper) and end
/// (lower), merged where the values coincide.
inline BlockEnvelope blocks(const ProbSeq& seq, const TruncationPolicy& policy) {
    if (policy.n < 1) throw ValidationError("truncation.n must be >= 1");
    BlockEnvelope env;
    if (!is_power_law(seq)) {
        env.upper = exact_view(seq);
        env.lower = env.upper;
        env.exact = true;
        env.last_log_index = env.upper.empty() ? 0.0 : log1m_exp(-env.upper.blocks.back().end_log_index) +
                                                             env.upper.blocks.back().end_log_index;
        return env;
    }
    const auto& f = std::get<PowerLawFamily>(seq.family);
    const double n = static_cast<double>(policy.n);
    const double tol = policy.tolerance();
    std::vector<Block> up;
    std::vector<Block> lo;
    auto append = [](std::vector<Block>& v, double log_count, double q) {
        if (q <= 0.0) return;
        if (!v.empty() && v.back().q == q)
            v.back().log_count = log_add_exp(v.back().log_count, log_count);
        else
            v.push_back({log_count, q});
    };
    double last = 0.0;
    for (int i = 0; i <= policy.max_doublings; ++i) {
        const double start = std::ldexp(1.0, i);
        if (f.cap_index && start > static_cast<double>(*f.cap_index)) break;
        double end = std::ldexp(1.0, i + 1) - 1.0;
        if (f.cap_index) end = std::min(end, static_cast<double>(*f.cap_index));
        const double log_count = std::log(end - start + 1.0);
        append(up, log_count, detail::power_law_value(f, start));
        append(lo, log_count, detail::power_law_value(f, end));
        last = end;
        if (n * detail::power_law_tail_bound(f, last) <= tol) break;
    }
    for (const auto& b : up) env.upper.push(b.log_count, b.q);
    for (const auto& b : lo) env.lower.push(b.log_count, b.q);
    env.last_log_index = std::log(last);
    env.tail_success_bound = n * detail::power_law_tail_bound(f, last);
    return env;
}

/// Head sum up to J_cut and n times the tail mass beyond it.
inline HeadMass head_mass(const ProbSeq& seq, double J_cut, std::int64_t n) {
    if (!(J_cut >= 0.0)) throw ValidationError("head_mass: J_cut must be >= 0");
    if (n < 1) throw ValidationError("head_mass: n must be >= 1");
    const double nd = static_cast<double>(n);
    HeadMass out;
    if (is_power_law(seq)) {
        const auto& f = std::get<PowerLawFamily>(seq.family);
        const double cut = std::floor(J_cut);
        out.head_sum = cut >= 1.0 ? detail::power_law_power_sum(f, 1.0, 1.0, cut) : 0.0;
        const double tail = detail::power_law_tail_bound(f, std::max(cut, 1.0));
        out.diverges = !std::isfinite(tail);
        out.tail_success_bound = out.diverges ? kInf : nd * (cut >= 1.0 ? tail : tail + 0.5);
        return out;
    }
    CompensatedSum head;
    CompensatedSum tail;
    double cum = 0.0;
    for (const auto& b : exact_view(seq).blocks) {
        const double count = b.count ? static_cast<double>(*b.count) : std::exp(b.log_count);
        const double in_head = std::clamp(J_cut - cum, 0.0, count);
        head.add(in_head * b.q);
        tail.add((count - in_head) * b.q);
        cum += count;
    }
    out.head_sum = head.value();
    out.tail_success_bound = nd * tail.value();
    return out;
}

struct Seminorm {
    double value = 0.0;
    bool diverges = false;
};

/// sum_j p(j)^r.
inline Seminorm seminorm(const ProbSeq& seq, double r) {
    if (!(r > 0.0)) throw ValidationError("seminorm: r must be > 0");
    if (is_power_law(seq)) {
        const auto& f = std::get<PowerLawFamily>(seq.family);
        const double to = f.cap_index ? static_cast<double>(*f.cap_index) : kInf;
        const double v = detail::power_law_power_sum(f, r, 1.0, to);
        return {v, !std::isfinite(v)};
    }
    CompensatedSum s;
    for (const auto& b : exact_view(seq).blocks) {
        const double count = b.count ? static_cast<double>(*b.count) : std::exp(b.log_count);
        s.add(count * std::pow(b.q, r));
    }
    const double v = s.value();
    return {v, !std::isfinite(v)};
}

} // namespace devbound
