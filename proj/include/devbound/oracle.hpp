#pragma once

// Exact sup-deviation statistics for product block sequences. The CDF of the
// sup is piecewise constant in t with jumps at |k/n - q_b|, so its expectation
// and quantiles follow from one ordered sweep over those breakpoints.

#include "devbound/binomial.hpp"
#include "devbound/errors.hpp"
#include "devbound/logspace.hpp"
#include "devbound/sequences.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <queue>
#include <string>
#include <vector>

namespace devbound {

enum class Side { two_sided, upper, lower };

inline const char* to_string(Side s) {
    switch (s) {
    case Side::two_sided: return "two_sided";
    case Side::upper: return "upper";
    case Side::lower: return "lower";
    }
    return "?";
}

inline Side parse_side(const std::string& s) {
    if (s == "two_sided" || s == "two-sided" || s == "both") return Side::two_sided;
    if (s == "upper" || s == "plus") return Side::upper;
    if (s == "lower" || s == "minus") return Side::lower;
    throw ValidationError("side must be one of two_sided, upper, lower (got '" + s + "')");
}

struct ExactResult {
    double value = 0.0;
    std::int64_t breakpoints_used = 0;
    Side side = Side::two_sided;
    double log_domain_min = 0.0;
};

inline constexpr std::int64_t kOracleMaxN = 100'000;
inline constexpr std::int64_t kOracleMaxBreakpoints = 10'000'000;

namespace detail {

/// Sum tree over per-block hazards s_b = J_b * (-ln F_b); parents are
/// recomputed from children so no rounding drift builds up.
class HazardTree {
public:
    explicit HazardTree(std::size_t leaves) {
        size_ = 1;
        while (size_ < leaves) size_ <<= 1;
        node_.assign(2 * size_, 0.0);
    }
    void set(std::size_t i, double v) {
        std::size_t k = i + size_;
        node_[k] = v;
        for (k >>= 1; k >= 1; k >>= 1) node_[k] = node_[2 * k] + node_[2 * k + 1];
    }
    [[nodiscard]] double total() const { return node_[1]; }

private:
    std::size_t size_ = 1;
    std::vector<double> node_;
};

class SupSweep {
public:
    SupSweep(const BlockView& view, std::int64_t n, Side side) : n_(n), side_(side), tree_(view.blocks.size()) {
        if (n < 1) throw ValidationError("oracle: n must be >= 1");
        if (n > kOracleMaxN) throw ResourceError("oracle: n exceeds the cap of 10^5");
        const auto nb = static_cast<std::int64_t>(view.blocks.size());
        if (nb > 0 && (n + 1) > kOracleMaxBreakpoints / nb)
            throw ResourceError("oracle: (n+1) * blocks exceeds the breakpoint cap of 10^7");
        const double nd = static_cast<double>(n);
        states_.reserve(view.blocks.size());
        for (const auto& b : view.blocks) {
            State s{TailTable(BinomialSpec(n, b.q)), b.q, b.log_count, 0, 0};
            // hi: largest k with k/n <= q; lo: smallest k with k/n >= q.
            auto hi = static_cast<std::int64_t>(std::floor(nd * b.q));
            while (hi + 1 <= n && static_cast<double>(hi + 1) / nd <= b.q) ++hi;
            while (hi >= 0 && static_cast<double>(hi) / nd > b.q) --hi;
            auto lo = hi;
            if (lo < 0 || static_cast<double>(lo) / nd < b.q) ++lo;
            s.hi = side_ == Side::lower ? n : hi;
            s.lo = side_ == Side::upper ? 0 : lo;
            states_.push_back(std::move(s));
        }
        for (std::size_t i = 0; i < states_.size(); ++i) {
            refresh(i);
            push_next(i);
        }
    }

    [[nodiscard]] double hazard() const { return tree_.total(); }
    [[nodiscard]] double log_domain_min() const { return log_min_; }
    [[nodiscard]] bool done() const { return heap_.empty(); }
    [[nodiscard]] double next_t() const { return heap_.top().t; }

    /// Apply every event at the next breakpoint; returns that breakpoint.
    double advance() {
        const double t = heap_.top().t;
        while (!heap_.empty() && heap_.top().t == t) {
            const Event e = heap_.top();
            heap_.pop();
            auto& s = states_[e.block];
            if (e.upward)
                s.hi = e.k;
            else
                s.lo = e.k;
            refresh(e.block);
            push_event(e.block, e.upward);
        }
        return t;
    }

private:
    struct State {
        TailTable table;
        double q;
        double log_count;
        std::int64_t lo;
        std::int64_t hi;
    };
    struct Event {
        double t;
        std::size_t block;
        bool upward;
        std::int64_t k;
        bool operator>(const Event& o) const { return t > o.t; }
    };

    void push_event(std::size_t i, bool upward) {
        const auto& s = states_[i];
        const double nd = static_cast<double>(n_);
        if (upward && s.hi < n_) {
            const std::int64_t k = s.hi + 1;
            heap_.push({static_cast<double>(k) / nd - s.q, i, true, k});
        } else if (!upward && s.lo > 0) {
            const std::int64_t k = s.lo - 1;
            heap_.push({s.q - static_cast<double>(k) / nd, i, false, k});
        }
    }

    void push_next(std::size_t i) {
        if (side_ != Side::lower) push_event(i, true);
        if (side_ != Side::upper) push_event(i, false);
    }

    /// Recompute s_b = J_b * (-ln P(lo <= Y <= hi)).
    void refresh(std::size_t i) {
        const auto& s = states_[i];
        const double log_c = log_add_exp(s.table.log_ge(s.hi + 1), s.table.log_le(s.lo - 1));
        double log_hazard = kNegInf;
        if (log_c == kNegInf) {
            log_hazard = kNegInf;
        } else if (log_c < -kLn2) {
            log_hazard = log_neg_log1m_exp(log_c);
            log_min_ = std::min(log_min_, log_c);
        } else {
            double log_f = kNegInf;
            if (s.lo <= s.hi) {
                if (s.lo <= 0) {
                    log_f = s.table.log_le(s.hi);
                } else if (s.hi >= n_) {
                    log_f = s.table.log_ge(s.lo);
                } else {
                    const double a = s.table.log_le(s.hi);
                    const double b = s.table.log_le(s.lo - 1);
                    const double a2 = s.table.log_ge(s.lo);
                    const double b2 = s.table.log_ge(s.hi + 1);
                    // Difference of whichever pair of tails is smaller.
                    log_f = a <= a2 ? a + log1m_exp(std::min(0.0, b - a)) : a2 + log1m_exp(std::min(0.0, b2 - a2));
                }
            }
            log_min_ = std::min(log_min_, log_f);
            log_hazard = log_f == kNegInf ? kInf : std::log(-log_f);
            if (log_f == 0.0) log_hazard = kNegInf;
        }
        const double v = log_hazard == kInf ? kInf : std::exp(s.log_count + log_hazard);
        tree_.set(i, v);
    }

    std::int64_t n_;
    Side side_;
    HazardTree tree_;
    std::vector<State> states_;
    std::priority_queue<Event, std::vector<Event>, std::greater<>> heap_;
    double log_min_ = 0.0;
};

} // namespace detail

/// E sup_j dev_j for the product distribution described by `view`.
inline ExactResult exact_sup_expectation(const BlockView& view, std::int64_t n, Side side = Side::two_sided) {
    ExactResult out;
    out.side = side;
    if (view.empty()) {
        if (n < 1) throw ValidationError("oracle: n must be >= 1");
        return out;
    }
    detail::SupSweep sweep(view, n, side);
    CompensatedSum integral;
    double t_prev = 0.0;
    std::int64_t used = 0;
    while (!sweep.done()) {
        const double surv = -std::expm1(-sweep.hazard());
        const double t = sweep.advance();
        integral.add((t - t_prev) * surv);
        t_prev = t;
        ++used;
    }
    out.value = std::clamp(integral.value(), 0.0, 1.0);
    out.breakpoints_used = used;
    out.log_domain_min = sweep.log_domain_min();
    return out;
}

/// Smallest breakpoint t with P(sup <= t) >= level.
inline double sup_quantile(const BlockView& view, std::int64_t n, double level, Side side = Side::two_sided) {
    if (!(level > 0.0 && level < 1.0)) throw ValidationError("sup_quantile: level must lie in (0,1)");
    if (view.empty()) return 0.0;
    detail::SupSweep sweep(view, n, side);
    // Ties at the level (e.g. P(sup <= 0) = 1/2 exactly) are resolved with a relative slack on the hazard.
    const double max_hazard = -std::log(level) * (1.0 + 1e-12);
    double t = 0.0;
    while (true) {
        if (sweep.hazard() <= max_hazard) return t;
        if (sweep.done()) return t;
        t = sweep.advance();
    }
}

/// P(sup <= t).
inline double sup_cdf(const BlockView& view, std::int64_t n, double t, Side side = Side::two_sided) {
    if (t < 0.0) return 0.0;
    if (view.empty()) return 1.0;
    detail::SupSweep sweep(view, n, side);
    while (!sweep.done() && sweep.next_t() <= t) sweep.advance();
    return std::exp(-sweep.hazard());
}

/// E ||p_hat - p||_q^q = sum_b J_b E|Y_b/n - q_b|^q.
inline double exact_lq_moment(const BlockView& view, std::int64_t n, double qnorm) {
    if (n < 1) throw ValidationError("exact_lq_moment: n must be >= 1");
    if (!(qnorm >= 1.0)) throw ValidationError("exact_lq_moment: qnorm must be >= 1");
    CompensatedSum s;
    const double scale = std::pow(static_cast<double>(n), -qnorm);
    for (const auto& b : view.blocks) {
        if (!b.count)
            throw RepresentabilityError("exact_lq_moment: block count e^" + detail::fmt_real(b.log_count) +
                                        " is not a representable integer");
        s.add(static_cast<double>(*b.count) * abs_central_moment_exact(BinomialSpec(n, b.q), qnorm) * scale);
    }
    return s.value();
}

struct PoissonExact {
    double p_any_success = 0.0;
    double U = 0.0;  ///< sup_j n j p(j)
    double V = 0.0;  ///< sum_j n p(j)
};

inline PoissonExact poisson_exact(const BlockView& view, std::int64_t n) {
    if (n < 1) throw ValidationError("poisson_exact: n must be >= 1");
    const double ln_n = std::log(static_cast<double>(n));
    PoissonExact out;
    CompensatedSum hazard;
    CompensatedSum v;
    for (const auto& b : view.blocks) {
        if (b.q == 0.0) continue;
        hazard.add(std::exp(b.log_count + ln_n + std::log(-std::log1p(-b.q))));
        v.add(std::exp(b.log_count + ln_n + std::log(b.q)));
        const double ln_j = b.end_log_index + log1m_exp(-b.end_log_index);
        out.U = std::max(out.U, std::exp(ln_n + ln_j + std::log(b.q)));
    }
    out.p_any_success = -std::expm1(-hazard.value());
    out.V = v.value();
    return out;
}

} // namespace devbound
