#pragma once

// Closed-form rate functionals for the expected sup-deviation of empirical
// means, plus the correlated, variance, l_q and high-probability variants.

#include "devbound/binomial.hpp"
#include "devbound/constants.hpp"
#include "devbound/errors.hpp"
#include "devbound/logspace.hpp"
#include "devbound/sequences.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

namespace devbound {

inline constexpr double kE = 2.718281828459045235360287471352662498;

enum class Regime { constant, subgamma, subgaussian, poissonian, extended, zero };

inline const char* to_string(Regime r) {
    switch (r) {
    case Regime::constant: return "constant";
    case Regime::subgamma: return "subgamma";
    case Regime::subgaussian: return "subgaussian";
    case Regime::poissonian: return "poissonian";
    case Regime::extended: return "extended";
    case Regime::zero: return "zero";
    }
    return "?";
}

struct FunctionalST {
    double S = 0.0;
    double T = 0.0;  ///< may be +inf
};

namespace detail {

/// ln j for the last index of a block, from ln(1 + j).
inline double log_last_index(double end_log_index) { return end_log_index + log1m_exp(-end_log_index); }

/// sup over x in [lo, hi] (log-scale bounds) of a x^{-b} ln(x+1).
inline double power_law_S_sup(double a, double b, double log_lo, double log_hi) {
    auto g = [&](double y) { return a * std::exp(-b * y) * log1p_exp(y); };
    // g is unimodal in y with its peak near y = 1/b.
    double lo = log_lo;
    double hi = std::min(log_hi, std::max(log_lo, 1.0 / b + 50.0));
    if (hi <= lo) return g(lo);
    constexpr double kPhi = 0.6180339887498949;
    double x1 = hi - kPhi * (hi - lo);
    double x2 = lo + kPhi * (hi - lo);
    double f1 = g(x1);
    double f2 = g(x2);
    for (int it = 0; it < 200 && hi - lo > 1e-12 * (1.0 + std::abs(hi)); ++it) {
        if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + kPhi * (hi - lo);
            f2 = g(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - kPhi * (hi - lo);
            f1 = g(x1);
        }
    }
    return std::max({g(log_lo), g(std::min(log_hi, std::max(log_lo, 1.0 / b + 50.0))), f1, f2});
}

inline constexpr std::int64_t kPowerLawScan = 1'000'000;

inline FunctionalST power_law_S_T(const PowerLawFamily& f) {
    FunctionalST out;
    const std::int64_t scan_end = f.cap_index ? std::min(*f.cap_index, kPowerLawScan) : kPowerLawScan;
    for (std::int64_t j = 1; j <= scan_end; ++j) {
        const double jd = static_cast<double>(j);
        const double p = power_law_value(f, jd);
        const double L = std::log1p(jd);
        out.S = std::max(out.S, p * L);
        out.T = std::max(out.T, L / -std::log(p));
    }
    if (f.cap_index && *f.cap_index <= kPowerLawScan) return out;
    const double y0 = std::log(static_cast<double>(kPowerLawScan));
    const double y1 = f.cap_index ? std::log(static_cast<double>(*f.cap_index)) : kInf;
    out.S = std::max(out.S, power_law_S_sup(f.a, f.b, y0, y1));
    // ln(j+1) / (b ln j - ln a) is monotone past the scan; its limit is 1/b.
    if (f.cap_index) {
        const double p = power_law_value(f, static_cast<double>(*f.cap_index));
        out.T = std::max(out.T, log1p_exp(y1) / -std::log(p));
    } else {
        out.T = std::max(out.T, 1.0 / f.b);
    }
    return out;
}

inline FunctionalST view_S_T(const BlockView& v) {
    FunctionalST out;
    for (const auto& b : v.blocks) {
        out.S = std::max(out.S, b.q * b.end_log_index);
        out.T = std::max(out.T, b.end_log_index / -std::log(b.q));
    }
    return out;
}

} // namespace detail

/// S = sup p(j) ln(j+1) and T = sup ln(j+1) / ln(1/p(j)).
inline FunctionalST functional_S_T(const ProbSeq& seq) {
    if (is_power_law(seq)) return detail::power_law_S_T(std::get<PowerLawFamily>(seq.family));
    return detail::view_S_T(exact_view(seq));
}

struct PhiValue {
    double value = 0.0;
    Regime regime = Regime::zero;
};

/// Three-regime step functional phi_{J,q}(n) with J = e^{logJ}; real J in
/// (0,1) uses e^{-1/J} sqrt(q/n). At a regime boundary the larger-n regime wins.
inline PhiValue phi(double logJ, double q, std::int64_t n) {
    if (n < 1) throw ValidationError("phi: n must be >= 1");
    if (!(q >= 0.0 && q <= 0.5)) throw ValidationError("phi: q must lie in [0, 1/2]");
    if (std::isnan(logJ) || logJ == kNegInf) throw ValidationError("phi: logJ must be > -inf");
    if (q == 0.0) return {0.0, Regime::zero};
    const double nd = static_cast<double>(n);
    if (logJ < 0.0) {
        const double J = std::exp(logJ);
        return {std::exp(-1.0 / J) * std::sqrt(q / nd), Regime::extended};
    }
    const double L = log1p_exp(logJ);
    const double lq = -std::log(q);
    if (nd < L / lq) return {1.0, Regime::constant};
    if (nd >= L / (kE * q)) return {std::sqrt(q * L / nd), Regime::subgaussian};
    return {L / (nd * std::log(L / (nd * q))), Regime::subgamma};
}

struct EpsilonResult {
    double epsilon = 0.0;
    double threshold_grid_point = 0.0;
    bool degenerate = false;
};

/// Smallest grid deviation whose binomial upper tail falls below c0/(2J).
inline EpsilonResult epsilon_exact(double logJ, double q, std::int64_t n, const ConcentrationConstants& consts = {}) {
    consts.validate();
    if (n < 1) throw ValidationError("epsilon_exact: n must be >= 1");
    if (!(q > 0.0 && q <= 0.5)) throw ValidationError("epsilon_exact: q must lie in (0, 1/2]");
    if (!(logJ >= 0.0) || !std::isfinite(logJ)) throw ValidationError("epsilon_exact: logJ must be finite and >= 0");
    const double nd = static_cast<double>(n);
    const double log_target = std::log(consts.c0) - kLn2 - logJ;
    const double log_any = log1m_exp(nd * std::log1p(-q));
    if (log_any <= log_target) return {-q, 0.0, true};
    const BinomialSpec spec(n, q);
    const std::int64_t kstar = binom_quantile(spec, {log_target});
    auto kq = static_cast<std::int64_t>(std::ceil(nd * q));
    while (kq > 0 && static_cast<double>(kq - 1) / nd >= q) --kq;
    while (static_cast<double>(kq) / nd < q) ++kq;
    const std::int64_t k = std::max(kstar - 1, kq);
    const double t = static_cast<double>(k) / nd;
    return {t - q, t, false};
}

struct RateComponent {
    double end_log_index = 0.0;  ///< ln(1 + j) at the block end
    double q = 0.0;
    double sqrt_term = 0.0;
    double log_term = 0.0;
};

struct RateBracket {
    double lower = 0.0;
    double upper = 0.0;
};

struct BoundReport {
    double rate = 0.0;
    Regime regime = Regime::zero;
    double argmax_log_index = 0.0;  ///< ln j of the dominating index
    double S = 0.0;
    double T = 0.0;
    std::vector<RateComponent> components;
    std::optional<RateBracket> bracket;  ///< power-law envelopes
    bool diverges = false;               ///< Poissonian branch with an infinite sum
};

namespace detail {

inline RateComponent rate_component(double L, double q, double n) {
    RateComponent c;
    c.end_log_index = L;
    c.q = q;
    c.sqrt_term = std::sqrt(q * L / n);
    c.log_term = L / (n * std::log(2.0 + L / (n * q)));
    return c;
}

/// The capped sup expression over block ends.
inline void fill_sup_expression(BoundReport& rep, const BlockView& v, double n) {
    double best = 0.0;
    const RateComponent* arg = nullptr;
    for (const auto& b : v.blocks) {
        rep.components.push_back(rate_component(b.end_log_index, b.q, n));
    }
    for (const auto& c : rep.components) {
        const double m = std::max(c.sqrt_term, c.log_term);
        if (arg == nullptr || m > best) {
            best = m;
            arg = &c;
        }
    }
    if (arg == nullptr) {
        rep.rate = 0.0;
        rep.regime = Regime::zero;
        return;
    }
    rep.argmax_log_index = log_last_index(arg->end_log_index);
    if (best >= 1.0) {
        rep.rate = 1.0;
        rep.regime = Regime::constant;
    } else {
        rep.rate = best;
        rep.regime = arg->sqrt_term >= arg->log_term ? Regime::subgaussian : Regime::subgamma;
    }
}

inline double sup_expression(const BlockView& v, double n) {
    double best = 0.0;
    for (const auto& b : v.blocks) {
        const auto c = rate_component(b.end_log_index, b.q, n);
        best = std::max({best, c.sqrt_term, c.log_term});
    }
    return std::min(1.0, best);
}

/// p(j) <= thr_scale / (2 n j) for every j of the view, checked at block ends.
inline bool all_below_poisson_line(const BlockView& v, double n, double scale) {
    for (const auto& b : v.blocks) {
        if (std::log(b.q) > std::log(scale) - std::log(2.0 * n) - log_last_index(b.end_log_index)) return false;
    }
    return true;
}

inline bool power_law_poissonian(const PowerLawFamily& f, double n) {
    // j p(j) = min(a j^{1-b}, j/2): largest at j = 1 when b >= 1, at the cap otherwise.
    double worst = 0.0;
    if (f.b >= 1.0) {
        worst = power_law_value(f, 1.0);
        // The 1/2 cap can make j p(j) grow until a j^{-b} drops below 1/2.
        const double j0 = std::ceil(std::pow(2.0 * f.a, 1.0 / f.b));
        if (j0 > 1.0) worst = std::max(worst, (j0 - 1.0) * 0.5);
        if (j0 >= 1.0) worst = std::max(worst, j0 * power_law_value(f, j0));
    } else {
        if (!f.cap_index) return false;
        const double cap = static_cast<double>(*f.cap_index);
        worst = cap * power_law_value(f, cap);
    }
    return worst <= 1.0 / (2.0 * n);
}

/// Bracket for the sup expression over the power-law indices past the last
/// envelope block.
inline RateBracket power_law_tail_bracket(const PowerLawFamily& f, double last_log_index, double n) {
    RateBracket br;
    const double y0 = last_log_index;
    if (f.cap_index && std::log(static_cast<double>(*f.cap_index)) <= y0 + 1e-12) return br;
    const double y1 = f.cap_index ? std::log(static_cast<double>(*f.cap_index)) : kInf;
    const double s_tail = power_law_S_sup(f.a, f.b, y0, y1);
    const double sqrt_part = std::sqrt(s_tail / n);
    const double delta = std::exp(-y0);
    const double denom0 = f.b * y0 + std::log(y0) - std::log(n * f.a);
    double log_part = 1.0;
    if (y0 > 0.0 && denom0 > 0.0) {
        const double u0 = (y0 + delta) / (n * denom0);
        log_part = std::isinf(y1) ? std::max(u0, 1.0 / (n * f.b))
                                  : std::max(u0, (y1 + delta) / (n * (f.b * y1 + std::log(y1) - std::log(n * f.a))));
    }
    br.upper = std::min(1.0, std::max(sqrt_part, log_part));
    br.lower = std::isinf(y1) ? std::min(1.0, 1.0 / (n * f.b)) : 0.0;
    return br;
}

} // namespace detail

/// Order of E sup_j |p_hat(j) - p(j)| up to universal constants.
inline BoundReport delta_rate(const ProbSeq& seq, std::int64_t n) {
    if (n < 1) throw ValidationError("delta_rate: n must be >= 1");
    const double nd = static_cast<double>(n);
    BoundReport rep;
    const auto st = functional_S_T(seq);
    rep.S = st.S;
    rep.T = st.T;

    if (is_power_law(seq)) {
        const auto& f = std::get<PowerLawFamily>(seq.family);
        if (detail::power_law_poissonian(f, nd)) {
            const auto sum = seminorm(seq, 1.0);
            rep.regime = Regime::poissonian;
            rep.diverges = sum.diverges;
            rep.rate = std::min(1.0 / nd, sum.value);
            rep.argmax_log_index = 0.0;
            return rep;
        }
        const auto env = blocks(seq, TruncationPolicy{n, -1.0, 62});
        detail::fill_sup_expression(rep, env.upper, nd);
        const auto tail = detail::power_law_tail_bracket(f, env.last_log_index, nd);
        RateBracket br;
        br.lower = std::max(detail::sup_expression(env.lower, nd), tail.lower);
        br.upper = std::max(rep.rate, tail.upper);
        if (br.upper > rep.rate) {
            rep.rate = br.upper;
            if (rep.rate >= 1.0) rep.regime = Regime::constant;
        }
        rep.bracket = br;
        return rep;
    }

    const BlockView v = exact_view(seq);
    if (detail::all_below_poisson_line(v, nd, 1.0)) {
        const auto sum = seminorm(seq, 1.0);
        rep.regime = Regime::poissonian;
        rep.diverges = sum.diverges;
        rep.rate = std::min(1.0 / nd, sum.value);
        if (!v.empty()) rep.argmax_log_index = detail::log_last_index(v.blocks.back().end_log_index);
        return rep;
    }
    detail::fill_sup_expression(rep, v, nd);
    return rep;
}

/// c (sqrt(S/n) + T ln(n) / n), the classical bound with the extra log factor.
inline double cohen_bound(double S, double T, std::int64_t n, double c = 1.0) {
    if (n < 21) throw ValidationError("cohen_bound: n must be >= 21");
    if (!(c > 0.0)) throw ValidationError("cohen_bound: c must be > 0");
    if (!std::isfinite(T)) throw DomainError("cohen_bound: T is infinite");
    const double nd = static_cast<double>(n);
    return c * (std::sqrt(S / nd) + T * std::log(nd) / nd);
}

inline double cohen_bound(const ProbSeq& seq, std::int64_t n, double c = 1.0) {
    const auto st = functional_S_T(seq);
    return cohen_bound(st.S, st.T, n, c);
}

struct CorrelatedBand {
    double lower = 0.0;
    double upper = 0.0;
};

/// Band for the worst correlated distribution with the given marginals.
inline CorrelatedBand correlated_band(const ProbSeq& seq, std::int64_t n) {
    if (seq.kind != SeqKind::mean) throw ValidationError("correlated_band: sequence kind must be mean");
    const auto rep = delta_rate(seq, n);
    const double p1 = value_at(seq, 1);
    CorrelatedBand out;
    out.upper = rep.rate;
    out.lower = rep.regime == Regime::poissonian ? p1 : std::min(p1, std::sqrt(p1 / static_cast<double>(n)));
    return out;
}

/// Rate for coordinates bounded in [0,1] with variances sigma^2(j).
inline BoundReport variance_rate(const ProbSeq& seq, std::int64_t n) {
    if (seq.kind != SeqKind::variance) throw ValidationError("variance_rate: sequence kind must be variance");
    if (n < 1) throw ValidationError("variance_rate: n must be >= 1");
    const double nd = static_cast<double>(n);
    bool poissonian = false;
    if (is_power_law(seq))
        poissonian = detail::power_law_poissonian(std::get<PowerLawFamily>(seq.family), nd);
    else
        poissonian = detail::all_below_poisson_line(exact_view(seq), nd, 1.0);
    if (!poissonian) return delta_rate(seq, n);
    BoundReport rep;
    const auto st = functional_S_T(seq);
    rep.S = st.S;
    rep.T = st.T;
    const auto sum = seminorm(seq, 1.0);
    rep.regime = Regime::poissonian;
    rep.diverges = sum.diverges;
    rep.rate = sum.diverges ? 1.0 / nd : std::min(1.0 / nd, std::sqrt(sum.value / nd));
    return rep;
}

struct LqBand {
    bool converges = true;
    double lower = 0.0;
    double upper = 0.0;
    std::optional<double> asymptotic_rate;
};

/// Two-sided estimate of E ||p_hat - p||_q from the binomial moment regimes.
inline LqBand lq_band(const ProbSeq& seq, std::int64_t n, double qnorm) {
    if (n < 1) throw ValidationError("lq_band: n must be >= 1");
    if (!(qnorm >= 1.0)) throw ValidationError("lq_band: qnorm must be >= 1");
    LqBand out;
    const auto l1 = seminorm(seq, 1.0);
    out.converges = !l1.diverges;
    if (!out.converges) {
        out.lower = kInf;
        out.upper = kInf;
        return out;
    }
    if (is_power_law(seq))
        throw ValidationError("lq_band: power_law sums need an explicit or blocks family");
    const double nd = static_cast<double>(n);
    CompensatedSum big;    // sum over p >= 1/n of p^{q/2}
    CompensatedSum small;  // sum over p <= 1/n of p^q
    CompensatedSum psi;
    for (const auto& b : exact_view(seq).blocks) {
        if (!b.count)
            throw RepresentabilityError("lq_band: block count e^" + detail::fmt_real(b.log_count) +
                                        " is not a representable integer");
        const double c = static_cast<double>(*b.count);
        if (b.q >= 1.0 / nd) big.add(c * std::pow(b.q, qnorm / 2.0));
        if (b.q <= 1.0 / nd) small.add(c * std::pow(b.q, qnorm));
        psi.add(c * psi_q(BinomialSpec(n, b.q), qnorm).value);
    }
    out.lower = std::pow(big.value(), 1.0 / qnorm) / std::sqrt(nd) + std::pow(small.value(), 1.0 / qnorm);
    out.upper = std::pow(psi.value() / std::pow(nd, qnorm), 1.0 / qnorm);
    if (qnorm >= 2.0) {
        const double norm = std::pow(seminorm(seq, qnorm / 2.0).value, 2.0 / qnorm);
        out.asymptotic_rate = std::sqrt(norm / nd);
    }
    return out;
}

/// Bounded-differences width sqrt(ln(2/gamma) / (2n)).
inline double mcdiarmid_width(std::int64_t n, double gamma) {
    if (n < 1) throw ValidationError("mcdiarmid_width: n must be >= 1");
    if (!(gamma > 0.0 && gamma < 1.0)) throw ValidationError("mcdiarmid_width: gamma must lie in (0,1)");
    return std::sqrt(std::log(2.0 / gamma) / (2.0 * static_cast<double>(n)));
}

struct HpBand {
    double gamma = 0.0;
    double upper = 0.0;
    double lower = 0.0;
    bool poissonian_flag = false;
    double mcdiarmid_width = 0.0;
};

/// Order of the (1-gamma)-quantile of the sup-deviation.
inline HpBand hp_band(const ProbSeq& seq, std::int64_t n, double gamma, const ConcentrationConstants& consts = {}) {
    consts.validate();
    if (n < 1) throw ValidationError("hp_band: n must be >= 1");
    if (!(gamma > 0.0 && gamma < 0.5)) throw ValidationError("hp_band: gamma must lie in (0, 1/2)");
    const double nd = static_cast<double>(n);
    HpBand out;
    out.gamma = gamma;
    out.mcdiarmid_width = mcdiarmid_width(n, gamma);
    BlockView up_view;
    BlockView lo_view;
    if (is_power_law(seq)) {
        const auto env = blocks(seq, TruncationPolicy{n, -1.0, 62});
        up_view = env.upper;
        lo_view = env.lower;
    } else {
        up_view = exact_view(seq);
        lo_view = up_view;
    }
    out.poissonian_flag = !std::any_of(up_view.blocks.begin(), up_view.blocks.end(), [&](const BlockEntry& b) {
                              return std::log(b.q) >= std::log(gamma) - std::log(2.0 * nd) -
                                                          detail::log_last_index(b.end_log_index);
                          });
    const double shift_up = -std::log(gamma);
    const double shift_lo = -std::log(std::log(1.0 / gamma));
    double up = 0.0;
    double lo = 0.0;
    for (const auto& b : up_view.blocks)
        up = std::max(up, phi(detail::log_last_index(b.end_log_index) + shift_up, b.q, n).value);
    for (const auto& b : lo_view.blocks)
        lo = std::max(lo, phi(detail::log_last_index(b.end_log_index) + shift_lo, b.q, n).value);
    out.upper = consts.hp_a1 * up;
    out.lower = consts.hp_a2 * lo;
    return out;
}

/// ln of the localized DKW tail c1 exp(-c2 min(t^2, t sqrt(nV))), capped at 0.
inline LogProb local_dkw_tail(std::int64_t n, double V, double t, const ConcentrationConstants& consts = {}) {
    consts.validate();
    if (n < 1) throw ValidationError("local_dkw_tail: n must be >= 1");
    if (!(V > 0.0 && V <= 0.25)) throw ValidationError("local_dkw_tail: V must lie in (0, 1/4]");
    if (!(t >= 0.0)) throw ValidationError("local_dkw_tail: t must be >= 0");
    const double m = std::min(t * t, t * std::sqrt(static_cast<double>(n) * V));
    return {std::min(0.0, std::log(consts.dkw_c1) - consts.dkw_c2 * m)};
}

} // namespace devbound
