#pragma once

// Command-line driver: flags or a JSON config in, CSV/JSON report rows out.
// Exit codes: 0 success, 1 validation/domain error, 2 resource or I/O error.

#include "devbound/binomial.hpp"
#include "devbound/bounds.hpp"
#include "devbound/constants.hpp"
#include "devbound/errors.hpp"
#include "devbound/oracle.hpp"
#include "devbound/report.hpp"
#include "devbound/sequences.hpp"
#include "devbound/simulator.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace devbound::cli {

/// One sequence descriptor, from flags or from a config object.
struct SeqDesc {
    std::string family;
    std::optional<double> lnJp1;
    std::optional<double> logJ;
    std::optional<double> J;
    std::optional<double> q;
    std::string values;
    std::string blocks;
    double a = 1.0;
    double b = 1.0;
    std::optional<std::int64_t> cap;
    std::optional<std::int64_t> n_ref;
    std::optional<double> K;
    double alpha = 0.5;
    std::string kind = "mean";
};

struct Options {
    SeqDesc seq;
    std::vector<SeqDesc> sequences;  // from config; overrides the flag descriptor when non-empty
    std::vector<std::int64_t> n;
    std::string n_geom;
    std::string side = "two_sided";
    std::string target = "product";
    std::string mode = "direct";
    std::int64_t trials = 10000;
    std::uint64_t seed = 1;
    int threads = 0;
    std::vector<double> gamma;
    std::vector<double> qnorm;
    std::vector<double> t;
    std::vector<double> x0;
    std::vector<double> level;
    std::vector<double> threshold;
    std::vector<std::string> consts;
    std::string format = "csv";
    std::string out;
    std::string raw_out;
    std::string config;
};

namespace detail {

using devbound::detail::fmt17;

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep))
        if (!cur.empty()) parts.push_back(cur);
    return parts;
}

inline double to_double(const std::string& s, const std::string& field) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ValidationError(field + ": cannot parse '" + s + "' as a number");
    }
}

inline std::string fmt(double v) { return devbound::detail::fmt_real(v); }

/// ln J from whichever of lnJp1 / logJ / J was given.
inline double resolve_logJ(const SeqDesc& d, const char* who) {
    const int given = int(d.lnJp1.has_value()) + int(d.logJ.has_value()) + int(d.J.has_value());
    if (given != 1) throw ValidationError(std::string(who) + ": give exactly one of --lnJp1, --logJ, --J");
    if (d.logJ) return *d.logJ;
    if (d.J) {
        if (!(*d.J >= 1.0)) throw ValidationError(std::string(who) + ": J must be >= 1");
        return std::log(*d.J);
    }
    if (!(*d.lnJp1 >= std::log(2.0))) throw ValidationError(std::string(who) + ": lnJp1 must be >= ln 2");
    return *d.lnJp1 + log1m_exp(-*d.lnJp1);
}

inline ProbSeq build_seq(const SeqDesc& d) {
    SeqKind kind = SeqKind::mean;
    if (d.kind == "variance")
        kind = SeqKind::variance;
    else if (d.kind != "mean")
        throw ValidationError("kind must be mean or variance (got '" + d.kind + "')");
    if (d.family == "step") {
        if (!d.q) throw ValidationError("step: --q is required");
        return build(StepFamily{resolve_logJ(d, "step"), *d.q}, kind);
    }
    if (d.family == "explicit") {
        ExplicitFamily f;
        for (const auto& v : split(d.values, ',')) f.values.push_back(to_double(v, "values"));
        return build(f, kind);
    }
    if (d.family == "blocks") {
        BlocksFamily f;
        for (const auto& item : split(d.blocks, ',')) {
            const auto pq = split(item, ':');
            if (pq.size() != 2) throw ValidationError("blocks: expected log_count:q, got '" + item + "'");
            f.blocks.push_back({to_double(pq[0], "blocks.log_count"), to_double(pq[1], "blocks.q")});
        }
        return build(f, kind);
    }
    if (d.family == "power_law") return build(PowerLawFamily{d.a, d.b, d.cap}, kind);
    if (d.family == "open_problem") {
        if (!d.n_ref || !d.K) throw ValidationError("open_problem: --n-ref and --K are required");
        return build(OpenProblemFamily{*d.n_ref, *d.K}, kind);
    }
    if (d.family == "poissonian") {
        if (!d.n_ref || !d.J) throw ValidationError("poissonian: --n-ref and --J are required");
        return build(PoissonianFamily{d.alpha, *d.n_ref, static_cast<std::int64_t>(*d.J)}, kind);
    }
    if (d.family.empty()) throw ValidationError("family: --family is required");
    throw ValidationError("family: unknown family '" + d.family + "'");
}

template <class T>
void take(const nlohmann::json& j, const char* key, T& dst) {
    if (j.contains(key)) dst = j.at(key).get<T>();
}

template <class T>
void take(const nlohmann::json& j, const char* key, std::optional<T>& dst) {
    if (j.contains(key)) dst = j.at(key).get<T>();
}

inline SeqDesc desc_from_json(const nlohmann::json& j) {
    SeqDesc d;
    take(j, "family", d.family);
    take(j, "lnJp1", d.lnJp1);
    take(j, "logJ", d.logJ);
    take(j, "J", d.J);
    take(j, "q", d.q);
    if (j.contains("values")) {
        std::string s;
        for (double v : j.at("values").get<std::vector<double>>()) s += fmt17(v) + ",";
        d.values = s;
    }
    if (j.contains("blocks")) {
        std::string s;
        for (const auto& b : j.at("blocks")) s += fmt17(b.at(0).get<double>()) + ":" + fmt17(b.at(1).get<double>()) + ",";
        d.blocks = s;
    }
    take(j, "a", d.a);
    take(j, "b", d.b);
    take(j, "cap", d.cap);
    take(j, "n_ref", d.n_ref);
    take(j, "K", d.K);
    take(j, "alpha", d.alpha);
    take(j, "kind", d.kind);
    return d;
}

/// Fill options from a JSON config; flags given on the command line win.
inline void apply_config(const std::string& path, Options& o, const CLI::App& sub) {
    std::ifstream f(path);
    if (!f) throw ResourceError("config: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    if (!j.is_object()) throw ValidationError("config: top level must be an object");
    auto unset = [&](const char* flag) { return sub.count(flag) == 0; };
    try {
        if (j.contains("sequences"))
            for (const auto& s : j.at("sequences")) o.sequences.push_back(desc_from_json(s));
        if (j.contains("sequence") && unset("--family")) o.seq = desc_from_json(j.at("sequence"));
        if (unset("--n")) {
            if (j.contains("n")) o.n = j.at("n").get<std::vector<std::int64_t>>();
            if (j.contains("n_geometric")) {
                const auto& g = j.at("n_geometric");
                o.n_geom = std::to_string(g.at("start").get<std::int64_t>()) + ":" +
                           std::to_string(g.at("stop").get<std::int64_t>()) + ":" + fmt17(g.at("factor").get<double>());
            }
        }
        if (unset("--side")) take(j, "side", o.side);
        if (unset("--target")) take(j, "target", o.target);
        if (unset("--mode")) take(j, "mode", o.mode);
        if (unset("--trials")) take(j, "trials", o.trials);
        if (unset("--seed")) take(j, "seed", o.seed);
        if (unset("--gamma")) take(j, "gamma", o.gamma);
        if (unset("--qnorm")) take(j, "qnorm", o.qnorm);
        if (unset("--t")) take(j, "t", o.t);
        if (unset("--x0")) take(j, "x0", o.x0);
        if (unset("--level")) take(j, "level", o.level);
        if (unset("--threshold")) take(j, "threshold", o.threshold);
        if (unset("--format")) take(j, "format", o.format);
        if (unset("--out")) take(j, "out", o.out);
        if (j.contains("constants") && unset("--const"))
            for (const auto& [k, v] : j.at("constants").items()) o.consts.push_back(k + "=" + fmt17(v.get<double>()));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
}

inline ConcentrationConstants build_consts(const Options& o) {
    ConcentrationConstants c;
    for (const auto& kv : o.consts) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ValidationError("const: expected name=value, got '" + kv + "'");
        c.set(kv.substr(0, eq), to_double(kv.substr(eq + 1), "const." + kv.substr(0, eq)));
    }
    c.validate();
    return c;
}

inline std::vector<std::int64_t> n_grid(const Options& o) {
    std::vector<std::int64_t> grid = o.n;
    if (!o.n_geom.empty()) {
        const auto parts = split(o.n_geom, ':');
        if (parts.size() != 3) throw ValidationError("n-geom: expected start:stop:factor");
        const double start = to_double(parts[0], "n-geom.start");
        const double stop = to_double(parts[1], "n-geom.stop");
        const double factor = to_double(parts[2], "n-geom.factor");
        if (!(start >= 1.0 && stop >= start && factor > 1.0)) throw ValidationError("n-geom: need 1 <= start <= stop, factor > 1");
        std::int64_t last = 0;
        for (double v = start; v <= stop * (1.0 + 1e-12); v *= factor) {
            const auto k = static_cast<std::int64_t>(std::llround(v));
            if (k != last) grid.push_back(k);
            last = k;
        }
    }
    if (grid.empty()) throw ValidationError("n: the n grid is empty (use --n or --n-geom)");
    for (auto v : grid)
        if (v < 1) throw ValidationError("n: every n must be >= 1");
    return grid;
}

inline std::vector<ProbSeq> sequences(const Options& o) {
    std::vector<ProbSeq> out;
    if (!o.sequences.empty()) {
        for (const auto& d : o.sequences) out.push_back(build_seq(d));
    } else {
        out.push_back(build_seq(o.seq));
    }
    return out;
}

inline ReportRow row(const std::string& exp, const std::string& seq, std::int64_t n, const std::string& quantity,
                     double value) {
    ReportRow r;
    r.experiment = exp;
    r.sequence = seq;
    r.n = n;
    r.quantity = quantity;
    r.value = value;
    return r;
}

/// Block view for oracle-style commands; power laws use their upper envelope.
inline BlockView oracle_view(const ProbSeq& s, std::int64_t n) {
    if (is_power_law(s)) return blocks(s, TruncationPolicy{n, -1.0, 62}).upper;
    return exact_view(s);
}

inline SimTarget make_target(const Options& o, const ProbSeq* seq, std::int64_t n) {
    if (o.target == "cdf") {
        if (o.x0.empty()) throw ValidationError("x0: --x0 is required for target cdf");
        return CdfSup{o.x0.front()};
    }
    if (seq == nullptr) throw ValidationError("family: a sequence is required for target " + o.target);
    if (o.target == "product") {
        HugeBlockMode mode = HugeBlockMode::direct;
        if (o.mode == "max_inversion")
            mode = HugeBlockMode::max_inversion;
        else if (o.mode != "direct")
            throw ValidationError("mode must be direct or max_inversion");
        return ProductSup{oracle_view(*seq, n), parse_side(o.side), mode};
    }
    if (o.target == "coupled" || o.target == "coupled_interval")
        return CoupledSup{exact_view(*seq), o.target == "coupled_interval"};
    if (o.target == "two_point") {
        if (seq->kind != SeqKind::variance) throw ValidationError("kind: target two_point needs --kind variance");
        return TwoPoint{exact_view(*seq)};
    }
    throw ValidationError("target must be product, coupled, coupled_interval, two_point or cdf");
}

inline void add_estimate_rows(std::vector<ReportRow>& rows, const std::string& exp, const std::string& seq,
                              std::int64_t n, const SimEstimate& e, const std::string& prefix = "") {
    auto m = row(exp, seq, n, prefix + "mean", e.mean);
    m.std_error = e.std_error;
    m.ci_lo = e.mean - kWilsonZ * e.std_error;
    m.ci_hi = e.mean + kWilsonZ * e.std_error;
    rows.push_back(m);
    for (const auto& [level, v] : e.quantiles) rows.push_back(row(exp, seq, n, prefix + "quantile_" + fmt(level), v));
    for (const auto& [t, tp] : e.tail_probs) {
        auto r = row(exp, seq, n, prefix + "exceed_" + fmt(t), tp.estimate);
        r.ci_lo = tp.wilson_lo;
        r.ci_hi = tp.wilson_hi;
        rows.push_back(r);
    }
}

inline void write_raw(const std::string& path, const std::vector<double>& samples) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ResourceError("raw-out: cannot open '" + path + "' for writing");
    for (double v : samples) f << fmt17(v) << '\n';
    if (!f) throw ResourceError("raw-out: failed writing '" + path + "'");
}

// ---- subcommands -----------------------------------------------------------

inline std::vector<ReportRow> cmd_bound(const Options& o) {
    std::vector<ReportRow> rows;
    const auto grid = n_grid(o);
    for (const auto& s : sequences(o)) {
        const auto id = label(s);
        for (auto n : grid) {
            const auto rep = s.kind == SeqKind::variance ? variance_rate(s, n) : delta_rate(s, n);
            auto r = row("bound", id, n, "rate", rep.rate);
            r.regime = to_string(rep.regime);
            r.argmax_log_index = rep.argmax_log_index;
            rows.push_back(r);
            rows.push_back(row("bound", id, n, "S", rep.S));
            rows.push_back(row("bound", id, n, "T", rep.T));
            if (rep.bracket) {
                rows.push_back(row("bound", id, n, "rate_lower", rep.bracket->lower));
                rows.push_back(row("bound", id, n, "rate_upper", rep.bracket->upper));
            }
            if (n >= 21 && std::isfinite(rep.T)) rows.push_back(row("bound", id, n, "cohen", cohen_bound(rep.S, rep.T, n)));
            if (s.kind == SeqKind::mean) {
                const auto band = correlated_band(s, n);
                rows.push_back(row("bound", id, n, "correlated_lower", band.lower));
                rows.push_back(row("bound", id, n, "correlated_upper", band.upper));
            }
        }
    }
    return rows;
}

inline std::vector<ReportRow> cmd_phi(const Options& o) {
    if (!o.seq.q) throw ValidationError("q: --q is required");
    const double logJ = resolve_logJ(o.seq, "phi");
    const std::string id = "phi(logJ=" + fmt(logJ) + ";q=" + fmt(*o.seq.q) + ")";
    std::vector<ReportRow> rows;
    for (auto n : n_grid(o)) {
        const auto v = phi(logJ, *o.seq.q, n);
        auto r = row("phi", id, n, "phi", v.value);
        r.regime = to_string(v.regime);
        rows.push_back(r);
    }
    return rows;
}

inline std::vector<ReportRow> cmd_epsilon(const Options& o) {
    if (!o.seq.q) throw ValidationError("q: --q is required");
    const double logJ = resolve_logJ(o.seq, "epsilon");
    const auto consts = build_consts(o);
    const std::string id = "epsilon(logJ=" + fmt(logJ) + ";q=" + fmt(*o.seq.q) + ")";
    std::vector<ReportRow> rows;
    for (auto n : n_grid(o)) {
        const auto e = epsilon_exact(logJ, *o.seq.q, n, consts);
        auto r = row("epsilon", id, n, "epsilon", e.epsilon);
        r.regime = e.degenerate ? "degenerate" : "regular";
        rows.push_back(r);
        rows.push_back(row("epsilon", id, n, "threshold_grid_point", e.threshold_grid_point));
        const auto p = phi(logJ, *o.seq.q, n);
        auto pr = row("epsilon", id, n, "phi", p.value);
        pr.regime = to_string(p.regime);
        rows.push_back(pr);
    }
    return rows;
}

inline std::vector<Side> sides(const std::string& s) {
    if (s == "all") return {Side::two_sided, Side::upper, Side::lower};
    return {parse_side(s)};
}

inline const char* delta_name(Side s) {
    switch (s) {
    case Side::two_sided: return "delta";
    case Side::upper: return "delta_plus";
    case Side::lower: return "delta_minus";
    }
    return "delta";
}

inline std::vector<ReportRow> cmd_oracle(const Options& o) {
    std::vector<ReportRow> rows;
    const auto grid = n_grid(o);
    for (const auto& s : sequences(o)) {
        for (auto n : grid) {
            std::vector<std::pair<std::string, BlockView>> views;
            if (is_power_law(s)) {
                const auto env = blocks(s, TruncationPolicy{n, -1.0, 62});
                views.emplace_back("_upper_envelope", env.upper);
                views.emplace_back("_lower_envelope", env.lower);
            } else {
                views.emplace_back("", exact_view(s));
            }
            for (const auto& [suffix, v] : views) {
                for (auto side : sides(o.side)) {
                    const auto res = exact_sup_expectation(v, n, side);
                    rows.push_back(row("oracle", label(s), n, delta_name(side) + suffix, res.value));
                    for (double level : o.level)
                        rows.push_back(row("oracle", label(s), n,
                                           std::string("quantile_") + to_string(side) + "_" + fmt(level) + suffix,
                                           sup_quantile(v, n, level, side)));
                }
            }
        }
    }
    return rows;
}

inline std::vector<ReportRow> cmd_simulate(const Options& o) {
    std::vector<ReportRow> rows;
    const auto grid = n_grid(o);
    std::vector<std::optional<ProbSeq>> seqs;
    if (o.target == "cdf")
        seqs.emplace_back(std::nullopt);
    else
        for (auto& s : sequences(o)) seqs.emplace_back(s);
    std::vector<double> raw;
    for (const auto& s : seqs) {
        const std::string id = s ? label(*s) : "cdf(x0=" + fmt(o.x0.empty() ? 1.0 : o.x0.front()) + ")";
        for (auto n : grid) {
            SimPlan plan;
            plan.seed = o.seed;
            plan.trials = o.trials;
            plan.n = n;
            plan.target = make_target(o, s ? &*s : nullptr, n);
            plan.levels = o.level;
            plan.thresholds = o.threshold;
            plan.workers = o.threads;
            const auto samples = simulate_samples(plan);
            auto est = summarize(samples, plan.levels, plan.thresholds);
            est.seed = plan.seed;
            add_estimate_rows(rows, "simulate", id, n, est);
            raw.insert(raw.end(), samples.begin(), samples.end());
        }
    }
    if (!o.raw_out.empty()) write_raw(o.raw_out, raw);
    return rows;
}

inline std::vector<ReportRow> cmd_sweep(const Options& o) {
    std::vector<ReportRow> rows;
    const auto grid = n_grid(o);
    for (const auto& s : sequences(o)) {
        const auto id = label(s);
        for (auto n : grid) {
            const auto rep = s.kind == SeqKind::variance ? variance_rate(s, n) : delta_rate(s, n);
            auto r = row("sweep", id, n, "rate", rep.rate);
            r.regime = to_string(rep.regime);
            r.argmax_log_index = rep.argmax_log_index;
            rows.push_back(r);
            if (s.kind == SeqKind::mean && !is_power_law(s) && n <= kOracleMaxN) {
                const auto ex = exact_sup_expectation(exact_view(s), n, Side::upper);
                rows.push_back(row("sweep", id, n, "delta_plus", ex.value));
                if (rep.rate > 0.0) rows.push_back(row("sweep", id, n, "ratio", ex.value / rep.rate));
            }
        }
    }
    return rows;
}

inline std::vector<ReportRow> cmd_dkw(const Options& o) {
    if (o.x0.empty()) throw ValidationError("x0: --x0 is required");
    if (o.t.empty()) throw ValidationError("t: --t grid is required");
    const auto consts = build_consts(o);
    std::vector<ReportRow> rows;
    for (auto n : n_grid(o)) {
        for (double x0 : o.x0) {
            const double V = std::min(0.25, x0 * (1.0 - x0));
            if (!(V > 0.0)) throw ValidationError("x0: must lie in (0,1) for the dkw experiment");
            const double scale = std::sqrt(V / static_cast<double>(n));
            SimPlan plan;
            plan.seed = o.seed;
            plan.trials = o.trials;
            plan.n = n;
            plan.target = CdfSup{x0};
            plan.workers = o.threads;
            plan.levels = o.level.empty() ? std::vector<double>{0.99} : o.level;
            for (double t : o.t) plan.thresholds.push_back(t * scale);
            const auto est = simulate(plan);
            const std::string id = "cdf(x0=" + fmt(x0) + ")";
            add_estimate_rows(rows, "dkw", id, n, est);
            rows.push_back(row("dkw", id, n, "local_scale", std::sqrt(x0 / static_cast<double>(n))));
            for (double t : o.t) {
                const auto& tp = est.tail_probs.at(t * scale);
                auto r = row("dkw", id, n, "exceed_t=" + fmt(t), tp.estimate);
                r.ci_lo = tp.wilson_lo;
                r.ci_hi = tp.wilson_hi;
                rows.push_back(r);
                rows.push_back(row("dkw", id, n, "bound_t=" + fmt(t), local_dkw_tail(n, V, t, consts).prob()));
            }
        }
    }
    return rows;
}

struct OpenProblemPoint {
    std::int64_t n = 0;
    double K = 0.0;
    double delta_plus = 0.0;
    double S = 0.0;
    double T = 0.0;
    double psi = 0.0;
    double normalized = 0.0;
};

/// Exact Delta^+ for the open-problem sequence at n with K = max(4, ln n)
/// unless K is given.
inline OpenProblemPoint open_problem_point(std::int64_t n, std::optional<double> K_opt = std::nullopt) {
    const double nd = static_cast<double>(n);
    const double K = K_opt ? *K_opt : std::max(4.0, std::log(nd));
    const auto s = build(OpenProblemFamily{n, K});
    OpenProblemPoint pt;
    pt.n = n;
    pt.K = K;
    pt.delta_plus = exact_sup_expectation(exact_view(s), n, Side::upper).value;
    const auto st = functional_S_T(s);
    pt.S = st.S;
    pt.T = st.T;
    pt.psi = (pt.delta_plus - std::sqrt(pt.S / nd)) * nd / pt.T;
    pt.normalized = pt.delta_plus * std::sqrt(nd) * std::log(K) / K;
    return pt;
}

inline std::vector<ReportRow> cmd_openproblem(const Options& o) {
    std::vector<ReportRow> rows;
    for (auto n : n_grid(o)) {
        const auto pt = open_problem_point(n, o.seq.K);
        const std::string id = "open_problem(n_ref=" + std::to_string(n) + ";K=" + fmt(pt.K) + ")";
        const double nd = static_cast<double>(n);
        rows.push_back(row("openproblem", id, n, "delta_plus", pt.delta_plus));
        rows.push_back(row("openproblem", id, n, "sqrt_S_over_n", std::sqrt(pt.S / nd)));
        rows.push_back(row("openproblem", id, n, "T_over_n", pt.T / nd));
        rows.push_back(row("openproblem", id, n, "psi", pt.psi));
        rows.push_back(row("openproblem", id, n, "normalized", pt.normalized));
    }
    return rows;
}

inline std::vector<ReportRow> cmd_lq(const Options& o) {
    if (o.qnorm.empty()) throw ValidationError("qnorm: --qnorm is required");
    std::vector<ReportRow> rows;
    const auto grid = n_grid(o);
    for (const auto& s : sequences(o)) {
        const auto id = label(s);
        for (auto n : grid) {
            for (double qn : o.qnorm) {
                const auto band = lq_band(s, n, qn);
                const std::string sfx = "_q=" + fmt(qn);
                rows.push_back(row("lq", id, n, "converges" + sfx, band.converges ? 1.0 : 0.0));
                rows.push_back(row("lq", id, n, "lq_lower" + sfx, band.lower));
                rows.push_back(row("lq", id, n, "lq_upper" + sfx, band.upper));
                if (band.converges)
                    rows.push_back(row("lq", id, n, "lq_exact" + sfx,
                                       std::pow(exact_lq_moment(exact_view(s), n, qn), 1.0 / qn)));
                if (band.asymptotic_rate) rows.push_back(row("lq", id, n, "lq_asymptotic" + sfx, *band.asymptotic_rate));
            }
        }
    }
    return rows;
}

inline std::vector<ReportRow> cmd_hp(const Options& o) {
    if (o.gamma.empty()) throw ValidationError("gamma: --gamma is required");
    const auto consts = build_consts(o);
    std::vector<ReportRow> rows;
    const auto grid = n_grid(o);
    for (const auto& s : sequences(o)) {
        const auto id = label(s);
        for (auto n : grid) {
            for (double g : o.gamma) {
                const auto band = hp_band(s, n, g, consts);
                const std::string sfx = "_gamma=" + fmt(g);
                rows.push_back(row("hp", id, n, "hp_upper" + sfx, band.upper));
                rows.push_back(row("hp", id, n, "hp_lower" + sfx, band.lower));
                rows.push_back(row("hp", id, n, "mcdiarmid_width" + sfx, band.mcdiarmid_width));
                rows.push_back(row("hp", id, n, "poissonian_flag" + sfx, band.poissonian_flag ? 1.0 : 0.0));
                if (n <= kOracleMaxN)
                    rows.push_back(row("hp", id, n, "oracle_quantile" + sfx,
                                       sup_quantile(oracle_view(s, n), n, 1.0 - g, parse_side(o.side))));
            }
        }
    }
    return rows;
}

inline void add_sequence_flags(CLI::App* sub, Options& o) {
    auto& d = o.seq;
    sub->add_option("--family", d.family, "step | explicit | blocks | power_law | open_problem | poissonian");
    sub->add_option("--lnJp1", d.lnJp1, "ln(J+1) for step families");
    sub->add_option("--logJ", d.logJ, "ln J for step families");
    sub->add_option("--J", d.J, "integer J (step block length, poissonian support)");
    sub->add_option("--q", d.q, "block value");
    sub->add_option("--values", d.values, "explicit values, comma separated");
    sub->add_option("--blocks", d.blocks, "blocks as log_count:q,log_count:q,...");
    sub->add_option("--a", d.a, "power_law scale");
    sub->add_option("--b", d.b, "power_law exponent");
    sub->add_option("--cap", d.cap, "power_law last supported index");
    sub->add_option("--n-ref", d.n_ref, "reference n for open_problem / poissonian");
    sub->add_option("--K", d.K, "open_problem K");
    sub->add_option("--alpha", d.alpha, "poissonian alpha");
    sub->add_option("--kind", d.kind, "mean | variance");
}

inline void add_common_flags(CLI::App* sub, Options& o) {
    sub->add_option("--n", o.n, "sample counts")->delimiter(',');
    sub->add_option("--n-geom", o.n_geom, "geometric n grid start:stop:factor");
    sub->add_option("--const", o.consts, "constant override name=value")->delimiter(',');
    sub->add_option("--format", o.format, "csv | json");
    sub->add_option("--out", o.out, "output path (default stdout)");
    sub->add_option("--config", o.config, "JSON experiment config");
}

} // namespace detail

/// Entry point shared by the tool binary and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    using namespace detail;
    CLI::App app{"devbound: sup-deviation bounds, exact oracle and simulator"};
    app.require_subcommand(1);
    Options o;
    struct Cmd {
        const char* name;
        const char* help;
        std::vector<ReportRow> (*fn)(const Options&);
    };
    const Cmd cmds[] = {
        {"bound", "rate functionals for a sequence", cmd_bound},
        {"phi", "step functional phi", cmd_phi},
        {"epsilon", "exact deviation quantile epsilon", cmd_epsilon},
        {"oracle", "exact expected sup-deviation", cmd_oracle},
        {"simulate", "Monte-Carlo estimate", cmd_simulate},
        {"sweep", "rate and exact value across an n grid", cmd_sweep},
        {"dkw", "localized empirical-CDF experiment", cmd_dkw},
        {"openproblem", "log-factor necessity experiment", cmd_openproblem},
        {"lq", "l_q norm band", cmd_lq},
        {"hp", "high-probability band", cmd_hp},
    };
    std::vector<std::pair<CLI::App*, const Cmd*>> subs;
    for (const auto& c : cmds) {
        auto* sub = app.add_subcommand(c.name, c.help);
        add_sequence_flags(sub, o);
        add_common_flags(sub, o);
        sub->add_option("--side", o.side, "two_sided | upper | lower | all");
        sub->add_option("--target", o.target, "product | coupled | coupled_interval | two_point | cdf");
        sub->add_option("--mode", o.mode, "direct | max_inversion");
        sub->add_option("--trials", o.trials, "Monte-Carlo trials");
        sub->add_option("--seed", o.seed, "64-bit seed");
        sub->add_option("--threads", o.threads, "worker threads (default DEVBOUND_THREADS or all cores)");
        sub->add_option("--gamma", o.gamma, "failure probabilities")->delimiter(',');
        sub->add_option("--qnorm", o.qnorm, "norm exponents")->delimiter(',');
        sub->add_option("--t", o.t, "tail grid")->delimiter(',');
        sub->add_option("--x0", o.x0, "CDF localization points")->delimiter(',');
        sub->add_option("--level", o.level, "quantile levels")->delimiter(',');
        sub->add_option("--threshold", o.threshold, "exceedance thresholds")->delimiter(',');
        sub->add_option("--raw-out", o.raw_out, "write per-trial values, one per line");
        subs.emplace_back(sub, &c);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? 0 : 1;
    }
    try {
        for (const auto& [sub, cmd] : subs) {
            if (!sub->parsed()) continue;
            if (!o.config.empty()) apply_config(o.config, o, *sub);
            if (o.trials < 1) throw ValidationError("trials: must be >= 1");
            const auto format = parse_format(o.format);
            build_consts(o);
            const auto rows = cmd->fn(o);
            emit(rows, format, o.out, out);
        }
        return 0;
    } catch (const ResourceError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
}

} // namespace devbound::cli
