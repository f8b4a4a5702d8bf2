#pragma once

// Monte-Carlo estimates of sup-deviations. Every trial draws from its own
// generator keyed by (seed, trial index), so results do not depend on how
// trials are split across worker threads.

#include "devbound/binomial.hpp"
#include "devbound/errors.hpp"
#include "devbound/logspace.hpp"
#include "devbound/oracle.hpp"
#include "devbound/sequences.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <variant>
#include <vector>

namespace devbound {

enum class HugeBlockMode { direct, max_inversion };

inline const char* to_string(HugeBlockMode m) { return m == HugeBlockMode::direct ? "direct" : "max_inversion"; }

inline constexpr std::int64_t kDirectMaxCount = 10'000'000;

/// sup_j deviation for independent coordinates.
struct ProductSup {
    BlockView view;
    Side side = Side::two_sided;
    HugeBlockMode mode = HugeBlockMode::direct;
};

/// sup_j |F_n(p(j)) - p(j)| for X(j) = 1[U <= p(j)]; with interval_sup the
/// sup runs over all of [0, p(1)] instead of the index set.
struct CoupledSup {
    BlockView view;
    bool interval_sup = false;
};

/// Coordinates eta * Bernoulli(sigma^2 / eta^2), eta = sqrt(2 n sum sigma^2).
struct TwoPoint {
    BlockView view;  ///< variances
};

/// sup_{u <= x0} |F_n(u) - u| for n uniform samples.
struct CdfSup {
    double x0 = 1.0;
};

using SimTarget = std::variant<ProductSup, CoupledSup, TwoPoint, CdfSup>;

struct SimPlan {
    std::uint64_t seed = 0;
    std::int64_t trials = 1000;
    std::int64_t n = 1;
    SimTarget target = CdfSup{};
    std::vector<double> levels;
    std::vector<double> thresholds;
    int workers = 0;  ///< 0 selects DEVBOUND_THREADS or the machine default
};

struct TailProb {
    double estimate = 0.0;
    double wilson_lo = 0.0;
    double wilson_hi = 0.0;
};

struct SimEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::map<double, double> quantiles;
    std::map<double, TailProb> tail_probs;
    std::int64_t trials = 0;
    std::uint64_t seed = 0;
};

inline constexpr double kWilsonZ = 1.959963984540054;

/// 95% Wilson score interval for `hits` successes out of `total`.
inline TailProb wilson_interval(std::int64_t hits, std::int64_t total) {
    const double N = static_cast<double>(total);
    const double p = static_cast<double>(hits) / N;
    const double z2 = kWilsonZ * kWilsonZ;
    const double denom = 1.0 + z2 / N;
    const double centre = (p + z2 / (2.0 * N)) / denom;
    const double half = kWilsonZ * std::sqrt(p * (1.0 - p) / N + z2 / (4.0 * N * N)) / denom;
    return {p, std::clamp(centre - half, 0.0, p), std::clamp(centre + half, p, 1.0)};
}

/// Mean, standard error, nearest-rank quantiles and exceedance P(X > t).
inline SimEstimate summarize(const std::vector<double>& samples, const std::vector<double>& levels = {},
                             const std::vector<double>& thresholds = {}) {
    if (samples.size() < 2) throw ValidationError("summarize: at least 2 samples are required");
    const auto N = static_cast<std::int64_t>(samples.size());
    SimEstimate est;
    est.trials = N;
    CompensatedSum s;
    for (double x : samples) s.add(x);
    est.mean = s.value() / static_cast<double>(N);
    CompensatedSum ss;
    for (double x : samples) ss.add((x - est.mean) * (x - est.mean));
    const double var = ss.value() / static_cast<double>(N - 1);
    est.std_error = std::sqrt(std::max(0.0, var) / static_cast<double>(N));

    std::vector<double> sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    for (double level : levels) {
        if (!(level > 0.0 && level <= 1.0)) throw ValidationError("summarize: quantile level must lie in (0,1]");
        auto rank = static_cast<std::int64_t>(std::ceil(level * static_cast<double>(N)));
        rank = std::clamp<std::int64_t>(rank, 1, N);
        est.quantiles[level] = sorted[static_cast<std::size_t>(rank - 1)];
    }
    for (double t : thresholds) {
        const auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), t);
        est.tail_probs[t] = wilson_interval(above, N);
    }
    return est;
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

class TrialRng {
public:
    TrialRng(std::uint64_t seed, std::uint64_t trial) : eng_(splitmix64(splitmix64(seed) ^ trial)) {}
    /// Uniform on the open interval (0,1).
    double uniform() { return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53; }

private:
    std::mt19937_64 eng_;
};

/// Inverse-CDF binomial sampler with a guide table.
class BinomialSampler {
public:
    BinomialSampler(std::int64_t n, double p) {
        const BinomialSpec spec(n, p);
        cdf_.resize(static_cast<std::size_t>(n + 1));
        CompensatedSum acc;
        for (std::int64_t k = 0; k <= n; ++k) {
            acc.add(std::exp(log_pmf(spec, k)));
            cdf_[static_cast<std::size_t>(k)] = std::min(1.0, acc.value());
        }
        cdf_.back() = 1.0;
        const std::size_t m = cdf_.size();
        guide_.resize(m);
        std::size_t k = 0;
        for (std::size_t i = 0; i < m; ++i) {
            const double level = static_cast<double>(i) / static_cast<double>(m);
            while (cdf_[k] <= level) ++k;
            guide_[i] = k;
        }
    }

    std::int64_t operator()(double u) const {
        const auto i = std::min(guide_.size() - 1, static_cast<std::size_t>(u * static_cast<double>(guide_.size())));
        std::size_t k = guide_[i];
        while (cdf_[k] <= u) ++k;
        return static_cast<std::int64_t>(k);
    }

private:
    std::vector<double> cdf_;
    std::vector<std::size_t> guide_;
};

/// Samples the max of J iid binomials by inverting F(k)^J in log space:
/// max <= k iff J * (-ln F(k)) <= -ln u.
class BlockMaxSampler {
public:
    BlockMaxSampler(std::int64_t n, double q, double log_count) {
        const TailTable table(BinomialSpec(n, q));
        log_hazard_.resize(static_cast<std::size_t>(n + 1));
        for (std::int64_t k = 0; k <= n; ++k) {
            const double log_c = table.log_ge(k + 1);
            double h = kNegInf;
            if (log_c == kNegInf)
                h = kNegInf;
            else if (log_c < -kLn2)
                h = log_neg_log1m_exp(log_c);
            else
                h = std::log(-table.log_le(k));
            log_hazard_[static_cast<std::size_t>(k)] = log_count + h;
        }
    }

    std::int64_t operator()(double u) const {
        const double target = std::log(-std::log(u));
        // log_hazard_ is non-increasing in k; find the first k at or below target.
        auto it = std::lower_bound(log_hazard_.begin(), log_hazard_.end(), target,
                                   [](double h, double t) { return h > t; });
        return static_cast<std::int64_t>(it - log_hazard_.begin());
    }

private:
    std::vector<double> log_hazard_;
};

inline std::int64_t direct_count(const BlockEntry& b, const char* who) {
    if (!b.count || *b.count > kDirectMaxCount)
        throw RepresentabilityError(std::string(who) + ": block count e^" + fmt_real(b.log_count) +
                                    " is too large for direct sampling (cap 10^7)");
    return *b.count;
}

/// sup_{u <= x0} |F_n(u) - u| from sorted samples.
inline double cdf_sup_sorted(const std::vector<double>& sorted, double x0) {
    const double n = static_cast<double>(sorted.size());
    double best = 0.0;
    std::size_t m = 0;
    for (std::size_t i = 0; i < sorted.size() && sorted[i] <= x0; ++i) {
        const double u = sorted[i];
        const double a = static_cast<double>(i + 1) / n;
        const double b = static_cast<double>(i) / n;
        best = std::max({best, std::abs(a - u), std::abs(b - u)});
        m = i + 1;
    }
    return std::max(best, std::abs(static_cast<double>(m) / n - x0));
}

/// Precomputed per-plan state shared read-only by all workers.
class TrialKernel {
public:
    explicit TrialKernel(const SimPlan& plan) : plan_(plan) {
        if (plan.n < 1) throw ValidationError("simulate: n must be >= 1");
        if (plan.trials < 1) throw ValidationError("simulate: trials must be >= 1");
        std::visit([this](const auto& t) { prepare(t); }, plan.target);
    }

    double operator()(std::uint64_t trial, std::vector<double>& scratch) const {
        TrialRng rng(plan_.seed, trial);
        return std::visit([&](const auto& t) { return run(t, rng, scratch); }, plan_.target);
    }

private:
    struct BlockPlan {
        double q = 0.0;
        std::int64_t count = 0;
        double scale = 1.0;   // value multiplier (eta for the two-point target)
        double centre = 0.0;  // mean of one coordinate
    };

    void prepare(const ProductSup& t) {
        if (t.mode == HugeBlockMode::max_inversion) {
            if (t.side != Side::upper)
                throw ValidationError("simulate: max_inversion mode supports side=upper only");
            for (const auto& b : t.view.blocks) {
                maxers_.emplace_back(plan_.n, b.q, b.log_count);
                blocks_.push_back({b.q, 0, 1.0, b.q});
            }
            return;
        }
        for (const auto& b : t.view.blocks) {
            blocks_.push_back({b.q, direct_count(b, "product_sup"), 1.0, b.q});
            samplers_.emplace_back(plan_.n, b.q);
        }
    }
    void prepare(const CoupledSup& t) {
        for (const auto& b : t.view.blocks) blocks_.push_back({b.q, 0, 1.0, b.q});
    }
    void prepare(const TwoPoint& t) {
        CompensatedSum total;
        for (const auto& b : t.view.blocks)
            total.add(static_cast<double>(direct_count(b, "two_point")) * b.q);
        const double nd = static_cast<double>(plan_.n);
        const double eta = std::sqrt(2.0 * nd * total.value());
        if (eta > 1.0) throw DomainError("two_point: requires sum sigma^2 <= 1/(2n) so that eta <= 1");
        for (const auto& b : t.view.blocks) {
            const double z = b.q / (eta * eta);
            blocks_.push_back({z, *b.count, eta, b.q / eta});
            samplers_.emplace_back(plan_.n, z);
        }
    }
    void prepare(const CdfSup& t) {
        if (!(t.x0 > 0.0 && t.x0 <= 1.0)) throw ValidationError("cdf_sup: x0 must lie in (0,1]");
    }

    double run(const ProductSup& t, TrialRng& rng, std::vector<double>&) const {
        const double nd = static_cast<double>(plan_.n);
        double up = 0.0;
        double down = 0.0;
        for (std::size_t i = 0; i < blocks_.size(); ++i) {
            const auto& b = blocks_[i];
            if (t.mode == HugeBlockMode::max_inversion) {
                up = std::max(up, static_cast<double>(maxers_[i](rng.uniform())) / nd - b.q);
                continue;
            }
            std::int64_t mx = -1;
            std::int64_t mn = plan_.n + 1;
            for (std::int64_t j = 0; j < b.count; ++j) {
                const std::int64_t y = samplers_[i](rng.uniform());
                mx = std::max(mx, y);
                mn = std::min(mn, y);
            }
            up = std::max(up, static_cast<double>(mx) / nd - b.q);
            down = std::max(down, b.q - static_cast<double>(mn) / nd);
        }
        if (t.side == Side::upper) return up;
        if (t.side == Side::lower) return down;
        return std::max(up, down);
    }

    double run(const CoupledSup& t, TrialRng& rng, std::vector<double>& u) const {
        u.resize(static_cast<std::size_t>(plan_.n));
        for (auto& x : u) x = rng.uniform();
        std::sort(u.begin(), u.end());
        if (t.interval_sup) return blocks_.empty() ? 0.0 : cdf_sup_sorted(u, blocks_.front().q);
        const double nd = static_cast<double>(plan_.n);
        double best = 0.0;
        for (const auto& b : blocks_) {
            const auto c = std::upper_bound(u.begin(), u.end(), b.q) - u.begin();
            best = std::max(best, std::abs(static_cast<double>(c) / nd - b.q));
        }
        return best;
    }

    double run(const TwoPoint&, TrialRng& rng, std::vector<double>&) const {
        const double nd = static_cast<double>(plan_.n);
        double best = 0.0;
        for (std::size_t i = 0; i < blocks_.size(); ++i) {
            const auto& b = blocks_[i];
            for (std::int64_t j = 0; j < b.count; ++j) {
                const double y = static_cast<double>(samplers_[i](rng.uniform()));
                best = std::max(best, std::abs(b.scale * y / nd - b.centre));
            }
        }
        return best;
    }

    double run(const CdfSup& t, TrialRng& rng, std::vector<double>& u) const {
        u.resize(static_cast<std::size_t>(plan_.n));
        for (auto& x : u) x = rng.uniform();
        std::sort(u.begin(), u.end());
        return cdf_sup_sorted(u, t.x0);
    }

    const SimPlan& plan_;
    std::vector<BlockPlan> blocks_;
    std::vector<BinomialSampler> samplers_;
    std::vector<BlockMaxSampler> maxers_;
};

} // namespace detail

/// Worker count: DEVBOUND_THREADS when set to a positive integer, otherwise
/// the hardware concurrency.
inline int default_workers() {
    if (const char* env = std::getenv("DEVBOUND_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<int>(std::min<long>(v, 1024));
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// One value per trial, in trial order.
inline std::vector<double> simulate_samples(const SimPlan& plan) {
    const detail::TrialKernel kernel(plan);
    const auto trials = static_cast<std::size_t>(plan.trials);
    std::vector<double> out(trials);
    int workers = plan.workers > 0 ? plan.workers : default_workers();
    workers = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(workers), trials));
    auto work = [&](std::size_t begin, std::size_t end) {
        std::vector<double> scratch;
        for (std::size_t i = begin; i < end; ++i) out[i] = kernel(i, scratch);
    };
    if (workers <= 1) {
        work(0, trials);
        return out;
    }
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const std::size_t chunk = (trials + static_cast<std::size_t>(workers) - 1) / static_cast<std::size_t>(workers);
    for (int w = 0; w < workers; ++w) {
        const std::size_t begin = static_cast<std::size_t>(w) * chunk;
        const std::size_t end = std::min(trials, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&, begin, end] {
            try {
                work(begin, end);
            } catch (...) {
                const std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
    return out;
}

inline SimEstimate simulate(const SimPlan& plan) {
    auto est = summarize(simulate_samples(plan), plan.levels, plan.thresholds);
    est.seed = plan.seed;
    return est;
}

} // namespace devbound
