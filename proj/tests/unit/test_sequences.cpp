#include "devbound/sequences.hpp"
#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace devbound;
using Catch::Approx;
using testsupport::Gen;

namespace {

std::vector<ProbSeq> sample_families() {
    return {
        build(StepFamily{std::log(53.0), 0.25}),
        build(StepFamily{std::log(3.0), 0.1}),
        build(ExplicitFamily{{0.5, 0.3, 0.3, 0.1, 0.0, 0.0}}),
        build(BlocksFamily{{{std::log(3.0), 0.4}, {0.0, 0.2}, {std::log(10.0), 0.01}}}),
        build(PowerLawFamily{1.0, 1.0, std::nullopt}),
        build(PowerLawFamily{3.0, 0.7, 5000}),
        build(OpenProblemFamily{100, 2.0}),
        build(OpenProblemFamily{10000, 9.0}),
        build(PoissonianFamily{0.5, 50, 10}),
    };
}

} // namespace

TEST_CASE("build examples") {
    const auto step = build(StepFamily{std::log(53.0), 0.25});
    CHECK(value_at(step, 1) == 0.25);
    CHECK(value_at(step, 53) == 0.25);
    CHECK(value_at(step, 54) == 0.0);

    const auto op = build(OpenProblemFamily{100, 2.0});
    const auto v = exact_view(op);
    REQUIRE(v.blocks.size() == 1);
    CHECK(v.blocks[0].q == Approx(0.05));
    CHECK(v.blocks[0].log_count == Approx(std::log(std::floor(std::exp(20.0)) - 1.0)).epsilon(1e-15));
    CHECK(v.blocks[0].log_count == Approx(20.0).epsilon(1e-6));

    CHECK_THROWS_AS(build(ExplicitFamily{{0.6, 0.1}}), ValidationError);
    CHECK_THROWS_AS(build(ExplicitFamily{{0.1, 0.2}}), ValidationError);
    CHECK_THROWS_AS(build(BlocksFamily{{{0.0, 0.1}, {0.0, 0.2}}}), ValidationError);
    CHECK_THROWS_AS(build(OpenProblemFamily{100, 11.0}), ValidationError);
    CHECK_THROWS_AS(build(OpenProblemFamily{100, 1.0}), ValidationError);
    CHECK_THROWS_AS(build(PoissonianFamily{0.7, 10, 10}), ValidationError);
    CHECK_THROWS_AS(build(PowerLawFamily{1.0, 0.0, std::nullopt}), ValidationError);
    CHECK_THROWS_AS(build(StepFamily{-1.0, 0.1}), ValidationError);
}

TEST_CASE("value_at examples") {
    const auto s = build(StepFamily{std::log(3.0), 0.1});
    CHECK(value_at(s, 3) == 0.1);
    CHECK(value_at(s, 4) == 0.0);
    const auto pl = build(PowerLawFamily{1.0, 1.0, std::nullopt});
    CHECK(value_at(pl, 7) == Approx(1.0 / 7.0).epsilon(1e-15));
    CHECK(value_at(pl, 1) == 0.5);
    const auto capped = build(PowerLawFamily{1.0, 1.0, 10});
    CHECK(value_at(capped, 10) == Approx(0.1));
    CHECK(value_at(capped, 11) == 0.0);
    const auto pois = build(PoissonianFamily{0.5, 50, 10});
    CHECK(value_at(pois, 2) == Approx(0.5 / 200.0));
    CHECK(value_at(pois, 11) == 0.0);
}

TEST_CASE("value_at is non-increasing for every family") {
    for (const auto& s : sample_families()) {
        double prev = 1.0;
        for (std::int64_t j = 1; j <= 10000; ++j) {
            const double v = value_at(s, j);
            INFO(label(s) << " j=" << j);
            CHECK(v <= prev);
            CHECK(v >= 0.0);
            CHECK(v <= 0.5);
            prev = v;
        }
    }
}

TEST_CASE("blocks examples") {
    const auto step = build(StepFamily{20.0, 0.05});
    const auto env = blocks(step, TruncationPolicy{10});
    CHECK(env.exact);
    REQUIRE(env.upper.blocks.size() == 1);
    CHECK(env.upper.blocks[0].log_count == 20.0);
    CHECK(env.upper.blocks[0].q == 0.05);
    CHECK_FALSE(env.upper.blocks[0].count.has_value());

    const auto ex = exact_view(build(ExplicitFamily{{0.3, 0.3, 0.1}}));
    REQUIRE(ex.blocks.size() == 2);
    CHECK(ex.blocks[0].log_count == Approx(std::log(2.0)));
    CHECK(ex.blocks[0].q == 0.3);
    CHECK(ex.blocks[0].count == 2);
    CHECK(ex.blocks[1].log_count == 0.0);
    CHECK(ex.blocks[1].q == 0.1);
    CHECK(ex.blocks[1].end_log_index == Approx(std::log(4.0)));
}

TEST_CASE("block view round-trips non power-law families") {
    for (const auto& s : sample_families()) {
        if (is_power_law(s)) continue;
        const auto v = exact_view(s);
        if (!v.integer_counts()) continue;
        std::int64_t j = 1;
        std::int64_t mismatches = 0;
        for (const auto& b : v.blocks) {
            // Check the block edges and a bounded prefix.
            const std::int64_t c = *b.count;
            for (std::int64_t i = 0; i < c; i = (i < 1000 || i + 1 == c) ? i + 1 : c - 1)
                mismatches += value_at(s, j + i) != b.q;
            j += c;
        }
        INFO(label(s));
        CHECK(mismatches == 0);
        CHECK(value_at(s, j) == 0.0);
    }
}

TEST_CASE("power-law envelopes bracket the sequence") {
    const auto pl = build(PowerLawFamily{1.0, 2.0, std::nullopt});
    TruncationPolicy pol{10, 1e-6};
    const auto env = blocks(pl, pol);
    CHECK_FALSE(env.exact);
    CHECK(env.tail_success_bound <= 1e-6);
    REQUIRE(env.upper.blocks.size() == env.lower.blocks.size());
    std::int64_t j = 1;
    std::int64_t violations = 0;
    for (std::size_t b = 0; b < env.upper.blocks.size(); ++b) {
        const auto& u = env.upper.blocks[b];
        const auto& l = env.lower.blocks[b];
        CHECK(u.q >= l.q);
        CHECK(u.q <= 4.0 * l.q);
        const auto c = *u.count;
        for (std::int64_t i = 0; i < std::min<std::int64_t>(c, 5000); ++i) {
            const double v = value_at(pl, j + i);
            violations += (v > u.q) + (v < l.q);
        }
        j += c;
    }
    CHECK(violations == 0);
}

TEST_CASE("head_mass examples") {
    auto h = head_mass(build(StepFamily{std::log(10.0), 0.1}), 10, 5);
    CHECK(h.head_sum == Approx(1.0));
    CHECK(h.tail_success_bound == 0.0);
    h = head_mass(build(PowerLawFamily{1.0, 2.0, std::nullopt}), 100, 10);
    CHECK(h.tail_success_bound <= 0.1 + 1e-15);
    CHECK(h.tail_success_bound >= 10 * (1.0 / 101.0));  // integral from below
    CHECK_FALSE(h.diverges);
    h = head_mass(build(PowerLawFamily{1.0, 1.0, std::nullopt}), 100, 10);
    CHECK(h.diverges);
}

TEST_CASE("head_mass tail bound dominates the exact tail success probability") {
    Gen g(5);
    for (int it = 0; it < 20; ++it) {
        const double a = g.log_uniform(0.01, 2.0);
        const double b = g.uniform(1.1, 3.0);
        const std::int64_t cap = g.integer(100, 200000);
        const auto pl = build(PowerLawFamily{a, b, cap});
        const std::int64_t n = g.integer(1, 50);
        const double J_cut = static_cast<double>(g.integer(1, 99));
        const auto h = head_mass(pl, J_cut, n);
        double log_none = 0.0;
        for (std::int64_t j = static_cast<std::int64_t>(J_cut) + 1; j <= cap; ++j)
            log_none += std::log1p(-value_at(pl, j));
        const double p_any = -std::expm1(static_cast<double>(n) * log_none);
        INFO("a=" << a << " b=" << b << " n=" << n << " J_cut=" << J_cut);
        CHECK(p_any <= h.tail_success_bound);
    }
}

TEST_CASE("seminorm examples") {
    CHECK(seminorm(build(StepFamily{std::log(4.0), 0.5}), 1.0).value == Approx(2.0));
    const auto harm = seminorm(build(PowerLawFamily{1.0, 1.0, std::nullopt}), 1.0);
    CHECK(harm.diverges);
    CHECK(std::isinf(harm.value));
    // p(1) = p(2) = 1/2 after capping, then 1/j.
    const double pi = 3.14159265358979323846;
    CHECK(seminorm(build(PowerLawFamily{1.0, 1.0, std::nullopt}), 2.0).value ==
          Approx(pi * pi / 6.0 - 0.75).epsilon(1e-12));
    // Capped power law equals its direct sum.
    const auto capped = build(PowerLawFamily{2.0, 1.3, 30000});
    double ref = 0.0;
    for (std::int64_t j = 30000; j >= 1; --j) ref += std::pow(value_at(capped, j), 1.7);
    CHECK(seminorm(capped, 1.7).value == Approx(ref).epsilon(1e-12));
}

TEST_CASE("open problem family meets the last-index inequality") {
    for (std::int64_t n : {100, 1000, 10000}) {
        for (double K : {2.0, 4.0, std::max(4.0, std::log(static_cast<double>(n)))}) {
            const auto v = exact_view(build(OpenProblemFamily{n, K}));
            const double q = v.blocks[0].q;
            const double lnJp1 = v.blocks[0].end_log_index;
            CHECK(lnJp1 <= K * std::sqrt(static_cast<double>(n)) + 1e-9);
            CHECK(q >= lnJp1 / (K * K * n) * (1 - 1e-12));
            CHECK(q >= 1.0 / (2 * K * K * n));
        }
    }
}

TEST_CASE("log-count blocks keep cumulative indices consistent") {
    Gen g(21);
    for (int i = 0; i < 50; ++i) {
        BlockView v;
        double q = 0.5;
        double cum = 0.0;
        const int nb = static_cast<int>(g.integer(1, 6));
        for (int b = 0; b < nb; ++b) {
            const double lc = g.uniform(0.0, 30.0);
            v.push(lc, q);
            cum += std::exp(lc);
            CHECK(v.blocks.back().end_log_index == Approx(std::log1p(cum)).epsilon(1e-10));
            q *= g.uniform(0.1, 0.9);
        }
    }
    BlockView huge;
    huge.push(1e4, 0.1);
    huge.push(1e4, 0.05);
    CHECK(huge.blocks.back().end_log_index == Approx(1e4 + std::log(2.0)).epsilon(1e-14));
}
