#include "devbound/binomial.hpp"
#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <boost/math/distributions/binomial.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <iostream>

using namespace devbound;
using Catch::Approx;
using testsupport::Gen;
using testsupport::RatioFit;

namespace {

// 50-digit reference: double-precision references lose ~n ulps through 1 - p.
using Wide = boost::multiprecision::cpp_bin_float_50;

double boost_upper_tail(std::int64_t n, double p, std::int64_t k) {
    if (k <= 0) return 1.0;
    boost::math::binomial_distribution<Wide> d{Wide(n), Wide(p)};
    return static_cast<double>(boost::math::cdf(boost::math::complement(d, Wide(k - 1))));
}

double boost_pdf(std::int64_t n, double p, std::int64_t k) {
    boost::math::binomial_distribution<Wide> d{Wide(n), Wide(p)};
    return static_cast<double>(boost::math::pdf(d, Wide(k)));
}

} // namespace

TEST_CASE("log_upper_tail small enumerations") {
    const BinomialSpec s(2, 0.5);
    CHECK(log_upper_tail(s, 0).value == 0.0);
    CHECK(log_upper_tail(s, 1).value == Approx(std::log(0.75)).epsilon(1e-14));
    CHECK(log_upper_tail(s, 2).value == Approx(std::log(0.25)).epsilon(1e-14));
    CHECK(log_upper_tail(s, 3).value == kNegInf);
}

TEST_CASE("degenerate binomials have exact tails") {
    CHECK(log_upper_tail(BinomialSpec(5, 0.0), 1).value == kNegInf);
    CHECK(log_upper_tail(BinomialSpec(5, 0.0), 0).value == 0.0);
    CHECK(log_upper_tail(BinomialSpec(5, 1.0), 5).value == 0.0);
    CHECK(log_pmf(BinomialSpec(5, 1.0), 4) == kNegInf);
}

TEST_CASE("BinomialSpec validation") {
    CHECK_THROWS_AS(BinomialSpec(0, 0.5), ValidationError);
    CHECK_THROWS_AS(BinomialSpec(3, 1.5), ValidationError);
    CHECK_THROWS_AS(BinomialSpec(3, -0.1), ValidationError);
}

TEST_CASE("log_pmf matches an independent implementation") {
    Gen g(11);
    for (int i = 0; i < 400; ++i) {
        const auto n = static_cast<std::int64_t>(g.log_uniform(1, 1e6));
        const double p = g.log_uniform(1e-6, 0.999);
        const double sd = std::sqrt(n * p * (1 - p));
        const auto k = std::clamp<std::int64_t>(
            static_cast<std::int64_t>(std::llround(n * p + g.uniform(-6, 6) * (sd + 1))), 0, n);
        const double ref = boost_pdf(n, p, k);
        if (ref < 1e-290) continue;
        INFO("n=" << n << " p=" << p << " k=" << k);
        CHECK(testsupport::rel_close(std::exp(log_pmf(BinomialSpec(n, p), k)), ref, 1e-12));
    }
}

TEST_CASE("log_upper_tail relative accuracy up to n = 10^6") {
    Gen g(12);
    int checked = 0;
    for (int i = 0; i < 400; ++i) {
        const auto n = static_cast<std::int64_t>(g.log_uniform(1, 1e6));
        const double p = g.log_uniform(1e-6, 0.999);
        const double sd = std::sqrt(n * p * (1 - p));
        const auto k = std::clamp<std::int64_t>(
            static_cast<std::int64_t>(std::llround(n * p + g.uniform(-8, 8) * (sd + 1))), 0, n + 1);
        const double ref = boost_upper_tail(n, p, k);
        if (ref < 1e-290) continue;
        ++checked;
        INFO("n=" << n << " p=" << p << " k=" << k);
        CHECK(testsupport::rel_close(std::exp(log_upper_tail(BinomialSpec(n, p), k).value), ref, 1e-12));
    }
    CHECK(checked > 200);
}

TEST_CASE("log_upper_tail reaches far tails without underflow") {
    const BinomialSpec s(100000, 0.01);
    const double lt = log_upper_tail(s, 50000).value;
    CHECK(std::isfinite(lt));
    CHECK(lt < -1e5);
    // The leading term dominates: ln P(Y >= k) ~ ln P(Y = k) + O(1).
    CHECK(lt - log_pmf(s, 50000) == Approx(0.0).margin(0.02));
}

TEST_CASE("log_upper_tail is non-increasing with exact endpoints") {
    Gen g(13);
    for (int i = 0; i < 40; ++i) {
        const auto n = g.integer(1, 300);
        const BinomialSpec s(n, g.uniform(0.0, 1.0));
        CHECK(std::exp(log_upper_tail(s, 0).value) == 1.0);
        CHECK(std::exp(log_upper_tail(s, n + 1).value) == 0.0);
        double prev = 0.0;
        for (std::int64_t k = 0; k <= n + 1; ++k) {
            const double v = log_upper_tail(s, k).value;
            CHECK(v <= prev + 1e-15);
            prev = v;
        }
    }
}

TEST_CASE("TailTable agrees with the direct tails") {
    Gen g(14);
    for (int i = 0; i < 20; ++i) {
        const auto n = g.integer(1, 2000);
        const BinomialSpec s(n, g.log_uniform(1e-5, 0.5));
        const TailTable t(s);
        for (std::int64_t k = 0; k <= n + 1; k += std::max<std::int64_t>(1, n / 50)) {
            const double a = log_upper_tail(s, k).value;
            const double b = t.log_ge(k);
            if (a == kNegInf) {
                CHECK(b == kNegInf);
                continue;
            }
            CHECK(b == Approx(a).epsilon(1e-11).margin(1e-13));
            const double lo = log_lower_tail(s, k).value;
            if (lo != kNegInf) CHECK(t.log_le(k) == Approx(lo).epsilon(1e-11).margin(1e-13));
        }
    }
}

TEST_CASE("kl_bernoulli examples and domain") {
    CHECK(kl_bernoulli(0.3, 0.3) == 0.0);
    CHECK(kl_bernoulli(1.0, 0.25) == Approx(std::log(4.0)).epsilon(1e-15));
    // 0.5 ln 2 + 0.5 ln(2/3)
    CHECK(kl_bernoulli(0.5, 0.25) == Approx(0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0)).epsilon(1e-14));
    CHECK(kl_bernoulli(0.5, 0.25) == Approx(0.143841).epsilon(1e-5));
    CHECK_THROWS_AS(kl_bernoulli(0.5, 0.0), DomainError);
    CHECK(kl_bernoulli(0.0, 0.0) == 0.0);
}

TEST_CASE("analytic_tail_bounds examples") {
    ConcentrationConstants c;
    auto b = analytic_tail_bounds(BinomialSpec(10, 0.2), 0.2, c);
    CHECK(b.chernoff.value == Approx(0.0).margin(1e-15));
    b = analytic_tail_bounds(BinomialSpec(100, 0.25), 0.5, c);
    CHECK(b.chernoff.value == Approx(-100 * kl_bernoulli(0.5, 0.25)).epsilon(1e-13));
    CHECK(b.chernoff.value == Approx(-14.3841).epsilon(1e-5));
    REQUIRE(b.anti.has_value());
    CHECK(b.anti->value == Approx(std::log(0.125) - 4.0 * 14.38410362).epsilon(1e-7));
    // q below 1/n: outside the anti-concentration window.
    b = analytic_tail_bounds(BinomialSpec(10, 0.02), 0.05, c);
    CHECK_FALSE(b.anti.has_value());
    // q above (1+p)/2: outside the window too.
    b = analytic_tail_bounds(BinomialSpec(10, 0.2), 0.7, c);
    CHECK_FALSE(b.anti.has_value());
    CHECK_THROWS_AS(analytic_tail_bounds(BinomialSpec(10, 0.2), 0.05, c), DomainError);
}

TEST_CASE("Chernoff bound dominates the exact tail") {
    Gen g(15);
    for (int i = 0; i < 300; ++i) {
        const auto n = g.integer(1, 5000);
        const double p = g.log_uniform(1e-4, 0.5);
        const double q = g.uniform(p, 1.0);
        const BinomialSpec s(n, p);
        const auto k = static_cast<std::int64_t>(std::ceil(n * q));
        INFO("n=" << n << " p=" << p << " q=" << q);
        CHECK(log_upper_tail(s, k).value <= -n * kl_bernoulli(q, p) + 1e-9);
        CHECK(log_upper_tail(s, k).value <= analytic_tail_bounds(s, q).bennett.value + 1e-9);
    }
}

TEST_CASE("KL sandwich on a 50x50 grid") {
    int large = 0;
    int moderate = 0;
    for (int i = 1; i <= 50; ++i) {
        for (int j = 1; j <= 50; ++j) {
            {
                const double q = 0.25 * i / 50.0;
                const double e = 0.25 * j / 50.0;
                if (e >= 8 * q) {
                    ++large;
                    const double qh = q * bennett_h(e / q);
                    const double d = kl_bernoulli(q + e, q);
                    INFO("q=" << q << " eps=" << e);
                    CHECK(e / 2 * std::log(e / q) <= qh * (1 + 1e-12));
                    CHECK(qh <= d * (1 + 1e-12));
                    CHECK(d <= 2 * e * std::log(e / q) * (1 + 1e-12));
                }
            }
            {
                const double q = 0.5 * i / 51.0;
                const double e = 0.5 * j / 51.0;
                if (q + e <= 0.5) {
                    ++moderate;
                    const double qh = q * bennett_h(e / q);
                    const double d = kl_bernoulli(q + e, q);
                    INFO("q=" << q << " eps=" << e);
                    CHECK(e * e / (2 * (q + e)) <= qh * (1 + 1e-12));
                    CHECK(qh <= d * (1 + 1e-12));
                    CHECK(d <= e * e / q * (1 + 1e-12));
                }
            }
        }
    }
    CHECK(large > 20);
    CHECK(moderate > 1000);
}

TEST_CASE("h-comparison q h(eps/q) >= D(q + eps/2 || q)") {
    for (int i = 1; i <= 50; ++i)
        for (int j = 0; j <= 50; ++j) {
            const double q = 0.5 * i / 50.0;
            const double e = 0.5 * j / 50.0;
            if (q + e / 2 >= 1.0) continue;
            INFO("q=" << q << " eps=" << e);
            CHECK(q * bennett_h(e / q) >= kl_bernoulli(q + e / 2, q) * (1 - 1e-12) - 1e-300);
        }
}

TEST_CASE("eps -> D(q+eps || q) is superlinear") {
    for (int i = 1; i <= 30; ++i)
        for (int j = 1; j <= 30; ++j)
            for (double k : {1.0, 1.5, 2.0, 3.0, 7.0}) {
                const double q = 0.5 * i / 31.0;
                const double e = 0.5 * j / 31.0 / k;
                if (q + k * e > 1.0) continue;
                CHECK(kl_bernoulli(q + k * e, q) >= k * kl_bernoulli(q + e, q) * (1 - 1e-12));
            }
}

TEST_CASE("abs_central_moment_exact examples and brute force") {
    CHECK(abs_central_moment_exact(BinomialSpec(2, 0.5), 1.0) == Approx(0.5).epsilon(1e-14));
    CHECK(abs_central_moment_exact(BinomialSpec(1, 0.5), 2.0) == Approx(0.25).epsilon(1e-14));
    CHECK(abs_central_moment_exact(BinomialSpec(17, 0.0), 3.0) == 0.0);
    // Variance identity.
    CHECK(abs_central_moment_exact(BinomialSpec(1000, 0.3), 2.0) == Approx(1000 * 0.3 * 0.7).epsilon(1e-12));
    Gen g(16);
    for (int i = 0; i < 30; ++i) {
        const auto n = g.integer(1, 200);
        const double p = g.uniform(0.0, 1.0);
        const double q = g.uniform(1.0, 5.0);
        double ref = 0.0;
        for (std::int64_t k = 0; k <= n; ++k) ref += boost_pdf(n, p, k) * std::pow(std::abs(k - n * p), q);
        CHECK(abs_central_moment_exact(BinomialSpec(n, p), q) == Approx(ref).epsilon(1e-11));
    }
    CHECK_THROWS_AS(abs_central_moment_exact(BinomialSpec(2'000'000, 0.5), 2.0), ResourceError);
    CHECK_THROWS_AS(abs_central_moment_exact(BinomialSpec(5, 0.5), 0.5), DomainError);
}

TEST_CASE("psi_q regimes") {
    auto r = psi_q(BinomialSpec(100, 0.5), 2.0);
    CHECK(r.value == Approx(100.0));
    CHECK(r.regime == MomentRegime::subgaussian);
    r = psi_q(BinomialSpec(1000, 1e-6), 2.0);
    CHECK(r.value == Approx(1e-3));
    CHECK(r.regime == MomentRegime::poisson);
    // p = 0.001 sits below q/(n e^q) = 0.0027, hence Poisson.
    r = psi_q(BinomialSpec(100, 0.001), 2.0);
    CHECK(r.regime == MomentRegime::poisson);
    CHECK(r.value == Approx(0.1));
    r = psi_q(BinomialSpec(100, 0.004), 2.0);
    CHECK(r.regime == MomentRegime::loggamma);
    CHECK(r.value == Approx(std::pow(2.0 / std::log(5.0), 2.0)).epsilon(1e-14));
    // Ties go to the larger-p regime.
    CHECK(psi_q(BinomialSpec(100, 0.01), 2.0).regime == MomentRegime::subgaussian);
    CHECK(psi_q(BinomialSpec(100, 2.0 / (100 * std::exp(2.0))), 2.0).regime == MomentRegime::loggamma);
    CHECK_THROWS_AS(psi_q(BinomialSpec(10, 0.6), 2.0), ValidationError);
}

TEST_CASE("psi_q sandwiches the exact central moment") {
    for (double q : {1.0, 2.0, 4.0}) {
        RatioFit all;
        RatioFit per[3];
        for (std::int64_t n : {10, 100, 1000, 10000}) {
            const double nd = static_cast<double>(n);
            const double lo = q / (nd * std::exp(q));
            const double mid = q / (2 * nd);
            std::vector<double> ps = {lo * 1e-3, lo * 0.1, lo * 0.9};
            for (int i = 0; i <= 6; ++i) ps.push_back(lo * std::pow(mid / lo, i / 6.0));
            for (double f : {1.0, 3.0, 10.0, 100.0, 1000.0}) ps.push_back(std::min(0.5, mid * f));
            for (double p : ps) {
                const BinomialSpec s(n, p);
                const auto psi = psi_q(s, q);
                const double ratio = abs_central_moment_exact(s, q) / psi.value;
                all.add(ratio);
                per[static_cast<int>(psi.regime)].add(ratio);
            }
        }
        std::cout << "psi_q fit q=" << q << ": " << all.str() << " | subgaussian " << per[0].str() << " | loggamma "
                  << per[1].str() << " | poisson " << per[2].str() << '\n';
        CHECK(all.spread() <= std::exp(3 * q));
    }
}

TEST_CASE("binom_quantile examples and Galois property") {
    const BinomialSpec s(2, 0.5);
    CHECK(binom_quantile(s, {0.0}) == 0);
    CHECK(binom_quantile(s, {std::log(0.0625)}) == 3);
    CHECK(binom_quantile(s, {std::log(0.5)}) == 2);
    Gen g(17);
    for (int i = 0; i < 200; ++i) {
        const auto n = g.integer(1, 3000);
        const BinomialSpec sp(n, g.log_uniform(1e-5, 0.5));
        const double t = -g.log_uniform(1e-6, 500.0);
        const auto kq = binom_quantile(sp, {t});
        for (std::int64_t k : {kq - 2, kq - 1, kq, kq + 1}) {
            if (k < 0 || k > n + 1) continue;
            CHECK((log_upper_tail(sp, k).value <= t) == (k >= kq));
        }
    }
}
