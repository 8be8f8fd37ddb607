#include <catch2/catch_amalgamated.hpp>

#include "pam/experiments.hpp"

using namespace pam;

TEST_CASE("KS closed-form cases") {
    std::vector<double> u{0.1, 0.4, 0.7};
    REQUIRE(ks_two_sample_statistic(u, u) == 0.0);
    // empirical cdf of a single point vs uniform
    const double d = ks_statistic({0.5}, [](double x) { return std::clamp(x, 0.0, 1.0); });
    REQUIRE(d == Catch::Approx(0.5));
    REQUIRE(kolmogorov_pvalue(0.0, 100) == 1.0);
    REQUIRE(ks_pvalue_one_sample(0.5, 1000) < 1e-6);
    REQUIRE_THROWS_AS(ks_two_sample_statistic({}, u), precondition_error);
}

TEST_CASE("KS accepts matched and rejects mismatched samples") {
    std::vector<double> a, b, c;
    for (i64 i = 0; i < 4000; ++i) {
        a.push_back(CounterRng(7, static_cast<u64>(i)).normal());
        b.push_back(CounterRng(8, static_cast<u64>(i)).normal());
        c.push_back(CounterRng(9, static_cast<u64>(i)).normal() + 0.5);
    }
    REQUIRE(ks_pvalue_two_sample(ks_two_sample_statistic(a, b), a.size(), b.size()) > 0.01);
    REQUIRE(ks_pvalue_two_sample(ks_two_sample_statistic(a, c), a.size(), c.size()) < 1e-6);
}

TEST_CASE("chi-square closed forms and pooling") {
    auto cs = chi_square_gof({10, 10, 10}, {10, 10, 10});
    REQUIRE(cs.stat == 0.0);
    REQUIRE(cs.pvalue == Catch::Approx(1.0));
    REQUIRE(cs.dof == 2);
    // bins below the pooling threshold merge rightward
    auto cs2 = chi_square_gof({8, 1, 1}, {8.0, 1.0, 1.0}, 2.0);
    REQUIRE(cs2.dof == 1);
    REQUIRE(cs2.stat == 0.0);
    REQUIRE_THROWS_AS(chi_square_gof({1}, {1, 2}), precondition_error);
}

TEST_CASE("pooled Mann-Kendall detects direction") {
    std::vector<std::vector<double>> inc(60, {1.0, 2.0, 3.0});
    auto up = mann_kendall_pooled(inc, 1);
    REQUIRE(up.s == 180.0);
    REQUIRE(up.pvalue < 1e-6);
    auto wrong_dir = mann_kendall_pooled(inc, -1);
    REQUIRE(wrong_dir.pvalue > 0.999);
    // a 3-point series alone cannot be significant; pooling is what adds power
    std::vector<std::vector<double>> one(1, {1.0, 2.0, 3.0});
    REQUIRE(mann_kendall_pooled(one, 1).pvalue > 0.05);
    REQUIRE_THROWS_AS(mann_kendall_pooled({}, 1), precondition_error);
    REQUIRE_THROWS_AS(mann_kendall_pooled(inc, 2), precondition_error);
}

TEST_CASE("median, mean, variance helpers") {
    REQUIRE(median({3.0, 1.0, 2.0}) == 2.0);
    REQUIRE(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
    REQUIRE(mean({1.0, 2.0, 3.0}) == 2.0);
    REQUIRE(variance({1.0, 2.0, 3.0}) == 1.0);
}

TEST_CASE("counter rng moments") {
    CounterRng rng(11, 0);
    double m = 0, m2 = 0;
    const i64 n = 50000;
    for (i64 i = 0; i < n; ++i) {
        const double x = rng.normal();
        m += x;
        m2 += x * x;
    }
    REQUIRE(std::abs(m / n) < 0.02);
    REQUIRE(m2 / n == Catch::Approx(1.0).margin(0.03));
    double pm = 0;
    for (i64 i = 0; i < 20000; ++i) pm += rng.poisson(1.0);
    REQUIRE(pm / 20000 == Catch::Approx(1.0).margin(4.0 * std::sqrt(1.0 / 20000)));
    double pm2 = 0;
    for (i64 i = 0; i < 5000; ++i) pm2 += rng.poisson(100.0);
    REQUIRE(pm2 / 5000 == Catch::Approx(100.0).margin(4.0 * std::sqrt(100.0 / 5000)));
}

TEST_CASE("limit density integrates to one") {
    REQUIRE(limit_density_normalization(3.0) == Catch::Approx(1.0).margin(1e-6));
    REQUIRE(limit_density_normalization(2.0) == Catch::Approx(1.0).margin(1e-6));
    REQUIRE(limit_density(1.0, 0.4, 3.0) == 0.0);  // below the wedge
    REQUIRE(limit_density(-0.1, 1.0, 3.0) == 0.0);
}

TEST_CASE("limit samples live on the support") {
    auto samples = sample_limit_B(3.0, 2000, 42);
    REQUIRE(samples.size() == 2000);
    for (const auto& s : samples) {
        REQUIRE(s.b > 0.0);
        REQUIRE(s.x1 > 0.0);
        REQUIRE(s.y1 > 0.5 * s.x1);  // rho = 1/(alpha-1) = 1/2
        REQUIRE(s.b == Catch::Approx(std::pow(s.x1, 1.0 / 3.0) / s.y1));
    }
    REQUIRE_THROWS_AS(sample_limit_B(1.5, 10, 1), precondition_error);
}

TEST_CASE("limit sampler matches the analytic density on a grid") {
    const double alpha = 3.0;
    const i64 n = 20000;
    auto samples = sample_limit_B(alpha, n, 2024);
    // 6x6 grid over [0, 1.8] x [0.5, 2.3] plus an overflow cell
    const int nb = 6;
    const double x_lo = 0.0, x_hi = 1.8, y_lo = 0.5, y_hi = 2.3;
    std::vector<double> obs(nb * nb + 1, 0.0), expd(nb * nb + 1, 0.0);
    const double dx = (x_hi - x_lo) / nb, dy = (y_hi - y_lo) / nb;
    for (const auto& s : samples) {
        const int ix = static_cast<int>((s.x1 - x_lo) / dx);
        const int iy = static_cast<int>((s.y1 - y_lo) / dy);
        if (s.x1 >= x_lo && s.x1 < x_hi && s.y1 >= y_lo && s.y1 < y_hi)
            obs[static_cast<size_t>(ix * nb + iy)] += 1.0;
        else
            obs.back() += 1.0;
    }
    double covered = 0.0;
    for (int ix = 0; ix < nb; ++ix)
        for (int iy = 0; iy < nb; ++iy) {
            const double mass = limit_density_box_mass(x_lo + ix * dx, x_lo + (ix + 1) * dx,
                                                       y_lo + iy * dy, y_lo + (iy + 1) * dy, alpha);
            expd[static_cast<size_t>(ix * nb + iy)] = n * mass;
            covered += mass;
        }
    expd.back() = n * (1.0 - covered);
    auto cs = chi_square_gof(obs, expd);
    REQUIRE(cs.pvalue > 0.001);
}

TEST_CASE("box means and invalid boxes") {
    // [0,1] x [c, inf): mu = c^{-alpha}
    REQUIRE(box_mean_dup({0.0, 1.0, 2.0, kInf}, 3.0) == Catch::Approx(std::pow(2.0, -3.0)));
    // critical marks at alpha = 3, beta = 1: mu = c^{-3} on [0,1] x [c, inf)
    REQUIRE(box_mean_nondup({0.0, 1.0, 2.0, kInf}, 3.0, 1.0) == Catch::Approx(std::pow(2.0, -3.0)));
    REQUIRE_THROWS_AS(box_mean_dup({1.0, 0.5, 1.0, kInf}, 3.0), precondition_error);
    REQUIRE_THROWS_AS(box_mean_dup({0.0, 1.0, 0.0, kInf}, 3.0), precondition_error);
}

TEST_CASE("point process box counts match the Poisson law") {
    auto profile = RegimeProfile::critical(3.0, 1.0);
    const std::vector<Box> boxes{{0.0, 1.0, 1.0, 2.0}, {0.0, 1.0, 2.0, kInf}};
    auto v = point_process_suite(profile, 2000.0, 250, boxes, 555);
    REQUIRE(v.pass);
    // non-duplicated marks under the critical rescaling
    const std::vector<Box> nboxes{{0.0, 1.0, 1.0, kInf}, {0.0, 1.0, 2.0, kInf}};
    auto v2 = point_process_suite(profile, 2000.0, 250, nboxes, 556, true, 1.0);
    REQUIRE(v2.pass);
    // box touching the y = rho x boundary is rejected
    REQUIRE_THROWS_AS(
        point_process_suite(profile, 2000.0, 250, {{0.0, 2.0, 1.0, kInf}}, 1, false),
        precondition_error);
}
