#pragma once

#include <algorithm>
#include <functional>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "pam/common.hpp"

namespace pam {

// ---- Kolmogorov-Smirnov ----

// sup_x |F_n(x) - F(x)| for a cdf F; sample need not be sorted.
inline double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf) {
    if (sample.empty()) throw precondition_error("ks_statistic: empty sample");
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        d = std::max(d, std::abs(f - static_cast<double>(i) / n));
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
    }
    return d;
}

inline double ks_two_sample_statistic(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw precondition_error("ks_two_sample: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
    }
    return d;
}

// Kolmogorov asymptotic survival function Q(lambda) = 2 sum (-1)^{k-1} e^{-2k^2 lambda^2}
inline double kolmogorov_pvalue(double d, double n_eff) {
    const double lam = (std::sqrt(n_eff) + 0.12 + 0.11 / std::sqrt(n_eff)) * d;
    if (lam < 0.2) return 1.0;
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = 2.0 * (k % 2 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lam * lam);
        s += term;
        if (std::abs(term) < 1e-12) break;
    }
    return std::clamp(s, 0.0, 1.0);
}

inline double ks_pvalue_one_sample(double d, size_t n) {
    return kolmogorov_pvalue(d, static_cast<double>(n));
}

inline double ks_pvalue_two_sample(double d, size_t n, size_t m) {
    const double ne = static_cast<double>(n) * m / static_cast<double>(n + m);
    return kolmogorov_pvalue(d, ne);
}

// ---- chi-square goodness of fit ----

struct ChiSquare {
    double stat = 0;
    i64 dof = 0;
    double pvalue = 1;
};

// expected[i] must be positive; bins with expected < min_expected are pooled
// into their right neighbour (last bin pools left).
inline ChiSquare chi_square_gof(std::vector<double> observed, std::vector<double> expected,
                                double min_expected = 5.0, i64 dof_penalty = 0) {
    if (observed.size() != expected.size() || observed.empty())
        throw precondition_error("chi_square_gof: size mismatch");
    std::vector<double> obs, exp;
    double o_acc = 0.0, e_acc = 0.0;
    for (size_t i = 0; i < observed.size(); ++i) {
        o_acc += observed[i];
        e_acc += expected[i];
        if (e_acc >= min_expected) {
            obs.push_back(o_acc);
            exp.push_back(e_acc);
            o_acc = e_acc = 0.0;
        }
    }
    if (e_acc > 0.0) {
        if (exp.empty()) {
            obs.push_back(o_acc);
            exp.push_back(e_acc);
        } else {
            obs.back() += o_acc;
            exp.back() += e_acc;
        }
    }
    ChiSquare cs;
    cs.dof = static_cast<i64>(exp.size()) - 1 - dof_penalty;
    if (cs.dof < 1) throw precondition_error("chi_square_gof: not enough bins");
    for (size_t i = 0; i < exp.size(); ++i) {
        if (exp[i] <= 0.0) throw precondition_error("chi_square_gof: non-positive expected count");
        const double d = obs[i] - exp[i];
        cs.stat += d * d / exp[i];
    }
    cs.pvalue = boost::math::gamma_q(cs.dof / 2.0, cs.stat / 2.0);
    return cs;
}

// ---- Mann-Kendall trend ----

struct TrendTest {
    double s = 0;       // pooled Mann-Kendall S
    double var = 0;
    double z = 0;       // continuity-corrected normal score
    double pvalue = 1;  // one-sided, in the stated direction
};

// Pooled (regional) Mann-Kendall: each series is a short per-seed trajectory
// over the same ordered t grid; S statistics are summed across series, which
// keeps power even when each series has too few points for a test by itself.
// direction: +1 tests for an increasing trend, -1 for decreasing.
inline TrendTest mann_kendall_pooled(const std::vector<std::vector<double>>& series,
                                     int direction) {
    if (direction != 1 && direction != -1)
        throw precondition_error("mann_kendall_pooled: direction must be +-1");
    if (series.empty()) throw precondition_error("mann_kendall_pooled: no series");
    TrendTest tt;
    for (const auto& x : series) {
        const i64 n = static_cast<i64>(x.size());
        if (n < 2) throw precondition_error("mann_kendall_pooled: series too short");
        for (i64 i = 0; i < n; ++i)
            for (i64 j = i + 1; j < n; ++j) {
                if (x[j] > x[i]) tt.s += 1.0;
                else if (x[j] < x[i]) tt.s -= 1.0;
            }
        tt.var += n * (n - 1.0) * (2.0 * n + 5.0) / 18.0;
    }
    const double s_dir = direction * tt.s;
    if (tt.var <= 0.0) throw numerical_error("mann_kendall_pooled: zero variance");
    tt.z = (s_dir - (s_dir > 0 ? 1.0 : 0.0)) / std::sqrt(tt.var);
    tt.pvalue = 0.5 * std::erfc(tt.z / std::sqrt(2.0));
    return tt;
}

inline double median(std::vector<double> x) {
    if (x.empty()) throw precondition_error("median: empty");
    std::sort(x.begin(), x.end());
    const size_t n = x.size();
    return n % 2 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
}

inline double mean(const std::vector<double>& x) {
    if (x.empty()) throw precondition_error("mean: empty");
    double s = 0.0;
    for (double v : x) s += v;
    return s / x.size();
}

inline double variance(const std::vector<double>& x) {
    if (x.size() < 2) throw precondition_error("variance: need >= 2 points");
    const double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / (x.size() - 1);
}

}  // namespace pam
