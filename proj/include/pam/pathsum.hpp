#pragma once

#include <functional>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "pam/potential.hpp"

namespace pam {

struct GeometricPath {
    std::vector<i64> sites;  // y_0 .. y_l, nearest-neighbour steps
    i64 length() const { return static_cast<i64>(sites.size()) - 1; }
};

struct PathContribution {
    GeometricPath path;
    double log_value = -kInf;  // log U(t, y)
};

// log I_n(t; c_0..c_n): the divided difference of s -> exp(t s) over the
// nodes, which equals the simplex integral e^{t c_n} int exp(sum x_i (c_i -
// c_n)) dx. Evaluated as the (0, n) entry of exp(t Z) for the upper
// bidiagonal Z = bidiag(c_i; 1) (Opitz), computed by Taylor with
// scaling-and-squaring after a diagonal shift that makes every entry
// non-negative: repeated or clustered nodes need no special casing and there
// is no cancellation.
inline double simplex_integral(double t, const std::vector<double>& c) {
    if (!(t > 0.0)) throw std::domain_error("simplex_integral: t must be positive");
    if (c.empty()) throw precondition_error("simplex_integral: need at least one node");
    const i64 n = static_cast<i64>(c.size());
    if (n > 64) throw numerical_error("simplex_integral: too many nodes");
    double cmax = -kInf;
    for (double x : c) cmax = std::max(cmax, x);
    if (n == 1) return t * cmax;

    // B = t (Z - cmax I): diag <= 0, superdiag t > 0
    double norm1 = 0.0;
    for (i64 i = 0; i < n; ++i) norm1 = std::max(norm1, t * (cmax - c[i]) + t);
    int sq = 0;
    while (norm1 / std::pow(2.0, sq) > 0.5) ++sq;
    const double scale = std::pow(2.0, sq);
    double dmin = 0.0;
    for (i64 i = 0; i < n; ++i) dmin = std::min(dmin, t * (c[i] - cmax) / scale);
    const double m = -dmin;

    std::vector<double> M(n * n, 0.0), E(n * n, 0.0), term(n * n, 0.0), nxt(n * n, 0.0);
    for (i64 i = 0; i < n; ++i) {
        M[i * n + i] = t * (c[i] - cmax) / scale + m;
        if (i + 1 < n) M[i * n + i + 1] = t / scale;
        E[i * n + i] = term[i * n + i] = 1.0;
    }
    for (int k = 1; k <= 80; ++k) {
        double tmax = 0.0;
        for (i64 i = 0; i < n; ++i)
            for (i64 j = i; j < n; ++j) {
                double s = term[i * n + j] * M[j * n + j];
                if (j > i) s += term[i * n + j - 1] * M[(j - 1) * n + j];
                nxt[i * n + j] = s / k;
                tmax = std::max(tmax, s / k);
            }
        std::swap(term, nxt);
        for (i64 i = 0; i < n * n; ++i) E[i] += term[i];
        if (tmax < 1e-22) break;
    }
    double log_factor = -m;
    for (int s = 0; s < sq; ++s) {
        double emax = 0.0;
        for (i64 i = 0; i < n; ++i)
            for (i64 j = i; j < n; ++j) {
                double acc = 0.0;
                for (i64 l = i; l <= j; ++l) acc += E[i * n + l] * E[l * n + j];
                nxt[i * n + j] = acc;
                emax = std::max(emax, acc);
            }
        if (emax <= 0.0) throw numerical_error("simplex_integral: underflow while squaring");
        for (i64 i = 0; i < n; ++i)
            for (i64 j = i; j < n; ++j) E[i * n + j] = nxt[i * n + j] / emax;
        log_factor = 2.0 * log_factor + std::log(emax);
    }
    const double entry = E[0 * n + (n - 1)];
    if (!(entry > 0.0)) throw numerical_error("simplex_integral: non-positive divided difference");
    return t * cmax + log_factor + std::log(entry);
}

inline PathContribution path_contribution(const PotentialField& field, double t,
                                          const GeometricPath& path) {
    if (path.sites.empty()) throw precondition_error("path_contribution: empty path");
    std::vector<double> c;
    c.reserve(path.sites.size());
    for (size_t i = 0; i < path.sites.size(); ++i) {
        if (i > 0 && std::llabs(path.sites[i] - path.sites[i - 1]) != 1)
            throw precondition_error("path_contribution: steps must be nearest-neighbour");
        c.push_back(field.xi(path.sites[i]));
    }
    PathContribution pc;
    pc.path = path;
    pc.log_value = -2.0 * t + simplex_integral(t, c);
    return pc;
}

struct TruncatedPathSum {
    double log_u_lower = -kInf;
    double tail_bound = 0.0;   // exp(t xi_max) * P(Poisson(2t) > max_len)
    double log_tail = -kInf;
    i64 paths = 0;
};

// Enumerate all geometric paths 0 -> target_z of length <= max_len inside the
// window and log-sum-exp their contributions. Enumeration is depth-first with
// a fixed step order (-1 before +1), so the accumulation order — and hence
// the result — is deterministic.
inline TruncatedPathSum truncated_path_sum(
    const PotentialField& field, double t, i64 target_z, i64 max_len, i64 path_cap = 10'000'000,
    const std::function<void(const std::vector<i64>&, double)>& per_path = nullptr) {
    if (max_len < std::llabs(target_z))
        throw precondition_error("truncated_path_sum: max_len below |target_z|");
    if (field.window() < std::llabs(target_z))
        throw insufficient_window_error("truncated_path_sum: target outside window");

    TruncatedPathSum out;
    double lse_max = -kInf, lse_sum = 0.0;
    std::vector<i64> sites{0};

    auto add = [&](double lv) {
        if (lv > lse_max) {
            lse_sum = std::isfinite(lse_max) ? lse_sum * std::exp(lse_max - lv) + 1.0 : 1.0;
            lse_max = lv;
        } else {
            lse_sum += std::exp(lv - lse_max);
        }
    };

    std::function<void()> dfs = [&]() {
        const i64 cur = sites.back();
        const i64 len = static_cast<i64>(sites.size()) - 1;
        if (cur == target_z) {
            if (++out.paths > path_cap) throw numerical_error("truncated_path_sum: path cap hit");
            GeometricPath p{sites};
            const double lv = path_contribution(field, t, p).log_value;
            add(lv);
            if (per_path) per_path(sites, lv);
        }
        if (len >= max_len || std::llabs(target_z - cur) > max_len - len) return;
        for (i64 step : {i64{-1}, i64{1}}) {
            const i64 nxt = cur + step;
            if (std::llabs(nxt) > field.window()) continue;
            if (std::llabs(target_z - nxt) > max_len - len - 1) continue;
            sites.push_back(nxt);
            dfs();
            sites.pop_back();
        }
    };
    dfs();

    out.log_u_lower = std::isfinite(lse_max) ? lse_max + std::log(lse_sum) : -kInf;
    double xi_max = -kInf;
    for (i64 z = -field.window(); z <= field.window(); ++z) xi_max = std::max(xi_max, field.xi(z));
    // P(Poisson(2t) > L) = gamma_p(L+1, 2t)
    const double ptail = boost::math::gamma_p(static_cast<double>(max_len + 1), 2.0 * t);
    out.log_tail = t * xi_max + std::log(ptail);
    out.tail_bound = std::exp(out.log_tail);
    return out;
}

}  // namespace pam
