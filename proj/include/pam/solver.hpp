#pragma once

#include <vector>

#include "pam/localisation.hpp"
#include "pam/potential.hpp"

namespace pam {

struct SolutionState {
    double t = 0;
    double log_mass = 0;      // log U(t)
    i64 L = 0;                // window of v: indices -L..L
    std::vector<double> v;    // normalized profile, v[L + z]
    // diagnostics
    i64 steps = 0;
    double max_local_err = 0;
    double boundary_leak_rate = 0;  // v(-L) + v(L) at t
    bool window_warning = false;    // leakage above 1e-6 of mass per unit time

    double at(i64 z) const { return v[static_cast<size_t>(L + z)]; }
};

struct Observables {
    double log_ratio = 0;
    double two_site_mass = 0;
    double top_site_mass = 0;
    bool ratio_finite = true;
};

// Normalized exponential integrator for dv/dt = (Delta + xi) v on [-L, L]
// with absorbing boundary. Each macro step applies exp(h(A - cI)) by
// uniformization: with rate LAM >= max|diag(A - cI)|, P = I + (A - cI)/LAM
// is entrywise non-negative, so the Poisson-weighted series has no
// cancellation and preserves v >= 0. The profile is renormalized and
// log U accumulated after every step.
inline std::vector<SolutionState> solve_pam(const PotentialField& field,
                                            const std::vector<double>& t_grid, i64 L_solve,
                                            double tol = 1e-8) {
    if (t_grid.empty() || t_grid.front() <= 0.0)
        throw precondition_error("solve_pam: t grid must start above 0");
    for (size_t i = 1; i < t_grid.size(); ++i)
        if (t_grid[i] <= t_grid[i - 1]) throw precondition_error("solve_pam: t grid must increase");
    if (L_solve > field.window()) throw insufficient_window_error("solve_pam: L_solve > window");
    if (L_solve < 0) throw precondition_error("solve_pam: L_solve < 0");

    const i64 n = 2 * L_solve + 1;
    std::vector<double> xi(n), diag(n);
    double xi_max = -kInf, xi_min = kInf;
    for (i64 z = -L_solve; z <= L_solve; ++z) {
        xi[L_solve + z] = field.xi(z);
        xi_max = std::max(xi_max, xi[L_solve + z]);
        xi_min = std::min(xi_min, xi[L_solve + z]);
    }
    // gauge c = xi_max makes A - cI a sub-generator (column sums <= 0), so
    // P = I + (A - cI)/lam is substochastic and the truncated Poisson series
    // has mass error bounded by the dropped Poisson weight
    const double c = xi_max;
    const double lam = (xi_max - xi_min) + 2.0;  // >= max |diag(A - cI)|
    for (i64 i = 0; i < n; ++i) diag[i] = xi[i] - 2.0 - c;  // in [-lam, -2]

    std::vector<double> v(n, 0.0), y(n), pk(n), tmp(n);
    v[L_solve] = 1.0;
    double log_mass = 0.0;

    std::vector<SolutionState> out;
    double t_cur = 0.0;
    i64 steps = 0;
    double max_err = 0.0;
    bool warn = false;

    auto matvec_p = [&](const std::vector<double>& x, std::vector<double>& r) {
        // r = P x, P = I + (A - cI)/lam
        for (i64 i = 0; i < n; ++i) {
            double s = (1.0 + diag[i] / lam) * x[i];
            if (i > 0) s += x[i - 1] / lam;
            if (i + 1 < n) s += x[i + 1] / lam;
            r[i] = s;
        }
    };

    for (double t_target : t_grid) {
        while (t_cur < t_target) {
            double h = std::min(t_target - t_cur, 16.0 / lam);
            if (h < 1e-13 * t_target)
                throw numerical_error("solve_pam: step-size underflow (stiffness)");
            const double mu = h * lam;
            // y = exp(-mu) sum_k mu^k/k! P^k v
            double w = std::exp(-mu);
            if (w == 0.0) throw numerical_error("solve_pam: uniformization weight underflow");
            pk = v;
            for (i64 i = 0; i < n; ++i) y[i] = w * pk[i];
            double wsum = w;
            int k = 0;
            while (wsum < 1.0 - tol * 1e-4 && k < 2000) {
                ++k;
                matvec_p(pk, tmp);
                std::swap(pk, tmp);
                w *= mu / k;
                for (i64 i = 0; i < n; ++i) y[i] += w * pk[i];
                wsum += w;
            }
            max_err = std::max(max_err, 1.0 - wsum);
            double mass = 0.0;
            for (double x : y) mass += x;
            if (mass <= 0.0) throw numerical_error("solve_pam: total mass underflow");
            log_mass += std::log(mass) + h * c;
            for (i64 i = 0; i < n; ++i) v[i] = y[i] / mass;
            t_cur += h;
            ++steps;
            double leak = v[0] + v[n - 1];
            if (leak > 1e-6) warn = true;
        }
        SolutionState st;
        st.t = t_target;
        st.log_mass = log_mass;
        st.L = L_solve;
        st.v = v;
        st.steps = steps;
        st.max_local_err = max_err;
        st.boundary_leak_rate = v[0] + v[n - 1];
        st.window_warning = warn;
        out.push_back(std::move(st));
    }
    return out;
}

// Independent small-lattice oracle: dense exp(tA) delta_0 by Taylor
// scaling-and-squaring in the gauge-shifted non-negative representation.
inline SolutionState dense_oracle(const PotentialField& field, double t, i64 L_small) {
    if (L_small > 12) throw precondition_error("dense_oracle: window must be <= 12");
    if (L_small > field.window()) throw insufficient_window_error("dense_oracle: window too small");
    const i64 n = 2 * L_small + 1;
    std::vector<double> xi(n);
    double xi_max = -kInf;
    for (i64 z = -L_small; z <= L_small; ++z) {
        xi[L_small + z] = field.xi(z);
        xi_max = std::max(xi_max, xi[L_small + z]);
    }
    const double c = xi_max - 2.0;

    // B = t (A - c I); diag <= 0, off-diag >= 0
    std::vector<double> B(n * n, 0.0);
    double norm1 = 0.0;
    for (i64 i = 0; i < n; ++i) {
        B[i * n + i] = t * (xi[i] - 2.0 - c);
        if (i > 0) B[i * n + i - 1] = t;
        if (i + 1 < n) B[i * n + i + 1] = t;
    }
    for (i64 j = 0; j < n; ++j) {
        double s = 0.0;
        for (i64 i = 0; i < n; ++i) s += std::abs(B[i * n + j]);
        norm1 = std::max(norm1, s);
    }
    int sq = 0;
    while (norm1 / std::pow(2.0, sq) > 0.5) ++sq;
    const double scale = std::pow(2.0, sq);
    // shift diagonal to make the scaled matrix entrywise non-negative
    double dmin = 0.0;
    for (i64 i = 0; i < n; ++i) dmin = std::min(dmin, B[i * n + i] / scale);
    const double m = -dmin;

    std::vector<double> M(n * n, 0.0), E(n * n, 0.0), term(n * n, 0.0), nxt(n * n, 0.0);
    for (i64 i = 0; i < n * n; ++i) M[i] = B[i] / scale;
    for (i64 i = 0; i < n; ++i) M[i * n + i] += m;  // M >= 0
    // E = exp(M), Taylor with non-negative terms
    for (i64 i = 0; i < n; ++i) E[i * n + i] = 1.0, term[i * n + i] = 1.0;
    for (int k = 1; k <= 60; ++k) {
        // nxt = term * M / k
        double tmax = 0.0;
        for (i64 i = 0; i < n; ++i)
            for (i64 j = 0; j < n; ++j) {
                double s = 0.0;
                for (i64 l = std::max<i64>(0, j - 1); l <= std::min<i64>(n - 1, j + 1); ++l)
                    s += term[i * n + l] * M[l * n + j];
                nxt[i * n + j] = s / k;
                tmax = std::max(tmax, s / k);
            }
        std::swap(term, nxt);
        for (i64 i = 0; i < n * n; ++i) E[i] += term[i];
        if (tmax < 1e-20) break;
    }
    const double em = std::exp(-m);
    for (i64 i = 0; i < n * n; ++i) E[i] *= em;
    // square sq times; track a running log factor to avoid under/overflow
    double log_factor = 0.0;
    for (int s = 0; s < sq; ++s) {
        double emax = 0.0;
        for (i64 i = 0; i < n; ++i)
            for (i64 j = 0; j < n; ++j) {
                double acc = 0.0;
                for (i64 l = 0; l < n; ++l) acc += E[i * n + l] * E[l * n + j];
                nxt[i * n + j] = acc;
                emax = std::max(emax, acc);
            }
        if (emax <= 0.0) throw numerical_error("dense_oracle: matrix underflow");
        for (i64 i = 0; i < n * n; ++i) E[i] = nxt[i] / emax;
        log_factor = 2.0 * log_factor + std::log(emax);
    }
    // u = e^{tc} * e^{log_factor} * E * delta_0
    SolutionState st;
    st.t = t;
    st.L = L_small;
    st.v.assign(n, 0.0);
    double mass = 0.0;
    for (i64 i = 0; i < n; ++i) {
        st.v[i] = E[i * n + L_small];
        mass += st.v[i];
    }
    if (mass <= 0.0) throw numerical_error("dense_oracle: zero mass");
    for (auto& x : st.v) x /= mass;
    st.log_mass = t * c + log_factor + std::log(mass);
    st.boundary_leak_rate = st.v[0] + st.v[n - 1];
    return st;
}

inline Observables observables(const SolutionState& state, const LocalisationSites& sites) {
    if (sites.z1 > state.L) throw insufficient_window_error("observables: z1 outside state window");
    const double vp = state.at(sites.z1), vm = state.at(-sites.z1);
    Observables ob;
    ob.two_site_mass = vp + vm;
    ob.top_site_mass = std::max(vp, vm);
    if (vp > 0.0 && vm > 0.0) {
        ob.log_ratio = std::log(vp) - std::log(vm);
    } else {
        ob.ratio_finite = false;
        ob.log_ratio = vp > 0.0 ? kInf : (vm > 0.0 ? -kInf : kNaN);
    }
    return ob;
}

}  // namespace pam
