#pragma once

#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "pam/potential.hpp"
#include "pam/scales.hpp"

namespace pam {

struct LocalisationSites {
    i64 z1 = -1, z2 = -1;         // argmaxes of Psi over D resp. D \ {z1} (indices in N0)
    i64 ze = 0;                   // argmax over -E u E (signed site)
    bool ze_valid = false;
    i64 z1_star = -1, z2_star = -1;  // argmaxes over N0
    double psi_z1 = -kInf, psi_z2 = -kInf, psi_ze = -kInf;
    double psi_z1_star = -kInf, psi_z2_star = -kInf;
    double xi_z1 = 0.0;
    bool stable = true;  // survives doubling of the search radius
    i64 radius = 0;      // rho0
};

// Candidate localisation centre for the eigenmode propagator: site plus a
// first-order screening exponent ~ log of the mode's contribution to U(t).
struct ModeCandidate {
    i64 z = 0;          // signed site
    double screen = -kInf;
};

struct FieldScan {
    LocalisationSites sites;
    std::vector<ModeCandidate> modes_pos, modes_neg;  // sorted by screen, descending
};

namespace detail {

// running top-2 argmax with the (smaller |z|, then positive z) tie-break;
// callers feed sites in order of increasing |z|, positive sign first.
struct Top2 {
    i64 z1 = -1, z2 = -1;
    double p1 = -kInf, p2 = -kInf;
    void offer(i64 z, double p) {
        if (p > p1) {
            z2 = z1; p2 = p1;
            z1 = z; p1 = p;
        } else if (p > p2) {
            z2 = z; p2 = p;
        }
    }
};

struct Top1 {
    i64 z = 0;
    double p = -kInf;
    bool valid = false;
    void offer(i64 zz, double pp) {
        if (!valid || pp > p) {
            z = zz; p = pp; valid = true;
        }
    }
};

// fixed-size keep-best list for mode candidates
struct ModeHeap {
    static constexpr size_t cap = 12;
    std::vector<ModeCandidate> v;
    double min_screen() const {
        return v.size() < cap ? -kInf : v.back().screen;
    }
    void offer(i64 z, double s) {
        if (v.size() >= cap && s <= v.back().screen) return;
        ModeCandidate c{z, s};
        auto it = std::lower_bound(v.begin(), v.end(), s,
                                   [](const ModeCandidate& a, double b) { return a.screen > b; });
        v.insert(it, c);
        if (v.size() > cap) v.pop_back();
    }
};

}  // namespace detail

// Single streaming pass over |z| <= 2*rho0, rho0 = ceil(4 g_t r_t).
// Maximisers are taken within rho0; the outer annulus only feeds the
// stability flag. Sites are screened by a running threshold on the raw
// uniforms so that almost all sites cost two hashes and two compares.
inline FieldScan scan_field(const PotentialField& field, double t, Scales& scales) {
    const double alpha = field.alpha();
    const i64 rho0 = static_cast<i64>(std::ceil(4.0 * scales.g_t * scales.r_t));
    if (field.window() < 2 * rho0)
        throw insufficient_window_error("scan_field: field window below 2*rho0 = " +
                                        std::to_string(2 * rho0));
    const double gamma = alpha / (alpha - 1.0);

    FieldScan out;
    detail::Top2 bd;     // over D
    detail::Top2 bstar;  // over N0
    detail::Top1 be;     // over -E u E
    detail::ModeHeap hp, hm;

    auto mode_screen = [&](i64 n, double xi) {
        // t*xi - |n| * (log xi - gamma/xi): potential gain minus first-order
        // path cost of reaching the site, including the mean effect of the
        // visited potentials (E log(xi(Z1) - xi(z)) ~ log xi(Z1) - gamma/xi(Z1)).
        // The cost is clamped at 0: for xi near 1 the first-order formula goes
        // negative, and a negative cost would both inflate bulk sites and break
        // the screen <= t*xi bound the uniform-threshold skip relies on.
        const double cost = std::max(std::log(xi) - gamma / xi, 0.0);
        return t * xi - static_cast<double>(n) * cost;
    };

    const bool gen = field.generated();
    double xi_thr = 1.0;  // process sites that can beat some record; 1.0 = everything
    double u_thr = -1.0;
    auto refresh_thr = [&](bool stability_phase) {
        double need = std::min(bd.p2, bstar.p2);
        need = std::min(need, be.valid ? be.p : -kInf);
        if (!stability_phase) {
            need = std::min(need, hp.min_screen() / t);
            need = std::min(need, hm.min_screen() / t);
        }
        xi_thr = std::max(need, 1.0);
        u_thr = std::isfinite(need) ? 1.0 - std::pow(xi_thr, -alpha) : -1.0;
    };
    refresh_thr(false);

    for (i64 n = 0; n <= 2 * rho0; ++n) {
        const bool inner = n <= rho0;
        if (gen && field.u_base(n) <= u_thr && field.u_mirror(n) <= u_thr) continue;

        const bool dup = field.is_dup(n);
        const double xp = field.xi0(n);
        const double xm = dup ? xp : field.xi(-n);
        const double pp = psi(t, n, xp);
        const double pm = dup ? pp : psi(t, n, xm);

        if (inner) {
            bstar.offer(n, pp);
            if (dup) {
                bd.offer(n, pp);
            } else {
                be.offer(n, pp);
                be.offer(-n, pm);
            }
            hp.offer(n, mode_screen(n, xp));
            if (n > 0) hm.offer(-n, mode_screen(n, xm));
            refresh_thr(false);
        } else {
            if (n == rho0 + 1) refresh_thr(true);
            bool beats = pp > std::min(bd.p2, bstar.p2);
            if (!dup) beats = beats || pp > be.p || pm > be.p;
            if (beats) out.sites.stable = false;
        }
    }

    auto& s = out.sites;
    s.radius = rho0;
    s.z1 = bd.z1;
    s.z2 = bd.z2;
    s.psi_z1 = bd.p1;
    s.psi_z2 = bd.p2;
    s.z1_star = bstar.z1;
    s.z2_star = bstar.z2;
    s.psi_z1_star = bstar.p1;
    s.psi_z2_star = bstar.p2;
    s.ze_valid = be.valid;
    s.ze = be.z;
    s.psi_ze = be.valid ? be.p : -kInf;
    s.xi_z1 = s.z1 >= 0 ? field.xi0(s.z1) : 0.0;
    scales.R_t = s.z1 >= 0 ? static_cast<double>(s.z1) * (1.0 + scales.f_t) : 0.0;
    out.modes_pos = hp.v;
    out.modes_neg = hm.v;
    return out;
}

inline LocalisationSites find_maximisers(const PotentialField& field, double t, Scales& scales) {
    return scan_field(field, t, scales).sites;
}

// Apply fn(n, xi(n), xi(-n), dup) for every n in [lo, hi] for which
// max(xi(n), xi(-n)) > cutoff; cheap uniform-space screen in generated mode.
template <class F>
inline void for_sites_above(const PotentialField& field, i64 lo, i64 hi, double cutoff, F&& fn) {
    const bool gen = field.generated();
    const double u_thr = (gen && cutoff > 1.0) ? 1.0 - std::pow(cutoff, -field.alpha()) : -1.0;
    for (i64 n = std::max<i64>(lo, 0); n <= hi; ++n) {
        if (gen && field.u_base(n) <= u_thr && field.u_mirror(n) <= u_thr) continue;
        const bool dup = field.is_dup(n);
        const double xp = field.xi0(n);
        const double xm = dup ? xp : field.xi(-n);
        if (xp <= cutoff && xm <= cutoff) continue;
        fn(n, xp, xm, dup);
    }
}

struct SiteSetK {
    double theta_t = 1.0;
    std::vector<std::pair<i64, double>> k_plus;   // (site, xi) in (0, z1)
    std::vector<std::pair<i64, double>> k_minus;  // (site, xi) in (-z1, 0)
    i64 n_z1 = 0;        // N(z1) = |E cap [1, z1]|
    double zeta = 0.0;   // max xi over |z| in E, |z| < z1 (0 if none)
    double sum_diff = 0.0;  // sum over E cap [1,z1) of xi(z) - xi(-z)
};

inline SiteSetK build_K(const PotentialField& field, const LocalisationSites& sites,
                        double theta_t) {
    if (sites.z1 <= 0) throw degenerate_maximiser_error("build_K: z1 must be positive");
    SiteSetK k;
    k.theta_t = theta_t;
    for (i64 z = 1; z <= sites.z1; ++z) {
        if (field.is_dup(z)) continue;
        ++k.n_z1;
        const double xp = field.xi0(z);
        const double xm = field.xi(-z);
        if (z < sites.z1) {
            k.zeta = std::max({k.zeta, xp, xm});
            k.sum_diff += xp - xm;
        }
        if (xp > theta_t) k.k_plus.emplace_back(z, xp);
        if (xm > theta_t) k.k_minus.emplace_back(-z, xm);
    }
    return k;
}

struct MomentStats {
    double m_plus = 0, m_minus = 0;        // M_t+-
    double sig2_plus = 0, sig2_minus = 0;  // (Sigma_t+-)^2
    double m_bar = 0, s_bar_inv = 0;
    double gamma = 0;
    double q_plus = 0, q_minus = 0, q_t = 0;
    i64 excluded = 0;  // sites with xi(z) >= xi(z1), dropped from M/Sigma, Q = 0
};

inline MomentStats moment_stats(const PotentialField& field, const LocalisationSites& sites,
                                const SiteSetK& kset, const Scales& scales) {
    (void)scales;
    MomentStats ms;
    const double alpha = field.alpha();
    const double x1 = sites.xi_z1;
    ms.gamma = alpha / (alpha - 1.0);
    auto accumulate = [&](const std::vector<std::pair<i64, double>>& ks, double& m, double& sig2,
                          double& q) {
        for (auto& [z, x] : ks) {
            if (x >= x1) {
                ++ms.excluded;
                continue;
            }
            const double d = x1 - x;
            m += 1.0 / d;
            sig2 += 1.0 / (d * d);
            q += -std::log1p(-x / x1);
        }
    };
    accumulate(kset.k_plus, ms.m_plus, ms.sig2_plus, ms.q_plus);
    accumulate(kset.k_minus, ms.m_minus, ms.sig2_minus, ms.q_minus);
    ms.q_t = ms.q_plus - ms.q_minus;
    const double n1 = static_cast<double>(kset.n_z1);
    ms.m_bar = n1 / x1 * (1.0 + ms.gamma / x1);
    ms.s_bar_inv = n1 > 0 ? x1 / std::sqrt(n1) * (1.0 - ms.gamma / x1) : kInf;
    return ms;
}

struct EventFlags {
    // E1: five clauses
    bool e1_z1_window = false;   // f < Z1/r < g
    bool e1_xi_window = false;   // f < xi(Z1)/a < g
    bool e1_psi_gap = false;     // (Psi(Z1) - Psi(Z2))/a > f
    bool e1_e_below = false;     // Psi(Ze) < Psi(Z2)
    bool e1_xi_gap = false;      // xi(Z1) - xi(z) > a f on [-R_t, R_t] \ {+-Z1}
    // E2: three clauses
    bool e2_k_window = false;    // f < theta^alpha |K| / eta(r_t) < g
    bool e2_dup_nbhd = false;    // [z1 - alpha, z1 + alpha] cap N subset D
    bool e2_half_nbhd = false;   // 2 xi(z) < xi(z1) for 0 < |z - z1| <= alpha
    // Ecr: six clauses
    bool ecr_mbar = false, ecr_mp = false, ecr_mm = false;
    bool ecr_sbar = false, ecr_sp = false, ecr_sm = false;
    bool ecr_applicable = false;
    bool e1 = false, e2 = false, ecr = false;
};

inline EventFlags check_events(const PotentialField& field, const LocalisationSites& sites,
                               const SiteSetK& kset, const MomentStats& stats,
                               const Scales& scales, const RegimeProfile& profile,
                               RegimeKind regime, std::optional<double> eta_rt = std::nullopt) {
    EventFlags ev;
    const double a = scales.a_t, f = scales.f_t, g = scales.g_t;
    const double alpha = field.alpha();
    const double x1 = sites.xi_z1;
    const double z1r = static_cast<double>(sites.z1) / scales.r_t;

    ev.e1_z1_window = sites.z1 > 0 && f < z1r && z1r < g;
    ev.e1_xi_window = f < x1 / a && x1 / a < g;
    ev.e1_psi_gap = sites.z2 < 0 || (sites.psi_z1 - sites.psi_z2) / a > f;
    ev.e1_e_below = !sites.ze_valid || sites.psi_ze < sites.psi_z2;

    // gap scan: both +-Z1 are excluded (the duplicated pair shares its value)
    ev.e1_xi_gap = true;
    const double cutoff = x1 - a * f;
    if (cutoff <= 1.0) {
        ev.e1_xi_gap = false;
    } else {
        const i64 hi = std::min<i64>(static_cast<i64>(std::floor(scales.R_t)), field.window());
        for_sites_above(field, 0, hi, cutoff, [&](i64 n, double xp, double xm, bool dup) {
            if (n == sites.z1) return;
            if (xp > cutoff || (!dup && xm > cutoff)) ev.e1_xi_gap = false;
        });
    }
    ev.e1 = ev.e1_z1_window && ev.e1_xi_window && ev.e1_psi_gap && ev.e1_e_below && ev.e1_xi_gap;

    const double e_rt = eta_rt ? *eta_rt : eta(profile, static_cast<i64>(std::llround(scales.r_t)));
    const double ksz = static_cast<double>(kset.k_plus.size() + kset.k_minus.size());
    const double kratio = std::pow(kset.theta_t, alpha) * ksz / e_rt;
    ev.e2_k_window = f < kratio && kratio < g;

    ev.e2_dup_nbhd = true;
    ev.e2_half_nbhd = true;
    const i64 ai = static_cast<i64>(std::floor(alpha));
    for (i64 k = sites.z1 - ai; k <= sites.z1 + ai; ++k) {
        if (k >= 1 && k <= field.window() && !field.is_dup(k)) ev.e2_dup_nbhd = false;
        if (k != sites.z1 && std::llabs(k) <= field.window() && 2.0 * field.xi(k) >= x1)
            ev.e2_half_nbhd = false;
    }
    ev.e2 = ev.e2_k_window && ev.e2_dup_nbhd && ev.e2_half_nbhd;

    ev.ecr_applicable = regime == RegimeKind::Critical;
    if (ev.ecr_applicable) {
        const double lam_rt = scales.lambda_at(scales.r_t);
        ev.ecr_mbar = lam_rt / a * stats.m_bar < g;
        ev.ecr_mp = a * std::abs(stats.m_plus - stats.m_bar) < g;
        ev.ecr_mm = a * std::abs(stats.m_minus - stats.m_bar) < g;
        const double sb = stats.s_bar_inv / std::sqrt(lam_rt);
        ev.ecr_sbar = f < sb && sb < g;
        const double isp = stats.sig2_plus > 0 ? 1.0 / std::sqrt(stats.sig2_plus) : kInf;
        const double ism = stats.sig2_minus > 0 ? 1.0 / std::sqrt(stats.sig2_minus) : kInf;
        ev.ecr_sp = a * a * std::abs(isp - stats.s_bar_inv) < g;
        ev.ecr_sm = a * a * std::abs(ism - stats.s_bar_inv) < g;
        ev.ecr = ev.ecr_mbar && ev.ecr_mp && ev.ecr_mm && ev.ecr_sbar && ev.ecr_sp && ev.ecr_sm;
    } else {
        ev.ecr = true;  // vacuously true, recorded as not applicable
    }
    return ev;
}

struct QMoments {
    double exact = 0;       // quadrature of the conditional moment integral
    double asymptotic = 0;  // leading-order closed form
    double rel_gap = 0;
};

// Conditional n-th moment of Q_t(z) for z in K_t:
//   (theta/xi)^alpha re-weighted integral of [-log(1-y)]^n alpha y^{-alpha-1}
//   over y in (theta/xi, 1).
inline QMoments analytic_q_moments(double theta_t, double xi_z1, double alpha, int n) {
    if (n != 1 && n != 2) throw precondition_error("analytic_q_moments: n must be 1 or 2");
    const double s = theta_t / xi_z1;
    if (!(s > 0.0 && s < 0.5)) throw precondition_error("analytic_q_moments: need theta/xi < 1/2");
    boost::math::quadrature::tanh_sinh<double> integrator;
    auto f = [&](double y) {
        double l = -std::log1p(-y);
        return (n == 2 ? l * l : l) * alpha * std::pow(y, -alpha - 1.0);
    };
    double integral = integrator.integrate(f, s, 1.0);
    if (!std::isfinite(integral)) throw numerical_error("analytic_q_moments: quadrature failed");
    QMoments qm;
    qm.exact = std::pow(s, alpha) * integral;
    if (alpha > 2.0 || n == 1) {
        qm.asymptotic = alpha / (alpha - n) * std::pow(s, n);
    } else {
        qm.asymptotic = 2.0 * s * s * std::log(1.0 / s);
    }
    qm.rel_gap = std::abs(qm.exact - qm.asymptotic) / qm.asymptotic;
    return qm;
}

// conditional variance of Q_t(z); exact via quadrature
inline double analytic_q_variance(double theta_t, double xi_z1, double alpha) {
    const double m1 = analytic_q_moments(theta_t, xi_z1, alpha, 1).exact;
    const double m2 = analytic_q_moments(theta_t, xi_z1, alpha, 2).exact;
    return m2 - m1 * m1;
}

}  // namespace pam
