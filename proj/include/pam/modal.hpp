#pragma once

#include <Eigen/Dense>
#include <string>

#include "pam/localisation.hpp"
#include "pam/solver.hpp"

namespace pam {

// Large-t propagator. At the times the localisation statistics need
// (t >= 10^3) the solution profile spans far more orders of magnitude than
// double precision can hold, so direct integration of the normalized ODE is
// not viable. Instead we use the spectral representation
//     u(t, z) = sum_k exp(t lambda_k) phi_k(0) phi_k(z)
// truncated to the eigenmodes localized at the strongest Psi_t peaks: their
// eigenvalues come from a dense solve on a small window around each peak,
// and phi_k(0)/phi_k(peak) from the exact three-term recursion marched in
// log scale from near the origin (the growth direction, which is stable).
// Omitted modes are suppressed by exp(-t * spectral gap), which is
// astronomically small at these t; the overlap regime with solve_pam is
// cross-checked in the tests.

namespace detail {

struct ModeEval {
    i64 center = 0;
    double lambda = 0;
    SignedLog contrib_q1, contrib_q2;  // e^{t lambda} phi(0) phi(q_i)
    SignedLog contrib_mass;            // e^{t lambda} phi(0) sum_z phi(z)
    double t_peak = -kInf;             // t lambda + log|phi(0) phi(center)|
    double depth = 0;                  // log phi(center)/phi(0): seeding depth
    bool ok = false;
};

inline ModeEval eval_mode(const PotentialField& field, double t, i64 w, i64 q1, i64 q2) {
    constexpr int R = 64;
    constexpr double rescale_at = 1e150, rescale_by = 1e-150;
    const i64 L = field.window();
    const int s = w >= 0 ? 1 : -1;

    ModeEval me;
    me.center = w;

    // local window around the peak, ordered from the origin side outward
    i64 i_lo = 0, i_hi = 2 * R;
    while (i_lo <= i_hi && std::llabs(w + s * (i_lo - R)) > L) ++i_lo;
    while (i_hi >= i_lo && std::llabs(w + s * (i_hi - R)) > L) --i_hi;
    const int nn = static_cast<int>(i_hi - i_lo + 1);
    if (nn < 3 || R - i_lo < 0) return me;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nn, nn);
    for (int i = 0; i < nn; ++i) {
        A(i, i) = field.xi(w + s * (i_lo + i - R)) - 2.0;
        if (i + 1 < nn) A(i, i + 1) = A(i + 1, i) = 1.0;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    if (es.info() != Eigen::Success) return me;
    const int ic = static_cast<int>(R - i_lo);
    int kb = 0;
    double best = -1.0;
    for (int k = 0; k < nn; ++k) {
        double a = std::abs(es.eigenvectors()(ic, k));
        if (a > best) {
            best = a;
            kb = k;
        }
    }
    me.lambda = es.eigenvalues()(kb);
    Eigen::VectorXd phi = es.eigenvectors().col(kb);
    const double pc = phi(ic);
    if (pc == 0.0) return me;
    double far_sum = 0.0, far_sq = 0.0;
    for (int i = ic + 1; i < nn; ++i) {
        const double rel = phi(i) / pc;
        far_sum += rel;
        far_sq += rel * rel;
    }

    // march u(next) = (lambda + 2 - xi) u - u(prev) from beyond both query
    // sites up to the peak; all quantities share the running scale epoch.
    // The start is padded so the decaying-solution contamination from the
    // u_prev = 0 boundary condition has died off by the first query site.
    const i64 start_off = std::min<i64>(24 + std::max(std::llabs(q1), std::llabs(q2)), L);
    const i64 K = start_off + std::llabs(w);
    double u_prev = 0.0, u_cur = 1.0, log_scale = 0.0;
    double sum = 1.0, sum_sq = 1.0;
    double l0 = kNaN, lq1 = kNaN, lq2 = kNaN;
    int s0 = 0, sq1 = 0, sq2 = 0;
    bool have_q1 = false, have_q2 = false;
    for (i64 k = 0;; ++k) {
        const i64 z = s * (k - start_off);
        if (z == 0) {
            l0 = std::log(std::abs(u_cur)) + log_scale;
            s0 = u_cur > 0 ? 1 : (u_cur < 0 ? -1 : 0);
        }
        if (z == q1) {
            lq1 = std::log(std::abs(u_cur)) + log_scale;
            sq1 = u_cur > 0 ? 1 : (u_cur < 0 ? -1 : 0);
            have_q1 = true;
        }
        if (z == q2) {
            lq2 = std::log(std::abs(u_cur)) + log_scale;
            sq2 = u_cur > 0 ? 1 : (u_cur < 0 ? -1 : 0);
            have_q2 = true;
        }
        if (k == K) break;
        const double g = me.lambda + 2.0 - field.xi(z);
        const double u_next = g * u_cur - u_prev;
        u_prev = u_cur;
        u_cur = u_next;
        sum += u_cur;
        sum_sq += u_cur * u_cur;
        if (std::abs(u_cur) > rescale_at) {
            u_prev *= rescale_by;
            u_cur *= rescale_by;
            sum *= rescale_by;
            sum_sq *= rescale_by * rescale_by;
            log_scale -= std::log(rescale_by);
        }
    }
    if (u_cur == 0.0 || s0 == 0) return me;
    const double lw = std::log(std::abs(u_cur)) + log_scale;
    const int sw = u_cur > 0 ? 1 : -1;

    // queries beyond the peak: march a second solution inward from beyond
    // the query toward the peak (the eigenfunction grows in that direction,
    // so this is the stable recursion) and match amplitudes at the peak
    auto beyond_peak = [&](i64 q, double& lq, int& sq, bool& have) {
        const i64 far_off = std::min<i64>(std::llabs(q) + 24, L);
        double bp = 0.0, bc = 1.0, bscale = 0.0;
        double blq = kNaN, blw = kNaN;
        int bsq = 0, bsw = 0;
        for (i64 m = far_off;; --m) {
            const i64 z = s * m;
            if (z == q) {
                blq = std::log(std::abs(bc)) + bscale;
                bsq = bc > 0 ? 1 : (bc < 0 ? -1 : 0);
            }
            if (m == std::llabs(w)) {
                blw = std::log(std::abs(bc)) + bscale;
                bsw = bc > 0 ? 1 : (bc < 0 ? -1 : 0);
                break;
            }
            const double g = me.lambda + 2.0 - field.xi(z);
            const double nx = g * bc - bp;
            bp = bc;
            bc = nx;
            if (std::abs(bc) > rescale_at) {
                bp *= rescale_by;
                bc *= rescale_by;
                bscale -= std::log(rescale_by);
            }
        }
        if (bsq == 0 || bsw == 0) return;
        lq = lw + (blq - blw);
        sq = sw * bsq * bsw;
        have = true;
    };
    if (!have_q1) beyond_peak(q1, lq1, sq1, have_q1);
    if (!have_q2) beyond_peak(q2, lq2, sq2, have_q2);

    const double norm2_log = 2.0 * log_scale + std::log(sum_sq + u_cur * u_cur * far_sq);
    const double total = sum + u_cur * far_sum;  // signed, current scale
    me.t_peak = t * me.lambda + l0 + lw - norm2_log;
    me.depth = lw - l0;
    if (have_q1 && sq1 != 0)
        me.contrib_q1 = SignedLog{t * me.lambda + l0 + lq1 - norm2_log, s0 * sq1};
    if (have_q2 && sq2 != 0)
        me.contrib_q2 = SignedLog{t * me.lambda + l0 + lq2 - norm2_log, s0 * sq2};
    if (total != 0.0)
        me.contrib_mass = SignedLog{
            t * me.lambda + l0 + std::log(std::abs(total)) + log_scale - norm2_log,
            total > 0 ? s0 : -s0};
    me.ok = true;
    return me;
}

}  // namespace detail

struct ModalSolution {
    double t = 0;
    bool valid = false;
    std::string why;
    double log_mass = 0;  // log U(t)
    SignedLog u_plus, u_minus;  // u(t, z1), u(t, -z1)
    Observables obs;
    int modes_used = 0;
    double max_depth = 0;  // deepest seeding depth among used modes; a direct
                           // double-precision integrator needs exp(-max_depth)
                           // representable relative to the profile maximum
};

inline ModalSolution modal_solve(const PotentialField& field, double t, const Scales& scales,
                                 const FieldScan& scan) {
    ModalSolution sol;
    sol.t = t;
    const auto& sites = scan.sites;
    if (sites.z1 < 1) {
        sol.why = "degenerate maximiser";
        return sol;
    }
    // screening margin: generous upper bound on the first-order error of the
    // scan's mode screen (~ |z| E[xi^2] / lambda^2 scale)
    const double margin =
        50.0 + 6.0 * scales.r_t * scales.g_t / (scales.a_t * scales.a_t);

    auto side_modes = [&](const std::vector<ModeCandidate>& cands, i64 forced) {
        // margin against this side's own best: each side must keep its own
        // dominant modes no matter how strong the other side is
        double best = -kInf;
        for (const auto& c : cands) best = std::max(best, c.screen);
        std::vector<i64> keep{forced};
        for (const auto& c : cands) {
            if (c.screen < best - margin) continue;
            // only collapse adjacent candidate sites here; distinct peaks in
            // the same neighbourhood are resolved by the post-eval dedupe
            bool dup = false;
            for (i64 z : keep)
                if (std::llabs(z - c.z) < 3) dup = true;
            if (!dup) keep.push_back(c.z);
            if (keep.size() >= 12) break;
        }
        return keep;
    };
    const auto pos = side_modes(scan.modes_pos, sites.z1);
    const auto neg = side_modes(scan.modes_neg, -sites.z1);

    // Every kept mode contributes to u at both +-z1 (a dominant mode on one
    // side can carry the value at the opposite query site through its tail).
    // Own-side and cross-side contributions are accumulated separately and
    // merged at the end so a mirror-symmetric field yields bitwise-equal
    // u_plus and u_minus.
    SignedLog mass = SignedLog::zero();
    SignedLog up_own, up_cross, um_own, um_cross;
    auto run_side = [&](const std::vector<i64>& centers, i64 q_own, i64 q_cross,
                        SignedLog& u_own, SignedLog& u_cross) {
        // per-side dedupe: mirrored peaks on opposite sides share eigenvalues
        // on symmetric fields but are genuinely distinct modes
        std::vector<std::pair<double, double>> seen;  // (lambda, center)
        for (i64 w : centers) {
            auto me = detail::eval_mode(field, t, w, q_own, q_cross);
            if (!me.ok) continue;
            bool duplicate = false;
            for (auto& [lam, ctr] : seen)
                if (std::abs(lam - me.lambda) <= 1e-9 * std::max(1.0, std::abs(me.lambda)) &&
                    std::abs(ctr - double(w)) <= 129.0)
                    duplicate = true;
            if (duplicate) continue;
            seen.emplace_back(me.lambda, double(w));
            mass = sl_add(mass, me.contrib_mass);
            u_own = sl_add(u_own, me.contrib_q1);
            u_cross = sl_add(u_cross, me.contrib_q2);
            sol.max_depth = std::max(sol.max_depth, me.depth);
            ++sol.modes_used;
        }
    };
    run_side(pos, sites.z1, -sites.z1, up_own, um_cross);
    run_side(neg, -sites.z1, sites.z1, um_own, up_cross);
    sol.u_plus = sl_add(up_own, up_cross);
    sol.u_minus = sl_add(um_own, um_cross);

    if (mass.sign <= 0) {
        sol.why = "non-positive total mass";
        return sol;
    }
    sol.log_mass = mass.log_abs;
    auto& ob = sol.obs;
    if (sol.u_plus.sign > 0 && sol.u_minus.sign > 0) {
        ob.log_ratio = sol.u_plus.log_abs - sol.u_minus.log_abs;
    } else {
        ob.ratio_finite = false;
        ob.log_ratio = kNaN;
    }
    const double vp = sol.u_plus.sign > 0 ? std::exp(sol.u_plus.log_abs - sol.log_mass) : 0.0;
    const double vm = sol.u_minus.sign > 0 ? std::exp(sol.u_minus.log_abs - sol.log_mass) : 0.0;
    ob.two_site_mass = vp + vm;
    ob.top_site_mass = std::max(vp, vm);
    if (!(ob.two_site_mass <= 1.0 + 1e-6)) {
        sol.why = "mass fraction above 1";
        return sol;
    }
    sol.valid = true;
    return sol;
}

}  // namespace pam
