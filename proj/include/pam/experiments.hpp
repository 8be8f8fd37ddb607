#pragma once

#include <atomic>
#include <cstdio>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "pam/limit.hpp"
#include "pam/localisation.hpp"
#include "pam/modal.hpp"
#include "pam/pathsum.hpp"
#include "pam/stats.hpp"

namespace pam {

struct ExperimentConfig {
    RegimeProfile profile;
    double beta = 1.0;                 // reference scale for the critical limit law
    std::vector<double> t_grid;
    i64 replicates = 200;
    u64 base_seed = 1;
    int threads = 1;
    double trend_p = 0.05;             // significance for trend verdicts
    double gof_p = 0.001;              // significance for goodness-of-fit verdicts
    bool progress = false;

    double alpha() const { return profile.alpha; }
};

inline void validate_config(const ExperimentConfig& cfg, bool statistical = true) {
    if (cfg.t_grid.empty()) throw precondition_error("config: empty t grid");
    for (size_t i = 1; i < cfg.t_grid.size(); ++i)
        if (cfg.t_grid[i] <= cfg.t_grid[i - 1])
            throw precondition_error("config: t grid must be strictly increasing");
    if (statistical && cfg.replicates < 30)
        throw precondition_error("config: statistical verdicts need >= 30 replicates");
    if (cfg.threads < 1) throw precondition_error("config: threads must be >= 1");
}

// everything recorded about one replicate at one time point
struct ReplicateTime {
    double t = 0;
    bool ok = false;
    std::string error;
    // solution observables
    double log_ratio = kNaN;
    bool ratio_finite = false;
    double two_site_mass = 0, top_site_mass = 0;
    double log_mass = 0;
    int modes_used = 0;
    // maximisers / scales
    i64 z1 = -1, z2 = -1, z1_star = -1;
    double xi_z1 = 0, psi_z1 = 0;
    bool stable = true;
    // K set and moments
    double theta_t = 1;
    i64 k_plus = 0, k_minus = 0, n_z1 = 0;
    double zeta = 0, sum_diff = 0;
    double m_plus = 0, m_minus = 0, sig2_plus = 0, sig2_minus = 0;
    double m_bar = 0, s_bar_inv = 0;
    double q_plus = 0, q_minus = 0, q_t = 0;
    double var_qt = 0;  // |K+ u K-| * Var Q_t(z), quadrature-exact
    EventFlags events;
};

struct ReplicateResult {
    u64 seed = 0;
    std::vector<ReplicateTime> per_t;
};

struct Verdict {
    std::string suite;
    bool pass = false;
    std::string details;
    std::map<std::string, double> stats;
    std::vector<std::string> notes;
};

// one replicate at one t: field scan -> eigenmode propagator -> observables,
// K set, conditional moments, typicality events. Exceptions become failure
// records so a batch never aborts.
inline ReplicateTime run_replicate(const ExperimentConfig& cfg, u64 seed, double t,
                                   std::optional<double> eta_rt = std::nullopt) {
    ReplicateTime r;
    r.t = t;
    try {
        Scales scales = make_scales(t, cfg.alpha());
        const i64 rho0 = static_cast<i64>(std::ceil(4.0 * scales.g_t * scales.r_t));
        PotentialField field = build_potential(cfg.profile, 2 * rho0, seed);
        FieldScan scan = scan_field(field, t, scales);
        const auto& sites = scan.sites;
        r.z1 = sites.z1;
        r.z2 = sites.z2;
        r.z1_star = sites.z1_star;
        r.xi_z1 = sites.xi_z1;
        r.psi_z1 = sites.psi_z1;
        r.stable = sites.stable;

        ModalSolution sol = modal_solve(field, t, scales, scan);
        if (!sol.valid) throw numerical_error("propagator: " + sol.why);
        r.log_ratio = sol.obs.log_ratio;
        r.ratio_finite = sol.obs.ratio_finite;
        r.two_site_mass = sol.obs.two_site_mass;
        r.top_site_mass = sol.obs.top_site_mass;
        r.log_mass = sol.log_mass;
        r.modes_used = sol.modes_used;

        const RegimeKind regime = cfg.profile.kind == RegimeKind::Custom
                                      ? classify_regime(cfg.profile, {1000, 10000, 100000}).kind
                                      : cfg.profile.kind;
        const double th = theta(scales, cfg.profile, regime, eta_rt);
        SiteSetK kset = build_K(field, sites, th);
        r.theta_t = th;
        r.k_plus = static_cast<i64>(kset.k_plus.size());
        r.k_minus = static_cast<i64>(kset.k_minus.size());
        r.n_z1 = kset.n_z1;
        r.zeta = kset.zeta;
        r.sum_diff = kset.sum_diff;

        MomentStats ms = moment_stats(field, sites, kset, scales);
        r.m_plus = ms.m_plus;
        r.m_minus = ms.m_minus;
        r.sig2_plus = ms.sig2_plus;
        r.sig2_minus = ms.sig2_minus;
        r.m_bar = ms.m_bar;
        r.s_bar_inv = ms.s_bar_inv;
        r.q_plus = ms.q_plus;
        r.q_minus = ms.q_minus;
        r.q_t = ms.q_t;
        if (r.k_plus + r.k_minus > 0 && th / r.xi_z1 < 0.5)
            r.var_qt = (r.k_plus + r.k_minus) * analytic_q_variance(th, r.xi_z1, cfg.alpha());

        r.events = check_events(field, sites, kset, ms, scales, cfg.profile, regime, eta_rt);
        r.ok = true;
    } catch (const std::exception& e) {
        r.ok = false;
        r.error = e.what();
    }
    return r;
}

// deterministic batch: results indexed by seed offset, identical for any
// thread count (each replicate is a pure function of (config, seed)).
inline std::vector<ReplicateResult> run_batch(const ExperimentConfig& cfg) {
    validate_config(cfg, false);
    // eta(r_t) is seed-independent; compute once per t
    std::vector<double> eta_rt(cfg.t_grid.size());
    for (size_t i = 0; i < cfg.t_grid.size(); ++i) {
        Scales s = make_scales(cfg.t_grid[i], cfg.alpha());
        eta_rt[i] = eta(cfg.profile, static_cast<i64>(std::llround(s.r_t)));
    }

    std::vector<ReplicateResult> out(static_cast<size_t>(cfg.replicates));
    std::atomic<i64> next{0};
    std::atomic<i64> done{0};
    auto worker = [&]() {
        for (;;) {
            const i64 i = next.fetch_add(1);
            if (i >= cfg.replicates) return;
            ReplicateResult rr;
            rr.seed = cfg.base_seed + static_cast<u64>(i);
            for (size_t j = 0; j < cfg.t_grid.size(); ++j)
                rr.per_t.push_back(run_replicate(cfg, rr.seed, cfg.t_grid[j], eta_rt[j]));
            out[static_cast<size_t>(i)] = std::move(rr);
            const i64 d = done.fetch_add(1) + 1;
            if (cfg.progress && d % 25 == 0)
                std::fprintf(stderr, "  replicates %lld/%lld\n", static_cast<long long>(d),
                             static_cast<long long>(cfg.replicates));
        }
    };
    if (cfg.threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int k = 0; k < cfg.threads; ++k) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return out;
}

namespace detail {

// column of finite values of one per-t observable across a batch
template <class F>
inline std::vector<double> column(const std::vector<ReplicateResult>& batch, size_t ti, F&& get) {
    std::vector<double> v;
    for (const auto& rr : batch) {
        if (ti >= rr.per_t.size() || !rr.per_t[ti].ok) continue;
        const double x = get(rr.per_t[ti]);
        if (std::isfinite(x)) v.push_back(x);
    }
    return v;
}

inline RegimeKind checked_regime(const ExperimentConfig& cfg) {
    auto cls = classify_regime(cfg.profile, {1000, 31623, 1000000});
    if (cfg.profile.kind != RegimeKind::Custom && cls.kind != cfg.profile.kind)
        throw precondition_error("suite: profile regime does not match its classification");
    return cls.kind;
}

}  // namespace detail

// median two_site_mass non-decreasing across the t grid and > 0.9 at the top
inline Verdict localisation_suite(const ExperimentConfig& cfg,
                                  const std::vector<ReplicateResult>& batch) {
    validate_config(cfg);
    if (cfg.t_grid.size() < 3) throw precondition_error("localisation_suite: need >= 3 t values");
    Verdict v;
    v.suite = "localisation";
    std::vector<double> med;
    for (size_t i = 0; i < cfg.t_grid.size(); ++i) {
        auto col = detail::column(batch, i, [](const ReplicateTime& r) { return r.two_site_mass; });
        if (col.size() < 30) throw precondition_error("localisation_suite: too few valid replicates");
        med.push_back(median(col));
        v.stats["median_two_site_t" + std::to_string(i)] = med.back();
        // order-statistic 95% band around the median
        std::sort(col.begin(), col.end());
        const double n = static_cast<double>(col.size());
        const size_t lo = static_cast<size_t>(std::max(0.0, n / 2 - 0.98 * std::sqrt(n) - 1));
        const size_t hi = std::min(col.size() - 1, static_cast<size_t>(n / 2 + 0.98 * std::sqrt(n)));
        v.stats["ci_lo_t" + std::to_string(i)] = col[lo];
        v.stats["ci_hi_t" + std::to_string(i)] = col[hi];
    }
    bool mono = true;
    for (size_t i = 1; i < med.size(); ++i) mono = mono && med[i] >= med[i - 1] - 1e-12;
    const bool top = med.back() > 0.9;
    v.pass = mono && top;
    v.details = "median two-site mass " + std::to_string(med.back()) + " at largest t; " +
                (mono ? "non-decreasing" : "NOT monotone");
    return v;
}

// pooled Mann-Kendall trend of |log_ratio| across the t grid. Each replicate
// contributes its own short trajectory; S statistics are pooled across
// replicates, which is what gives the test power on a 3-point grid.
inline Verdict phase_suite(const ExperimentConfig& cfg,
                           const std::vector<ReplicateResult>& batch) {
    validate_config(cfg);
    const RegimeKind regime = detail::checked_regime(cfg);
    if (regime == RegimeKind::Critical)
        throw precondition_error("phase_suite: critical profile needs critical_suite");
    const int direction = regime == RegimeKind::Supercritical ? 1 : -1;

    Verdict v;
    v.suite = "phase";
    std::vector<std::vector<double>> series;
    bool all_zero = true;
    for (const auto& rr : batch) {
        std::vector<double> s;
        for (const auto& r : rr.per_t) {
            if (!r.ok || !r.ratio_finite || !std::isfinite(r.log_ratio)) break;
            s.push_back(std::abs(r.log_ratio));
            if (std::abs(r.log_ratio) > 1e-12) all_zero = false;
        }
        if (s.size() == cfg.t_grid.size()) series.push_back(std::move(s));
    }
    v.stats["series_used"] = static_cast<double>(series.size());
    for (size_t i = 0; i < cfg.t_grid.size(); ++i)
        v.stats["median_abs_log_ratio_t" + std::to_string(i)] = median(
            detail::column(batch, i, [](const ReplicateTime& r) { return std::abs(r.log_ratio); }));
    if (all_zero) {
        // fully duplicated inputs: the ratio is identically 1
        v.pass = direction == -1;
        v.details = "degenerate constant-zero |log_ratio|";
        v.notes.push_back("all replicates have |log_ratio| = 0; trend test degenerate");
        return v;
    }
    if (series.size() < 30) throw precondition_error("phase_suite: too few complete trajectories");
    TrendTest tt = mann_kendall_pooled(series, direction);
    v.stats["mk_s"] = tt.s;
    v.stats["mk_z"] = tt.z;
    v.stats["mk_p"] = tt.pvalue;
    v.pass = tt.pvalue < cfg.trend_p;
    v.details = std::string(direction == 1 ? "increasing" : "decreasing") +
                " |log_ratio| trend, one-sided p = " + std::to_string(tt.pvalue);
    return v;
}

// reference draws of the critical limit: sqrt(2 beta) * sigma * B * N
inline std::vector<double> critical_reference(double alpha, double beta, i64 n, u64 seed) {
    const double sigma2 = alpha > 2.0 ? alpha / ((alpha - 2.0) * (alpha - 1.0) * (alpha - 1.0)) : 1.0;
    const double scale = std::sqrt(2.0 * beta) * std::sqrt(sigma2);
    auto bs = sample_limit_B(alpha, n, seed);
    CounterRng rng(seed, 0xb5297a4d);
    std::vector<double> out;
    out.reserve(static_cast<size_t>(n));
    for (const auto& s : bs) out.push_back(scale * s.b * rng.normal());
    return out;
}

// two-sample KS distance of log_ratio against the simulated limit reference,
// non-increasing in t and below 0.15 at the largest t
inline Verdict critical_suite(const ExperimentConfig& cfg,
                              const std::vector<ReplicateResult>& batch) {
    validate_config(cfg);
    if (cfg.replicates < 200) throw precondition_error("critical_suite: underpowered, need >= 200");
    if (detail::checked_regime(cfg) != RegimeKind::Critical)
        throw precondition_error("critical_suite: profile is not critical");
    Verdict v;
    v.suite = "critical";
    const auto ref = critical_reference(cfg.alpha(), cfg.beta, 20000, cfg.base_seed ^ 0x9d2c5680u);
    std::vector<double> ks;
    for (size_t i = 0; i < cfg.t_grid.size(); ++i) {
        auto col = detail::column(batch, i, [](const ReplicateTime& r) {
            return r.ratio_finite ? r.log_ratio : kNaN;
        });
        if (col.size() < 100) throw precondition_error("critical_suite: too few valid replicates");
        ks.push_back(ks_two_sample_statistic(col, ref));
        v.stats["ks_t" + std::to_string(i)] = ks.back();
        v.stats["n_t" + std::to_string(i)] = static_cast<double>(col.size());
    }
    bool mono = true;
    for (size_t i = 1; i < ks.size(); ++i) mono = mono && ks[i] <= ks[i - 1] + 1e-12;
    v.pass = mono && ks.back() <= 0.15;
    v.stats["ks_final"] = ks.back();
    v.details = "KS to limit reference " + std::to_string(ks.back()) + " at largest t; " +
                (mono ? "non-increasing" : "NOT monotone");
    v.notes.push_back("finite-t convergence is slow; trend plus 0.15 threshold is the contract");
    return v;
}

// conditional CLT of Q sums: simulate the conditional law directly and KS
// the normalized sums against the standard normal
inline Verdict clt_suite(double alpha, double theta_over_xi, i64 k_size, u64 seed,
                         i64 n_sums = 500) {
    if (k_size < 1000) throw precondition_error("clt_suite: k_size must be >= 1000");
    if (!(theta_over_xi > 0.0 && theta_over_xi <= 1e-2))
        throw precondition_error("clt_suite: need theta/xi <= 1e-2");
    const double s = theta_over_xi;
    const double m1 = analytic_q_moments(s, 1.0, alpha, 1).exact;
    const double var = analytic_q_variance(s, 1.0, alpha);
    if (!(var > 0.0)) throw std::domain_error("clt_suite: degenerate variance");

    std::vector<double> v_stats;
    v_stats.reserve(static_cast<size_t>(n_sums));
    for (i64 i = 0; i < n_sums; ++i) {
        CounterRng rng(seed, static_cast<u64>(i) + 0x632be59bull);
        // V_t is the K+ sum minus the K- sum with |K+| = |K-| = k/2: the
        // signed difference is symmetric, which is what makes the normal
        // limit reachable at moderate k (the single-sum skew does not cancel)
        double sum = 0.0;
        for (i64 k = 0; k < k_size; ++k) {
            // xi/xi1 conditioned above theta/xi1: scaled Pareto tail
            const double y = s * std::pow(1.0 - rng.uniform(), -1.0 / alpha);
            const double q = y < 1.0 ? -std::log1p(-y) : 0.0;
            sum += (k < k_size / 2 ? 1.0 : -1.0) * (q - m1);
        }
        v_stats.push_back(sum / std::sqrt(static_cast<double>(k_size) * var));
    }
    auto phi = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
    const double d = ks_statistic(v_stats, phi);
    Verdict v;
    v.suite = "clt";
    v.stats["ks"] = d;
    v.stats["ks_p"] = ks_pvalue_one_sample(d, v_stats.size());
    v.pass = d < 0.05;
    v.details = "KS to standard normal = " + std::to_string(d);
    return v;
}

// conditional variance of Q_t across the grid: decreasing (sub), increasing
// (super), or matching the 2 beta sigma^2 B^2 reference by KS trend (critical)
inline Verdict variance_suite(const ExperimentConfig& cfg,
                              const std::vector<ReplicateResult>& batch) {
    validate_config(cfg);
    if (cfg.replicates < 200) throw precondition_error("variance_suite: underpowered, need >= 200");
    const RegimeKind regime = detail::checked_regime(cfg);
    Verdict v;
    v.suite = "variance";
    if (regime == RegimeKind::Critical) {
        const double alpha = cfg.alpha();
        const double sigma2 =
            alpha > 2.0 ? alpha / ((alpha - 2.0) * (alpha - 1.0) * (alpha - 1.0)) : 1.0;
        auto bs = sample_limit_B(alpha, 20000, cfg.base_seed ^ 0xca01f9ddu);
        std::vector<double> ref;
        for (const auto& b : bs) ref.push_back(2.0 * cfg.beta * sigma2 * b.b * b.b);
        std::vector<double> ks;
        for (size_t i = 0; i < cfg.t_grid.size(); ++i) {
            auto col = detail::column(batch, i, [](const ReplicateTime& r) { return r.var_qt; });
            if (col.size() < 100) throw precondition_error("variance_suite: too few replicates");
            ks.push_back(ks_two_sample_statistic(col, ref));
            v.stats["ks_t" + std::to_string(i)] = ks.back();
        }
        bool mono = true;
        for (size_t i = 1; i < ks.size(); ++i) mono = mono && ks[i] <= ks[i - 1] + 1e-12;
        v.pass = mono;
        v.stats["ks_final"] = ks.back();
        v.details = "KS to 2 beta sigma^2 B^2 reference, " +
                    std::string(mono ? "non-increasing" : "NOT monotone");
        return v;
    }
    const int direction = regime == RegimeKind::Supercritical ? 1 : -1;
    std::vector<std::vector<double>> series;
    std::vector<double> med;
    for (size_t i = 0; i < cfg.t_grid.size(); ++i)
        med.push_back(median(
            detail::column(batch, i, [](const ReplicateTime& r) { return r.var_qt; })));
    for (const auto& rr : batch) {
        std::vector<double> s;
        for (const auto& r : rr.per_t)
            if (r.ok && std::isfinite(r.var_qt)) s.push_back(r.var_qt);
        if (s.size() == cfg.t_grid.size()) series.push_back(std::move(s));
    }
    if (series.size() < 30) throw precondition_error("variance_suite: too few trajectories");
    TrendTest tt = mann_kendall_pooled(series, direction);
    for (size_t i = 0; i < med.size(); ++i) v.stats["median_var_t" + std::to_string(i)] = med[i];
    v.stats["mk_p"] = tt.pvalue;
    v.pass = tt.pvalue < cfg.trend_p;
    v.details = std::string(direction == 1 ? "increasing" : "decreasing") +
                " conditional variance trend, p = " + std::to_string(tt.pvalue);
    return v;
}

// chi-square of box counts of the rescaled potential point process against
// the Poisson law with quadrature/closed-form mean
inline Verdict point_process_suite(const RegimeProfile& profile, double s, i64 n_fields,
                                   const std::vector<Box>& boxes, u64 base_seed,
                                   bool critical_marks = false, double beta = 1.0,
                                   double gof_p = 0.001) {
    if (n_fields < 100) throw precondition_error("point_process_suite: need >= 100 fields");
    const double alpha = profile.alpha;
    const double rho = rho_of(alpha);
    for (const auto& b : boxes) {
        if (!(b.x1 > b.x0) || b.x0 < 0.0 || !(b.y0 > 0.0) || !(b.y1 > b.y0))
            throw precondition_error("point_process_suite: invalid box");
        if (!critical_marks && b.y0 <= rho * b.x1)
            throw precondition_error("point_process_suite: box touches the y = rho x boundary");
    }
    const i64 L = static_cast<i64>(std::ceil(s * 2.5));
    for (const auto& b : boxes)
        if (b.x1 * s > static_cast<double>(L))
            throw precondition_error("point_process_suite: box beyond field window");

    Verdict v;
    v.suite = critical_marks ? "point_process_nondup" : "point_process";
    v.pass = true;
    for (size_t bi = 0; bi < boxes.size(); ++bi) {
        const Box& b = boxes[bi];
        const double mu = critical_marks ? box_mean_nondup(b, alpha, beta) : box_mean_dup(b, alpha);
        std::map<i64, i64> hist;
        for (i64 f = 0; f < n_fields; ++f) {
            PotentialField field = build_potential(profile, L, base_seed + static_cast<u64>(f));
            const i64 c = critical_marks ? count_box_nondup(field, s, b) : count_box_dup(field, s, b);
            ++hist[c];
        }
        const i64 kmax = hist.empty() ? 0 : hist.rbegin()->first;
        std::vector<double> obs(static_cast<size_t>(kmax) + 2, 0.0), expd(obs.size(), 0.0);
        for (auto& [k, c] : hist) obs[static_cast<size_t>(k)] = static_cast<double>(c);
        double pk = std::exp(-mu), cum = 0.0;
        for (i64 k = 0; k <= kmax; ++k) {
            expd[static_cast<size_t>(k)] = n_fields * pk;
            cum += pk;
            pk *= mu / (k + 1);
        }
        expd.back() = n_fields * std::max(1.0 - cum, 1e-300);  // >= kmax+1 tail
        ChiSquare cs = chi_square_gof(obs, expd);
        v.stats["mu_box" + std::to_string(bi)] = mu;
        v.stats["chi2_box" + std::to_string(bi)] = cs.stat;
        v.stats["p_box" + std::to_string(bi)] = cs.pvalue;
        if (!(cs.pvalue > gof_p)) v.pass = false;
    }
    v.details = v.pass ? "all box counts consistent with Poisson means"
                       : "some box count rejected at the goodness-of-fit level";
    return v;
}

struct HeuristicReport {
    double q_t = 0;           // thresholded first-order sum
    double taylor_proxy = 0;  // xi(Z1)^{-1} sum of xi(z) - xi(-z) over E below Z1
    double log_ratio = 0;
    double gap_q_ratio = 0;        // |log_ratio - q_t|
    double gap_q_taylor = 0;       // |q_t - taylor_proxy|
    double second_order_bound = 0; // (zeta/xi(Z1)) * (|Q+| + |Q-|)
};

inline HeuristicReport heuristic_diagnostics(const ReplicateTime& r) {
    HeuristicReport h;
    h.q_t = r.q_t;
    h.taylor_proxy = r.xi_z1 > 0 ? r.sum_diff / r.xi_z1 : 0.0;
    h.log_ratio = r.ratio_finite ? r.log_ratio : kNaN;
    h.gap_q_ratio = std::abs(h.log_ratio - h.q_t);
    h.gap_q_taylor = std::abs(h.q_t - h.taylor_proxy);
    h.second_order_bound = r.xi_z1 > 0 ? (r.zeta / r.xi_z1) * (r.q_plus + r.q_minus) : 0.0;
    return h;
}

// lambda(t)^{1/2} zeta_t / a_t^{2/alpha}; 0 with flag when E is empty below Z1
inline double zeta_statistic(const ReplicateTime& r, const Scales& scales, bool* empty_e = nullptr) {
    if (empty_e) *empty_e = r.zeta <= 0.0;
    if (r.zeta <= 0.0) return 0.0;
    return std::sqrt(scales.lambda_t) * r.zeta / std::pow(scales.a_t, 2.0 / scales.alpha);
}

}  // namespace pam
