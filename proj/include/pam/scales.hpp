#pragma once

#include <optional>

#include "pam/profile.hpp"

namespace pam {

// Deterministic scale functions of (t, alpha):
//   r_t = (t/log t)^{alpha/(alpha-1)}   (spatial scale of Z1)
//   a_t = (t/log t)^{1/(alpha-1)}       (potential scale), r_t = a_t^alpha
//   f_t = (loglog t)^{-1/2}, g_t = (loglog t)^{1/2}
//   lambda_t = 1 (alpha > 2) or log t (alpha = 2)
struct Scales {
    double t = 0;
    double alpha = 0;
    double r_t = 0;
    double a_t = 0;
    double lambda_t = 1;
    double f_t = 0;
    double g_t = 0;
    double R_t = 0;  // Z1 * (1 + f_t), set once Z1 is known

    double lambda_at(double s) const { return alpha > 2.0 ? 1.0 : std::log(s); }
};

inline Scales make_scales(double t, double alpha) {
    if (!(t > std::exp(2.0))) throw std::domain_error("make_scales: t must exceed e^2");
    if (!(alpha >= 2.0)) throw precondition_error("make_scales: alpha must be >= 2");
    Scales s;
    s.t = t;
    s.alpha = alpha;
    double base = t / std::log(t);
    s.a_t = std::pow(base, 1.0 / (alpha - 1.0));
    s.r_t = std::pow(base, alpha / (alpha - 1.0));
    s.lambda_t = alpha > 2.0 ? 1.0 : std::log(t);
    double ll = std::log(std::log(t));
    s.f_t = 1.0 / std::sqrt(ll);
    s.g_t = std::sqrt(ll);
    return s;
}

inline double psi(double t, i64 z, double xi_z) {
    return xi_z - (static_cast<double>(z >= 0 ? z : -z) / t) * std::log(xi_z);
}

// Threshold theta_t splitting K_t off the bulk of non-duplicated sites.
// eta_rt = eta(profile, round(r_t)) may be passed in to avoid re-summation.
inline double theta(const Scales& s, const RegimeProfile& profile, RegimeKind regime,
                    std::optional<double> eta_rt = std::nullopt) {
    double th = 1.0;
    if (regime == RegimeKind::Supercritical) {
        double e = eta_rt ? *eta_rt : eta(profile, static_cast<i64>(std::llround(s.r_t)));
        if (s.alpha > 2.0) {
            th = s.f_t * std::pow(e / std::pow(s.r_t, 2.0 / s.alpha), 1.0 / (s.alpha - 2.0));
        } else {
            th = s.a_t * std::exp(-s.r_t / (e * s.f_t));
        }
    }
    return std::max(th, 1.0);
}

}  // namespace pam
