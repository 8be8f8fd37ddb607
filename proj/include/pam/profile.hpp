#pragma once

#include <algorithm>
#include <functional>

#include "pam/common.hpp"

namespace pam {

enum class RegimeKind { Subcritical, Critical, Supercritical, Custom };

inline const char* regime_name(RegimeKind k) {
    switch (k) {
        case RegimeKind::Subcritical: return "subcritical";
        case RegimeKind::Critical: return "critical";
        case RegimeKind::Supercritical: return "supercritical";
        default: return "custom";
    }
}

// Duplication-failure profile q(n): site n is non-duplicated with probability
// q(n), duplicated with probability p(n) = 1 - q(n).
//
// Built-ins:
//   Critical(alpha, beta): q(n) = min(1, (2*beta/alpha) * n^{2/alpha - 1})
//                          (alpha = 2: q(n) = min(1, beta / log(n+2)))
//     so that eta(n) ~ beta * kappa(n).
//   Subcritical:   q(n) = n^{-(1 - 1/alpha)}    -> eta ~ alpha * n^{1/alpha} << kappa
//   Supercritical: q(n) = n^{-eps}, eps = max(0.05, (1 - 2/alpha)/4)
//                                                -> eta ~ n^{1-eps} >> kappa
struct RegimeProfile {
    double alpha = 3.0;
    RegimeKind kind = RegimeKind::Critical;
    double beta = 1.0;                         // Critical only
    std::function<double(i64)> q_custom;       // Custom only
    i64 n0 = 8;                                // q non-increasing beyond here

    static RegimeProfile critical(double alpha, double beta) {
        RegimeProfile p;
        p.alpha = alpha;
        p.kind = RegimeKind::Critical;
        p.beta = beta;
        return p;
    }
    static RegimeProfile subcritical(double alpha) {
        RegimeProfile p;
        p.alpha = alpha;
        p.kind = RegimeKind::Subcritical;
        return p;
    }
    static RegimeProfile supercritical(double alpha) {
        RegimeProfile p;
        p.alpha = alpha;
        p.kind = RegimeKind::Supercritical;
        return p;
    }
    static RegimeProfile custom(double alpha, std::function<double(i64)> q) {
        RegimeProfile p;
        p.alpha = alpha;
        p.kind = RegimeKind::Custom;
        p.q_custom = std::move(q);
        return p;
    }

    double q(i64 n) const {
        if (n < 1) return 0.0;  // 0 is always duplicated by convention
        double v;
        switch (kind) {
            case RegimeKind::Critical:
                v = alpha > 2.0 ? (2.0 * beta / alpha) * std::pow(double(n), 2.0 / alpha - 1.0)
                                : beta / std::log(double(n) + 2.0);
                break;
            case RegimeKind::Subcritical:
                v = std::pow(double(n), -(1.0 - 1.0 / alpha));
                break;
            case RegimeKind::Supercritical:
                v = std::pow(double(n), -std::max(0.05, (1.0 - 2.0 / alpha) / 4.0));
                break;
            default:
                v = q_custom ? q_custom(n) : 0.0;
                break;
        }
        return std::clamp(v, 0.0, 1.0);
    }

    double p(i64 n) const { return 1.0 - q(n); }
};

// eta(n) = sum_{z=1}^{n} q(z), by direct summation.
inline double eta(const RegimeProfile& profile, i64 n) {
    if (n < 0) throw std::domain_error("eta: n must be >= 0");
    double s = 0.0;
    for (i64 z = 1; z <= n; ++z) s += profile.q(z);
    return s;
}

// Critical scale: n^{2/alpha} for alpha > 2, n / log n for alpha = 2.
inline double kappa(double alpha, i64 n) {
    if (n < 2) throw std::domain_error("kappa: n must be >= 2");
    if (alpha > 2.0) return std::pow(double(n), 2.0 / alpha);
    return double(n) / std::log(double(n));
}

struct RegimeClassification {
    RegimeKind kind;
    double beta_hat;  // meaningful for Critical only
    std::vector<double> ratios;
};

// Estimate the limit of eta(n)/kappa(n) over increasing probes.
inline RegimeClassification classify_regime(const RegimeProfile& profile,
                                            const std::vector<i64>& n_probe) {
    if (n_probe.size() < 3) throw precondition_error("classify_regime: need >= 3 probes");
    for (size_t i = 1; i < n_probe.size(); ++i)
        if (n_probe[i] <= n_probe[i - 1])
            throw precondition_error("classify_regime: probes must be increasing");

    std::vector<double> r;
    double s = 0.0;
    i64 z = 1;
    for (i64 n : n_probe) {
        for (; z <= n; ++z) s += profile.q(z);
        r.push_back(s / kappa(profile.alpha, n));
    }
    const size_t m = r.size();
    const double up = r.back() / r.front();
    // trend tolerance: treat < 35% drift across all probes as flat
    bool mono_inc = true, mono_dec = true;
    for (size_t i = 1; i < m; ++i) {
        if (r[i] < r[i - 1] * 0.999) mono_inc = false;
        if (r[i] > r[i - 1] * 1.001) mono_dec = false;
    }
    RegimeClassification out{RegimeKind::Custom, 0.0, r};
    if (r.back() <= 0.0) {
        // no duplication failures at all: eta/kappa -> 0
        out.kind = RegimeKind::Subcritical;
        return out;
    }
    if (up > 2.0 && mono_inc) {
        out.kind = RegimeKind::Supercritical;
    } else if (up < 0.5 && mono_dec) {
        out.kind = RegimeKind::Subcritical;
    } else if (up < 1.35 && up > 1.0 / 1.35) {
        out.kind = RegimeKind::Critical;
        out.beta_hat = r.back();
    } else {
        throw numerical_error("classify_regime: inconclusive ratio trend");
    }
    return out;
}

}  // namespace pam
