#pragma once

#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "pam/potential.hpp"
#include "pam/rng.hpp"

namespace pam {

inline double rho_of(double alpha) { return 1.0 / (alpha - 1.0); }

struct LimitSample {
    double b = 0;   // (x1)^{1/alpha} / y1
    double x1 = 0;
    double y1 = 0;
};

// Joint density of the penalized-maximum pair (X1, Y1):
//   p(x, y) = alpha y^{-alpha-1} exp{-(y - rho x)^{1-alpha}},  y > rho x > 0.
inline double limit_density(double x, double y, double alpha) {
    const double rho = rho_of(alpha);
    if (!(x > 0.0) || !(y > rho * x)) return 0.0;
    // evaluate in log space: near the support boundary pow(y, -a-1) can
    // overflow while the exp factor underflows, and their product is nan
    const double le = std::log(alpha) - (alpha + 1.0) * std::log(y) -
                      std::pow(y - rho * x, 1.0 - alpha);
    return std::isnan(le) ? 0.0 : std::exp(le);
}

// integral of limit_density over its support, by nested tanh-sinh quadrature
// after substituting g = y - rho x (the inner integral then decays in g).
inline double limit_density_normalization(double alpha) {
    const double rho = rho_of(alpha);
    boost::math::quadrature::tanh_sinh<double> quad;
    auto inner = [&](double x) {
        auto f = [&](double g) { return limit_density(x, rho * x + g, alpha); };
        return quad.integrate(f, 0.0, std::numeric_limits<double>::infinity());
    };
    return quad.integrate(inner, 0.0, std::numeric_limits<double>::infinity());
}

// integral of limit_density over [x0,x1] x [y0,y1]
inline double limit_density_box_mass(double x0, double x1, double y0, double y1, double alpha) {
    boost::math::quadrature::tanh_sinh<double> quad;
    const double rho = rho_of(alpha);
    auto inner = [&](double x) {
        const double lo = std::max(y0, rho * x);
        if (lo >= y1) return 0.0;
        auto f = [&](double y) { return limit_density(x, y, alpha); };
        return quad.integrate(f, lo, y1);
    };
    return quad.integrate(inner, x0, x1);
}

// Exact draw of (X1, Y1): simulate the Poisson process of intensity
// dx alpha y^{-alpha-1} dy on nested wedges G_eps = {y > rho x + eps, x > 0},
// mu(G_eps) = eps^{1-alpha}, take the point maximising the gap y - rho x, and
// halve eps until the best gap exceeds eps (no point further out can win).
inline std::vector<LimitSample> sample_limit_B(double alpha, i64 n_samples, u64 seed) {
    if (!(alpha >= 2.0)) throw precondition_error("sample_limit_B: alpha must be >= 2");
    if (n_samples < 1) throw precondition_error("sample_limit_B: need n_samples >= 1");
    const double rho = rho_of(alpha);
    std::vector<LimitSample> out;
    out.reserve(static_cast<size_t>(n_samples));
    for (i64 i = 0; i < n_samples; ++i) {
        CounterRng rng(seed, static_cast<u64>(i) + 1);
        // one point of G_eps: x from marginal (rho x + eps)^{-alpha} dx, then
        // y | x Pareto-tail above rho x + eps
        auto draw_point = [&](double eps, double& x, double& y, double& gap) {
            x = (eps / rho) * (std::pow(1.0 - rng.uniform(), -1.0 / (alpha - 1.0)) - 1.0);
            y = (rho * x + eps) * std::pow(1.0 - rng.uniform(), -1.0 / alpha);
            gap = y - rho * x;
        };
        double eps = 1.0;
        double bx = 0, by = 0, bgap = -kInf;
        u64 n0 = rng.poisson(std::pow(eps, 1.0 - alpha));
        for (u64 k = 0; k < n0; ++k) {
            double x, y, g;
            draw_point(eps, x, y, g);
            if (g > bgap) bgap = g, bx = x, by = y;
        }
        int iters = 0;
        while (!(bgap > eps)) {
            if (++iters > 60) throw numerical_error("sample_limit_B: wedge iteration cap");
            const double eps2 = eps / 2.0;
            const double mu_strip = std::pow(eps2, 1.0 - alpha) - std::pow(eps, 1.0 - alpha);
            const u64 ns = rng.poisson(mu_strip);
            for (u64 k = 0; k < ns; ++k) {
                // strip point = G_{eps2} draw conditioned on gap <= eps
                double x, y, g;
                do {
                    draw_point(eps2, x, y, g);
                } while (g > eps);
                if (g > bgap) bgap = g, bx = x, by = y;
            }
            eps = eps2;
        }
        out.push_back(LimitSample{std::pow(bx, 1.0 / alpha) / by, bx, by});
    }
    return out;
}

// ---- rescaled point-process box counting ----

struct Box {
    double x0 = 0, x1 = 0;
    double y0 = 0;
    double y1 = kInf;  // kInf = half-infinite box [x0,x1] x [y0, inf)
};

// Poisson mean of a box under the duplicated-pair intensity dx alpha y^{-a-1} dy
inline double box_mean_dup(const Box& b, double alpha) {
    if (!(b.x1 > b.x0) || b.x0 < 0.0 || !(b.y0 > 0.0) || !(b.y1 > b.y0))
        throw precondition_error("box_mean_dup: invalid box");
    const double ytail = std::pow(b.y0, -alpha) - (std::isfinite(b.y1) ? std::pow(b.y1, -alpha) : 0.0);
    return (b.x1 - b.x0) * ytail;
}

// Poisson mean under the critical non-duplicated intensity
// (2 beta / alpha) x^{2/alpha - 1} dx  alpha y^{-alpha-1} dy  (alpha > 2)
inline double box_mean_nondup(const Box& b, double alpha, double beta) {
    if (!(b.x1 > b.x0) || b.x0 < 0.0 || !(b.y0 > 0.0) || !(b.y1 > b.y0))
        throw precondition_error("box_mean_nondup: invalid box");
    const double ytail = std::pow(b.y0, -alpha) - (std::isfinite(b.y1) ? std::pow(b.y1, -alpha) : 0.0);
    const double xmass = beta * (std::pow(b.x1, 2.0 / alpha) - std::pow(b.x0, 2.0 / alpha));
    return xmass * ytail;
}

// count points of the rescaled duplicated-pair process {(n/s, xi0(n)/s^{1/a})}
// over n in D, n >= 1, inside the box
inline i64 count_box_dup(const PotentialField& field, double s, const Box& b) {
    const double alpha = field.alpha();
    i64 cnt = 0;
    const i64 n_lo = std::max<i64>(1, static_cast<i64>(std::ceil(b.x0 * s)));
    const i64 n_hi = static_cast<i64>(std::floor(b.x1 * s));
    if (n_hi > field.window()) throw insufficient_window_error("count_box_dup: window too small");
    const double y_scale = std::pow(s, 1.0 / alpha);
    for (i64 n = n_lo; n <= n_hi; ++n) {
        if (!field.is_dup(n)) continue;
        const double y = field.xi0(n) / y_scale;
        if (y >= b.y0 && y < b.y1) ++cnt;
    }
    return cnt;
}

// count points of the rescaled non-duplicated process over n in E, n >= 1:
// xi0(n)/s^{2/alpha^2} (alpha > 2) or xi0(n)/sqrt(s/log s) (alpha = 2)
inline i64 count_box_nondup(const PotentialField& field, double s, const Box& b) {
    const double alpha = field.alpha();
    i64 cnt = 0;
    const i64 n_lo = std::max<i64>(1, static_cast<i64>(std::ceil(b.x0 * s)));
    const i64 n_hi = static_cast<i64>(std::floor(b.x1 * s));
    if (n_hi > field.window()) throw insufficient_window_error("count_box_nondup: window too small");
    const double y_scale = alpha > 2.0 ? std::pow(s, 2.0 / (alpha * alpha))
                                       : std::sqrt(s / std::log(s));
    for (i64 n = n_lo; n <= n_hi; ++n) {
        if (field.is_dup(n)) continue;
        const double y = field.xi0(n) / y_scale;
        if (y >= b.y0 && y < b.y1) ++cnt;
    }
    return cnt;
}

}  // namespace pam
