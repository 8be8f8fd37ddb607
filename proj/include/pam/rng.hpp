#pragma once

#include "pam/common.hpp"

namespace pam {

// Counter-based site-addressed RNG: every uniform is a pure function of
// (seed, site, stream), so fields are window-extensible and replicates can
// be generated in any order on any thread.
enum class Stream : u64 {
    Base = 0x243f6a8885a308d3ull,    // xi0(n), n >= 0
    Mirror = 0x13198a2e03707344ull,  // independent value at -n when n is non-duplicated
    Dup = 0xa4093822299f31d0ull,     // duplication coin for site n
    Aux = 0x082efa98ec4e6c89ull,     // scratch stream for samplers
};

constexpr u64 mix64(u64 x) {
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdull;
    x ^= x >> 33;
    x *= 0xc4ceb9fe1a85ec53ull;
    x ^= x >> 33;
    return x;
}

constexpr u64 site_bits(u64 seed, i64 site, Stream stream) {
    u64 h = mix64(seed ^ static_cast<u64>(stream));
    h = mix64(h ^ (static_cast<u64>(site) * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull));
    return h;
}

// Uniform in [0, 1) with 53 random bits.
constexpr double site_uniform(u64 seed, i64 site, Stream stream) {
    return static_cast<double>(site_bits(seed, site, stream) >> 11) * 0x1.0p-53;
}

// Inverse CDF of the Pareto law F(x) = 1 - x^{-alpha}, x >= 1.
inline double pareto_quantile(double u, double alpha) {
    if (!(u >= 0.0 && u < 1.0)) throw std::domain_error("pareto_quantile: u must be in [0,1)");
    if (!(alpha >= 2.0)) throw precondition_error("pareto_quantile: alpha must be >= 2");
    return std::exp(-std::log1p(-u) / alpha);
}

// Small sequential generator built on the same counter primitive; used by
// samplers that need a stream of uniforms rather than site-addressed ones.
class CounterRng {
  public:
    CounterRng(u64 seed, u64 sequence) : seed_(mix64(seed ^ mix64(sequence))), ctr_(0) {}
    double uniform() { return site_uniform(seed_, static_cast<i64>(ctr_++), Stream::Aux); }
    // standard normal via Box-Muller (fresh pair each call, cache the spare)
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform(), u2 = uniform();
        while (u1 == 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }
    u64 poisson(double mean) {
        // inversion for small means, PTRS-style normal approx fallback not
        // needed at the means used here; use simple multiplication method
        if (mean < 0) throw std::domain_error("poisson: negative mean");
        if (mean < 30.0) {
            double limit = std::exp(-mean), prod = uniform();
            u64 k = 0;
            while (prod > limit) {
                prod *= uniform();
                ++k;
            }
            return k;
        }
        // split recursively: Poisson(a+b) = Poisson(a) + Poisson(b)
        return poisson(mean / 2) + poisson(mean / 2);
    }

  private:
    u64 seed_;
    u64 ctr_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace pam
