#pragma once

#include <utility>
#include <vector>

#include "pam/profile.hpp"
#include "pam/rng.hpp"

namespace pam {

// Duplicated Pareto potential on the window [-L, L].
//
// xi0(n) ~ Pareto(alpha) for n >= 0 (stream Base). Site n >= 1 is duplicated
// (n in D) iff the Dup coin is below p(n); then xi(-n) = xi(n) exactly.
// Otherwise xi(-n) is an independent Pareto value (stream Mirror).
// Values are derived per site from the counter RNG, so any window extension
// reproduces previously generated sites bit-exactly; accessors are lazy and
// the object is immutable and thread-safe.
class PotentialField {
  public:
    PotentialField() = default;

    // generated field
    PotentialField(RegimeProfile profile, i64 L, u64 seed)
        : alpha_(profile.alpha), L_(L), seed_(seed), profile_(std::move(profile)), generated_(true) {
        if (L < 1) throw precondition_error("PotentialField: window must be >= 1");
    }

    // explicit field (tests, file loads): xi over [-L, L], dup mask over [0, L]
    static PotentialField from_values(double alpha, std::vector<double> xi,
                                      std::vector<char> dup_mask) {
        if (xi.size() % 2 != 1 || xi.empty())
            throw precondition_error("from_values: xi must cover [-L, L]");
        PotentialField f;
        f.alpha_ = alpha;
        f.L_ = static_cast<i64>(xi.size() / 2);
        f.generated_ = false;
        f.xi_ = std::move(xi);
        f.dup_ = std::move(dup_mask);
        if (f.dup_.size() != static_cast<size_t>(f.L_) + 1)
            throw precondition_error("from_values: dup mask must cover [0, L]");
        f.dup_[0] = 1;
        return f;
    }

    double alpha() const { return alpha_; }
    i64 window() const { return L_; }
    u64 seed() const { return seed_; }
    bool generated() const { return generated_; }
    const RegimeProfile& profile() const { return profile_; }

    // raw uniforms (generated mode), exposed for threshold-screened scans
    double u_base(i64 n) const { return site_uniform(seed_, n, Stream::Base); }
    double u_mirror(i64 n) const { return site_uniform(seed_, n, Stream::Mirror); }

    bool is_dup(i64 n) const {
        check_window(n);
        if (n == 0) return true;
        if (!generated_) return dup_[static_cast<size_t>(n)] != 0;
        return site_uniform(seed_, n, Stream::Dup) < profile_.p(n);
    }

    // base draw xi0(n), n >= 0 (equals xi(n))
    double xi0(i64 n) const {
        check_window(n);
        if (!generated_) return xi_[static_cast<size_t>(L_ + n)];
        return pareto_quantile(u_base(n), alpha_);
    }

    double xi(i64 z) const {
        i64 n = z >= 0 ? z : -z;
        check_window(n);
        if (!generated_) return xi_[static_cast<size_t>(L_ + z)];
        if (z >= 0 || is_dup(n)) return pareto_quantile(u_base(n), alpha_);
        return pareto_quantile(u_mirror(n), alpha_);
    }

  private:
    void check_window(i64 n) const {
        if (n > L_ || n < -L_) throw insufficient_window_error("site outside field window");
    }

    double alpha_ = 3.0;
    i64 L_ = 0;
    u64 seed_ = 0;
    RegimeProfile profile_;
    bool generated_ = false;
    std::vector<double> xi_;   // explicit mode only
    std::vector<char> dup_;    // explicit mode only
};

inline PotentialField build_potential(const RegimeProfile& profile, i64 L, u64 seed) {
    return PotentialField(profile, L, seed);
}

// N(n) = |E ∩ [1, n]|
inline i64 count_nondup(const PotentialField& field, i64 n) {
    if (n < 0 || n > field.window()) throw insufficient_window_error("count_nondup: n outside window");
    i64 c = 0;
    for (i64 z = 1; z <= n; ++z) c += !field.is_dup(z);
    return c;
}

}  // namespace pam
