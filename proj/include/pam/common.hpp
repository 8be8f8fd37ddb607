#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace pam {

using i64 = std::int64_t;
using u64 = std::uint64_t;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct insufficient_window_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct degenerate_maximiser_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct precondition_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Signed value carried as (sign, log|x|); log_abs = -inf encodes zero.
struct SignedLog {
    double log_abs = -kInf;
    int sign = 0;

    static SignedLog zero() { return {}; }
    static SignedLog from(double x) {
        if (x == 0.0) return {};
        return {std::log(std::abs(x)), x > 0 ? 1 : -1};
    }
    double value() const {
        return sign == 0 ? 0.0 : sign * std::exp(log_abs);
    }
};

// x + y in signed-log representation.
inline SignedLog sl_add(SignedLog a, SignedLog b) {
    if (a.sign == 0) return b;
    if (b.sign == 0) return a;
    if (a.log_abs < b.log_abs) std::swap(a, b);
    double d = b.log_abs - a.log_abs;  // <= 0
    if (a.sign == b.sign) return {a.log_abs + std::log1p(std::exp(d)), a.sign};
    double m = -std::expm1(d);  // 1 - exp(d) in [0,1]
    if (m == 0.0) return {};
    return {a.log_abs + std::log(m), a.sign};
}

inline SignedLog sl_mul(SignedLog a, SignedLog b) {
    if (a.sign == 0 || b.sign == 0) return {};
    return {a.log_abs + b.log_abs, a.sign * b.sign};
}

// log(sum exp(v_i)) over possibly empty list; -inf for empty.
inline double log_sum_exp(const std::vector<double>& v) {
    double m = -kInf;
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

}  // namespace pam
