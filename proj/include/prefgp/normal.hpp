#pragma once

#include <cmath>
#include <numbers>

namespace prefgp::normal {

inline constexpr double kInvSqrt2Pi = 0.3989422804014327;  // 1/sqrt(2*pi)

// Below this z the direct erfc route loses too much relative accuracy, and
// the asymptotic Mills-ratio series is accurate to ~1e-12.
inline constexpr double kTailCutoff = -30.0;

inline double pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

inline double cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

namespace detail {
// Mills ratio Phi(-x)/phi(x) for large positive x.
inline double mills_ratio_tail(double x) {
    const double inv2 = 1.0 / (x * x);
    return (1.0 - inv2 * (1.0 - 3.0 * inv2 * (1.0 - 5.0 * inv2 * (1.0 - 7.0 * inv2)))) / x;
}
}  // namespace detail

/// log Phi(z), accurate in both tails.
inline double log_cdf(double z) {
    if (z > 0.0) return std::log1p(-0.5 * std::erfc(z / std::numbers::sqrt2));
    if (z > kTailCutoff) return std::log(cdf(z));
    return -0.5 * z * z + std::log(kInvSqrt2Pi) + std::log(detail::mills_ratio_tail(-z));
}

/// phi(z)/Phi(z), the derivative of log Phi.
inline double inverse_mills(double z) {
    if (z > kTailCutoff) return pdf(z) / cdf(z);
    return 1.0 / detail::mills_ratio_tail(-z);
}

}  // namespace prefgp::normal
