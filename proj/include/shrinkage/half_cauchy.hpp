#pragma once

#include <cmath>
#include <numbers>

#include "rng.hpp"

namespace shrinkage {

// Half-Cauchy C+(0, s) on a standard deviation tau, written as the scale
// mixture tau^2 | nu ~ IG(1/2, 1/nu), nu ~ IG(1/2, 1/s^2). Both full
// conditionals are inverse-gamma, so the pair is updated by Gibbs.

/// tau^2 | nu, coefficients: IG((m+1)/2, 1/nu + ss/2), ss = sum beta_k^2 / sigma^2 over the group.
inline double draw_tau2_half_cauchy(Rng& rng, double nu, int group_size, double scaled_ss)
{
    return rng.inv_gamma(0.5 * (group_size + 1), 1.0 / nu + 0.5 * scaled_ss);
}

/// nu | tau^2 ~ IG(1, 1/s^2 + 1/tau^2).
inline double draw_nu_half_cauchy(Rng& rng, double tau2, double scale)
{
    return rng.inv_gamma(1.0, 1.0 / (scale * scale) + 1.0 / tau2);
}

/// tau^2 | coefficients under tau^2 ~ IG(a, b).
inline double draw_tau2_inverse_gamma(Rng& rng, double a, double b, int group_size, double scaled_ss)
{
    return rng.inv_gamma(a + 0.5 * group_size, b + 0.5 * scaled_ss);
}

inline double half_cauchy_cdf(double tau, double scale)
{
    return tau <= 0.0 ? 0.0 : 2.0 / std::numbers::pi * std::atan(tau / scale);
}

inline double half_cauchy_quantile(double prob, double scale)
{
    return scale * std::tan(0.5 * std::numbers::pi * prob);
}

}  // namespace shrinkage
