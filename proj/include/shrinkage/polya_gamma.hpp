#pragma once

#include <cmath>
#include <numbers>

#include "linalg.hpp"
#include "rng.hpp"

namespace shrinkage {

/**
 * Exact PG(1, z) sampler: alternating-series accept/reject against a proposal
 * mixing a truncated exponential (right of t = 0.64) and a truncated inverse
 * Gaussian (left of t), following Devroye's construction for the Jacobi
 * distribution J*(1, z/2); PG(1, z) = J*(1, z/2) / 4.
 */
class PolyaGamma {
public:
    double draw(Rng& rng, double z) const
    {
        z = 0.5 * std::abs(z);
        const double fz = 0.125 * pi2 + 0.5 * z * z;
        while (true) {
            double x;
            if (rng.uniform() < exponential_mass(z)) {
                x = trunc + rng.exponential() / fz;
            } else {
                x = truncated_inverse_gaussian(rng, z);
            }
            double s = coefficient(0, x);
            const double y = rng.uniform() * s;
            for (int n = 1;; ++n) {
                if (n % 2 == 1) {
                    s -= coefficient(n, x);
                    if (y <= s) return 0.25 * x;
                } else {
                    s += coefficient(n, x);
                    if (y > s) break;
                }
            }
        }
    }

    /// E[PG(1, z)] = tanh(z/2) / (2z).
    static double mean(double z)
    {
        if (std::abs(z) < 1e-8) return 0.25;
        return std::tanh(0.5 * z) / (2.0 * z);
    }

    /// Var[PG(1, z)] = (sinh z - z) / (4 z^3 cosh^2(z/2)).
    static double variance(double z)
    {
        if (std::abs(z) < 1e-3) return 1.0 / 24.0;
        const double c = std::cosh(0.5 * z);
        return (std::sinh(z) - z) / (4.0 * z * z * z * c * c);
    }

private:
    static constexpr double pi2 = std::numbers::pi * std::numbers::pi;
    static constexpr double trunc = 0.64;

    // Probability of proposing from the exponential piece.
    static double exponential_mass(double z)
    {
        const double fz = 0.125 * pi2 + 0.5 * z * z;
        const double b = std::sqrt(1.0 / trunc) * (trunc * z - 1.0);
        const double a = -std::sqrt(1.0 / trunc) * (trunc * z + 1.0);
        const double x0 = std::log(fz) + fz * trunc;
        const double xb = x0 - z + std::log(normal_cdf(b));
        const double xa = x0 + z + std::log(normal_cdf(a));
        const double q_over_p = 4.0 / std::numbers::pi * (std::exp(xb) + std::exp(xa));
        return 1.0 / (1.0 + q_over_p);
    }

    static double truncated_inverse_gaussian(Rng& rng, double z)
    {
        double x = trunc + 1.0;
        if (1.0 / trunc > z) {
            // mu > trunc: sample truncated at trunc via the chi-square-like route
            double alpha = 0.0;
            while (rng.uniform() > alpha) {
                double e1 = rng.exponential(), e2 = rng.exponential();
                while (e1 * e1 > 2.0 * e2 / trunc) {
                    e1 = rng.exponential();
                    e2 = rng.exponential();
                }
                x = 1.0 + e1 * trunc;
                x = trunc / (x * x);
                alpha = std::exp(-0.5 * z * z * x);
            }
        } else {
            const double mu = 1.0 / z;
            while (x > trunc) {
                double y = rng.normal();
                y *= y;
                const double half_mu = 0.5 * mu;
                const double mu_y = mu * y;
                x = mu + half_mu * mu_y - half_mu * std::sqrt(4.0 * mu_y + mu_y * mu_y);
                if (rng.uniform() > mu / (mu + x)) x = mu * mu / x;
            }
        }
        return x;
    }

    // Piecewise coefficients of the alternating series for J*(1, 0).
    static double coefficient(int n, double x)
    {
        const double k = (n + 0.5) * std::numbers::pi;
        if (x > trunc) return k * std::exp(-0.5 * k * k * x);
        if (x > 0.0) {
            const double e = -1.5 * (std::log(0.5 * std::numbers::pi) + std::log(x)) + std::log(k)
                             - 2.0 * (n + 0.5) * (n + 0.5) / x;
            return std::exp(e);
        }
        return 0.0;
    }
};

}  // namespace shrinkage
