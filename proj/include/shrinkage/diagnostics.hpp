#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "core.hpp"

namespace shrinkage {

// Chain-based convergence diagnostics. Input matrices hold one chain per
// column, draws in rows.

namespace detail {

inline MatrixXd split_chains(const MatrixXd& chains)
{
    const Index half = chains.rows() / 2;
    MatrixXd out(half, 2 * chains.cols());
    for (Index m = 0; m < chains.cols(); ++m) {
        out.col(2 * m) = chains.col(m).head(half);
        out.col(2 * m + 1) = chains.col(m).segment(chains.rows() - half, half);
    }
    return out;
}

inline double sample_variance(const VectorXd& v)
{
    const double mean = v.mean();
    return (v.array() - mean).square().sum() / static_cast<double>(v.size() - 1);
}

}  // namespace detail

/// Split potential scale reduction factor.
inline double split_rhat(const MatrixXd& chains)
{
    const MatrixXd s = detail::split_chains(chains);
    const Index n = s.rows(), m = s.cols();
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    VectorXd means = s.colwise().mean().transpose();
    double W = 0.0;
    for (Index j = 0; j < m; ++j) W += detail::sample_variance(s.col(j));
    W /= static_cast<double>(m);
    const double B_over_n = detail::sample_variance(means);
    if (!(W > 0.0)) return 1.0;
    const double var_plus = (static_cast<double>(n) - 1.0) / static_cast<double>(n) * W + B_over_n;
    return std::sqrt(var_plus / W);
}

/// Effective sample size from combined-chain autocorrelations, truncated by
/// Geyer's initial monotone positive sequence.
inline double effective_sample_size(const MatrixXd& chains)
{
    const Index n = chains.rows(), m = chains.cols();
    if (n < 4) return static_cast<double>(n * m);
    MatrixXd c = chains.rowwise() - chains.colwise().mean();
    double W = 0.0;
    for (Index j = 0; j < m; ++j) W += c.col(j).squaredNorm() / static_cast<double>(n - 1);
    W /= static_cast<double>(m);
    const double B_over_n = m > 1 ? detail::sample_variance(chains.colwise().mean().transpose()) : 0.0;
    const double var_plus = (static_cast<double>(n) - 1.0) / static_cast<double>(n) * W + B_over_n;
    if (!(var_plus > 0.0)) return static_cast<double>(n * m);

    auto rho = [&](Index t) {
        double acov = 0.0;
        for (Index j = 0; j < m; ++j) {
            acov += c.col(j).head(n - t).dot(c.col(j).tail(n - t)) / static_cast<double>(n);
        }
        acov /= static_cast<double>(m);
        return 1.0 - (W - acov) / var_plus;
    };

    double sum = 0.0;
    double prev_pair = std::numeric_limits<double>::infinity();
    for (Index t = 0; t + 1 < n; t += 2) {
        double pair = rho(t) + rho(t + 1);
        if (pair <= 0.0) break;
        pair = std::min(pair, prev_pair);
        sum += pair;
        prev_pair = pair;
    }
    const double tau = std::max(-1.0 + 2.0 * sum, 1.0 / std::log10(static_cast<double>(n * m)));
    return static_cast<double>(n * m) / tau;
}

struct ParameterDiagnostics {
    std::string name;
    double ess = 0.0;
    double rhat = 1.0;
};

}  // namespace shrinkage
