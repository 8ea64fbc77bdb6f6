#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "core.hpp"
#include "linalg.hpp"

namespace shrinkage {

namespace detail {

struct LeastSquares {
    VectorXd theta;  // (intercept, beta)
    double rss = 0.0;
};

/// Least squares on [1, X_S]; nullopt when the design is rank deficient.
inline std::optional<LeastSquares> least_squares(const MatrixXd& X, const VectorXd& y,
                                                  const std::vector<Index>& cols)
{
    MatrixXd W(X.rows(), static_cast<Index>(cols.size()) + 1);
    W.col(0).setOnes();
    for (std::size_t j = 0; j < cols.size(); ++j) W.col(static_cast<Index>(j) + 1) = X.col(cols[j]);
    Eigen::ColPivHouseholderQR<MatrixXd> qr(W);
    if (qr.rank() < W.cols()) return std::nullopt;
    LeastSquares ls;
    ls.theta = qr.solve(y);
    ls.rss = (y - W * ls.theta).squaredNorm();
    return ls;
}

inline void require_ols_size(const Dataset& d)
{
    if (d.n() <= d.p() + 1) {
        throw DataError("OLS needs n > p + 1 (n=" + std::to_string(d.n()) + ", p=" + std::to_string(d.p()) + ")");
    }
}

/// Embed a fit on a column subset into a full-width FitResult.
inline FitResult embed_subset_fit(const Dataset& d, const std::vector<Index>& cols, const LeastSquares& ls,
                                  std::string tag)
{
    const Index p = d.p();
    const Index k = static_cast<Index>(cols.size());
    const double n = static_cast<double>(d.n());
    MatrixXd W(d.n(), k + 1);
    W.col(0).setOnes();
    for (Index j = 0; j < k; ++j) W.col(j + 1) = d.X().col(cols[static_cast<std::size_t>(j)]);
    const double sigma2 = ls.rss / (n - static_cast<double>(k) - 1.0);
    MatrixXd cov_sub = sigma2 * spd_inverse(W.transpose() * W);

    FitResult fit;
    fit.method_tag = std::move(tag);
    fit.intercept = ls.theta(0);
    fit.beta = VectorXd::Zero(p);
    fit.sigma2 = sigma2;
    fit.lambda = VectorXd::Zero(1);
    fit.covariance = MatrixXd::Zero(p + 1, p + 1);
    std::vector<Index> full(static_cast<std::size_t>(k) + 1);
    full[0] = 0;
    for (Index j = 0; j < k; ++j) {
        fit.beta(cols[static_cast<std::size_t>(j)]) = ls.theta(j + 1);
        full[static_cast<std::size_t>(j) + 1] = cols[static_cast<std::size_t>(j)] + 1;
    }
    for (Index a = 0; a <= k; ++a) {
        for (Index b = 0; b <= k; ++b) {
            fit.covariance(full[static_cast<std::size_t>(a)], full[static_cast<std::size_t>(b)]) = cov_sub(a, b);
        }
    }
    return fit;
}

}  // namespace detail

/// Ordinary least squares with an unpenalized intercept.
inline FitResult fit_ols(const Dataset& d)
{
    detail::require_ols_size(d);
    std::vector<Index> cols(static_cast<std::size_t>(d.p()));
    for (Index j = 0; j < d.p(); ++j) cols[static_cast<std::size_t>(j)] = j;
    auto ls = detail::least_squares(d.X(), d.y(), cols);
    if (!ls) throw DataError("design matrix is rank deficient");
    return detail::embed_subset_fit(d, cols, *ls, "ols");
}

/// AIC as used by stepwise selection: n log(RSS/n) + 2 (k + 1).
inline double stepwise_aic(double rss, Index n, Index k)
{
    const double nn = static_cast<double>(n);
    const double r = std::max(rss, std::numeric_limits<double>::min());
    return nn * std::log(r / nn) + 2.0 * static_cast<double>(k + 1);
}

struct StepwiseResult {
    FitResult fit;
    std::vector<Index> selected;
    double aic = 0.0;
    double null_aic = 0.0;
};

/**
 * Forward-backward stepwise selection by AIC starting from the intercept-only
 * model. Each step takes the single add/drop move with lowest AIC; ties go to
 * the lowest column index. Stops when no move lowers AIC.
 */
inline StepwiseResult stepwise_search(const Dataset& d)
{
    detail::require_ols_size(d);
    const Index n = d.n();
    const Index p = d.p();
    std::vector<bool> in(static_cast<std::size_t>(p), false);

    auto selected = [&] {
        std::vector<Index> s;
        for (Index j = 0; j < p; ++j) {
            if (in[static_cast<std::size_t>(j)]) s.push_back(j);
        }
        return s;
    };

    auto current = detail::least_squares(d.X(), d.y(), {});
    StepwiseResult res;
    res.null_aic = stepwise_aic(current->rss, n, 0);
    double aic = res.null_aic;

    while (true) {
        double best_aic = aic;
        Index best_col = -1;
        std::optional<detail::LeastSquares> best_fit;
        for (Index j = 0; j < p; ++j) {
            in[static_cast<std::size_t>(j)] = !in[static_cast<std::size_t>(j)];
            auto cols = selected();
            in[static_cast<std::size_t>(j)] = !in[static_cast<std::size_t>(j)];
            if (static_cast<Index>(cols.size()) + 1 >= n) continue;
            auto ls = detail::least_squares(d.X(), d.y(), cols);
            if (!ls) continue;
            const double a = stepwise_aic(ls->rss, n, static_cast<Index>(cols.size()));
            if (a < best_aic) {
                best_aic = a;
                best_col = j;
                best_fit = std::move(ls);
            }
        }
        if (best_col < 0) break;
        in[static_cast<std::size_t>(best_col)] = !in[static_cast<std::size_t>(best_col)];
        aic = best_aic;
        current = std::move(best_fit);
    }

    res.selected = selected();
    res.aic = aic;
    res.fit = detail::embed_subset_fit(d, res.selected, *current, "step");
    return res;
}

inline FitResult fit_stepwise(const Dataset& d) { return stepwise_search(d).fit; }

}  // namespace shrinkage
