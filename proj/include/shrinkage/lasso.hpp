#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "core.hpp"
#include "linalg.hpp"
#include "rng.hpp"

namespace shrinkage {

struct LassoSpec {
    int folds = 10;
    std::vector<double> lambda_grid;  // strictly decreasing; empty = default grid
    int grid_size = 100;
    double min_ratio = 1e-3;
    double tolerance = 1e-12;
    int max_sweeps = 100000;
};

inline double soft_threshold(double z, double t)
{
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

/// Smallest lambda with an all-zero solution: max_j |X_j'(y - ybar)| / n.
inline double lasso_lambda_max(const MatrixXd& X, const VectorXd& y)
{
    const VectorXd yc = y.array() - y.mean();
    const MatrixXd Xc = centered(X, column_means(X));
    return (Xc.transpose() * yc).cwiseAbs().maxCoeff() / static_cast<double>(X.rows());
}

inline std::vector<double> lasso_default_grid(double lambda_max, int size, double min_ratio)
{
    std::vector<double> grid(static_cast<std::size_t>(size));
    if (size == 1) {
        grid[0] = lambda_max;
        return grid;
    }
    const double lo = std::log(min_ratio);
    for (int k = 0; k < size; ++k) {
        grid[static_cast<std::size_t>(k)] = lambda_max * std::exp(lo * k / (size - 1));
    }
    return grid;
}

/**
 * Coordinate-descent lasso path for (1/(2n)) RSS + lambda * sum |beta_j| with an
 * unpenalized intercept. Returns one (intercept, beta) column per grid value,
 * warm-started along the grid.
 */
class LassoPath {
public:
    LassoPath(const MatrixXd& X, const VectorXd& y, const LassoSpec& spec)
        : means_(column_means(X)), ybar_(y.mean()), Xc_(centered(X, means_)), spec_(spec)
    {
        yc_ = y.array() - ybar_;
        const double n = static_cast<double>(X.rows());
        v_ = Xc_.colwise().squaredNorm().transpose() / n;
    }

    /// Solve at each lambda; returns p x L matrix of betas.
    MatrixXd solve(const std::vector<double>& grid)
    {
        const Index p = Xc_.cols();
        const double n = static_cast<double>(Xc_.rows());
        MatrixXd betas(p, static_cast<Index>(grid.size()));
        VectorXd beta = VectorXd::Zero(p);
        VectorXd resid = yc_;
        for (std::size_t l = 0; l < grid.size(); ++l) {
            const double lambda = grid[l];
            for (int sweep = 0; sweep < spec_.max_sweeps; ++sweep) {
                double max_change = 0.0;
                for (Index j = 0; j < p; ++j) {
                    if (v_(j) <= 0.0) continue;
                    const double old = beta(j);
                    const double z = Xc_.col(j).dot(resid) / n + v_(j) * old;
                    const double fresh = soft_threshold(z, lambda) / v_(j);
                    if (fresh != old) {
                        resid -= (fresh - old) * Xc_.col(j);
                        beta(j) = fresh;
                        max_change = std::max(max_change, std::abs(fresh - old) * std::sqrt(v_(j)));
                    }
                }
                if (max_change < spec_.tolerance) break;
            }
            betas.col(static_cast<Index>(l)) = beta;
        }
        return betas;
    }

    double intercept(const VectorXd& beta) const { return ybar_ - means_.dot(beta); }

private:
    VectorXd means_;
    double ybar_;
    MatrixXd Xc_;
    VectorXd yc_;
    VectorXd v_;
    LassoSpec spec_;
};

namespace detail {

inline FitResult lasso_fit_result(const Dataset& d, const LassoPath& path, const VectorXd& beta, double lambda)
{
    FitResult fit;
    fit.method_tag = "lasso";
    fit.beta = beta;
    fit.intercept = path.intercept(beta);
    const double rss = (d.y() - linear_predictor(fit, d.X())).squaredNorm();
    const Index df = (beta.array() != 0.0).count();
    const double dof = static_cast<double>(d.n() - df - 1);
    fit.sigma2 = dof > 0 ? rss / dof : rss / static_cast<double>(d.n());
    if (!(fit.sigma2 > 0)) fit.sigma2 = std::numeric_limits<double>::min();
    fit.lambda = VectorXd::Constant(1, lambda);
    fit.covariance = MatrixXd::Zero(d.p() + 1, d.p() + 1);
    fit.warnings.push_back("lasso provides no coefficient covariance");
    return fit;
}

}  // namespace detail

/// Lasso at a single fixed lambda.
inline FitResult fit_lasso(const Dataset& d, double lambda, const LassoSpec& spec = {})
{
    if (!(lambda >= 0.0)) throw Error("lasso lambda must be >= 0");
    LassoPath path(d.X(), d.y(), spec);
    const double lmax = lasso_lambda_max(d.X(), d.y());
    // warm start from lambda_max for stability at small lambda
    std::vector<double> grid;
    if (lambda < lmax) {
        grid = lasso_default_grid(lmax, 20, std::max(lambda / lmax, 1e-12));
    }
    grid.push_back(lambda);
    MatrixXd betas = path.solve(grid);
    return detail::lasso_fit_result(d, path, betas.col(betas.cols() - 1), lambda);
}

struct LassoCvResult {
    FitResult fit;
    std::vector<double> grid;
    std::vector<double> cv_error;
    std::size_t selected = 0;
};

/// K-fold CV over a decreasing lambda grid; refit at lambda.min on all data.
inline LassoCvResult lasso_cv(const Dataset& d, const LassoSpec& spec, std::uint64_t seed)
{
    const Index n = d.n();
    if (spec.folds < 2) throw Error("lasso needs at least 2 folds");
    if (n < spec.folds) throw DataError("lasso CV needs n >= folds");
    std::vector<double> grid = spec.lambda_grid;
    if (grid.empty()) {
        if (spec.grid_size < 1) throw Error("empty lambda grid");
        double lmax = lasso_lambda_max(d.X(), d.y());
        if (!(lmax > 0.0)) lmax = 1e-8;
        grid = lasso_default_grid(lmax, spec.grid_size, spec.min_ratio);
    }
    if (grid.empty()) throw Error("empty lambda grid");
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (!(grid[k] > 0.0)) throw Error("lambda grid must be positive");
        if (k > 0 && !(grid[k] < grid[k - 1])) throw Error("lambda grid must be strictly decreasing");
    }

    Rng rng(child_seed(seed, stream::folds));
    auto perm = rng.permutation(static_cast<std::size_t>(n));
    std::vector<int> fold_of(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < perm.size(); ++i) fold_of[perm[i]] = static_cast<int>(i % static_cast<std::size_t>(spec.folds));

    std::vector<double> err(grid.size(), 0.0);
    for (int f = 0; f < spec.folds; ++f) {
        std::vector<std::size_t> train, valid;
        for (Index i = 0; i < n; ++i) {
            (fold_of[static_cast<std::size_t>(i)] == f ? valid : train).push_back(static_cast<std::size_t>(i));
        }
        if (valid.size() < 2 || train.size() < 2) throw DataError("CV fold with fewer than 2 observations");
        Dataset tr = d.rows(train);
        Dataset va = d.rows(valid);
        LassoPath path(tr.X(), tr.y(), spec);
        MatrixXd betas = path.solve(grid);
        for (std::size_t l = 0; l < grid.size(); ++l) {
            VectorXd b = betas.col(static_cast<Index>(l));
            VectorXd pred = linear_predictor(path.intercept(b), b, va.X());
            err[l] += (va.y() - pred).squaredNorm() / static_cast<double>(valid.size());
        }
    }
    for (double& e : err) e /= spec.folds;

    LassoCvResult res;
    res.grid = grid;
    res.cv_error = err;
    res.selected = static_cast<std::size_t>(std::min_element(err.begin(), err.end()) - err.begin());
    LassoPath full(d.X(), d.y(), spec);
    std::vector<double> upto(grid.begin(), grid.begin() + static_cast<std::ptrdiff_t>(res.selected) + 1);
    MatrixXd betas = full.solve(upto);
    res.fit = detail::lasso_fit_result(d, full, betas.col(betas.cols() - 1), grid[res.selected]);
    return res;
}

inline FitResult fit_lasso_cv(const Dataset& d, const LassoSpec& spec, std::uint64_t seed)
{
    return lasso_cv(d, spec, seed).fit;
}

}  // namespace shrinkage
