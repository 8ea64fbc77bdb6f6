#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "bayes.hpp"
#include "core.hpp"
#include "linalg.hpp"
#include "polya_gamma.hpp"
#include "rng.hpp"

namespace shrinkage {

struct LogisticFit {
    double intercept = 0.0;
    VectorXd beta;
    std::string method_tag;
    bool converged = false;
    int iterations = 0;
    double lambda = 0.0;  // ridge penalty used, if any
    std::vector<std::string> warnings;

    Index p() const { return beta.size(); }
};

inline double inv_logit(double eta)
{
    const double e = std::exp(-std::abs(eta));
    return eta >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
}

inline double logit(double prob) { return std::log(prob / (1.0 - prob)); }

/// log(1 + exp(eta)) without overflow.
inline double log1p_exp(double eta) { return eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

inline void require_binary(const VectorXd& y)
{
    for (Index i = 0; i < y.size(); ++i) {
        if (y(i) != 0.0 && y(i) != 1.0) throw DataError("logistic response must be 0/1");
    }
}

struct LogisticNewtonOptions {
    double lambda = 0.0;   // (lambda/2)|beta|^2, intercept unpenalized
    bool firth = false;    // add 1/2 log|I(theta)|
    int max_iter = 50;
    double grad_tol = 1e-8;
    double step_tol = 1e-6;
    double divergence = 1e3;
    double max_step = std::numeric_limits<double>::infinity();
};

namespace detail {

inline double logistic_loglik(const MatrixXd& W, const VectorXd& y, const VectorXd& theta)
{
    const VectorXd eta = W * theta;
    double ll = 0.0;
    for (Index i = 0; i < eta.size(); ++i) ll += y(i) * eta(i) - log1p_exp(eta(i));
    return ll;
}

struct NewtonState {
    double objective = -std::numeric_limits<double>::infinity();
    VectorXd score;
    MatrixXd info;  // including ridge term
    bool ok = false;
};

inline NewtonState logistic_state(const MatrixXd& W, const VectorXd& y, const VectorXd& theta,
                                  const LogisticNewtonOptions& opt)
{
    NewtonState st;
    const Index q = W.cols();
    const VectorXd eta = W * theta;
    VectorXd prob(eta.size()), w(eta.size());
    for (Index i = 0; i < eta.size(); ++i) {
        prob(i) = inv_logit(eta(i));
        w(i) = prob(i) * (1.0 - prob(i));
    }
    const MatrixXd fisher = W.transpose() * w.asDiagonal() * W;
    st.info = fisher;
    for (Index k = 1; k < q; ++k) st.info(k, k) += opt.lambda;
    VectorXd resid = y - prob;
    st.objective = logistic_loglik(W, y, theta) - 0.5 * opt.lambda * theta.tail(q - 1).squaredNorm();
    if (opt.firth) {
        Eigen::LLT<MatrixXd> llt(fisher);
        if (llt.info() != Eigen::Success) return st;
        const MatrixXd Winv = llt.solve(W.transpose());  // I^{-1} W'
        for (Index i = 0; i < W.rows(); ++i) {
            const double h = w(i) * W.row(i).dot(Winv.col(i));
            resid(i) += h * (0.5 - prob(i));
        }
        st.objective += llt.matrixLLT().diagonal().array().log().sum();
    }
    st.score = W.transpose() * resid;
    for (Index k = 1; k < q; ++k) st.score(k) -= opt.lambda * theta(k);
    st.ok = std::isfinite(st.objective);
    return st;
}

}  // namespace detail

/**
 * Newton-Raphson on the (penalized) logistic log-likelihood with step halving.
 * Converged when the score is below grad_tol and the Newton step below
 * step_tol; stops unconverged when |beta| exceeds the divergence bound.
 */
inline LogisticFit newton_logistic(const Dataset& d, const LogisticNewtonOptions& opt, std::string tag,
                                   VectorXd start = {})
{
    require_binary(d.y());
    const MatrixXd W = with_intercept(d.X());
    const Index q = W.cols();
    VectorXd theta = start.size() == q ? start : VectorXd::Zero(q);
    if (start.size() != q) {
        const double ybar = std::clamp(d.y().mean(), 1e-3, 1.0 - 1e-3);
        theta(0) = logit(ybar);
    }
    LogisticFit fit;
    fit.method_tag = std::move(tag);
    fit.lambda = opt.lambda;
    auto st = detail::logistic_state(W, d.y(), theta, opt);
    for (int it = 0; it < opt.max_iter; ++it) {
        fit.iterations = it + 1;
        Eigen::LDLT<MatrixXd> ldlt(st.info);
        VectorXd step = ldlt.solve(st.score);
        if (!step.allFinite()) break;
        if (st.score.cwiseAbs().maxCoeff() < opt.grad_tol && step.cwiseAbs().maxCoeff() < opt.step_tol) {
            fit.converged = true;
            break;
        }
        const double big = step.cwiseAbs().maxCoeff();
        if (big > opt.max_step) step *= opt.max_step / big;
        double t = 1.0;
        detail::NewtonState next;
        VectorXd cand;
        for (int h = 0; h < 30; ++h, t *= 0.5) {
            cand = theta + t * step;
            next = detail::logistic_state(W, d.y(), cand, opt);
            if (next.ok && next.objective >= st.objective - 1e-12 * std::abs(st.objective)) break;
        }
        theta = cand;
        st = next;
        if (theta.tail(q - 1).cwiseAbs().maxCoeff() > opt.divergence) {
            fit.warnings.push_back("coefficients diverged (separation)");
            break;
        }
        if (!st.ok) break;
    }
    if (!fit.converged && st.ok && fit.iterations == opt.max_iter) {
        Eigen::LDLT<MatrixXd> ldlt(st.info);
        const VectorXd step = ldlt.solve(st.score);
        fit.converged = st.score.cwiseAbs().maxCoeff() < opt.grad_tol && step.cwiseAbs().maxCoeff() < opt.step_tol;
    }
    fit.intercept = theta(0);
    fit.beta = theta.tail(q - 1);
    return fit;
}

/// Maximum likelihood; non-convergence (e.g. separation) is reported, not thrown.
inline LogisticFit fit_logistic_ml(const Dataset& d)
{
    LogisticNewtonOptions opt;
    opt.max_iter = 50;
    return newton_logistic(d, opt, "ml");
}

/// Firth's bias-reduced logistic regression via the modified score.
inline LogisticFit fit_logistic_firth(const Dataset& d)
{
    LogisticNewtonOptions opt;
    opt.firth = true;
    opt.max_iter = 200;
    opt.max_step = 5.0;
    auto fit = newton_logistic(d, opt, "firth");
    if (!fit.converged) throw Error("Firth iterations did not converge within " + std::to_string(opt.max_iter));
    return fit;
}

/// Ridge logistic regression: minimizes -loglik + (lambda/2)|beta|^2.
inline LogisticFit fit_logistic_ridge(const Dataset& d, double lambda, VectorXd start = {})
{
    if (!(lambda >= 0.0)) throw Error("ridge penalty must be >= 0");
    LogisticNewtonOptions opt;
    opt.lambda = lambda;
    opt.max_iter = 200;
    auto fit = newton_logistic(d, opt, "ridge", std::move(start));
    if (!fit.converged && lambda > 0.0) throw Error("penalized IRLS did not converge");
    return fit;
}

struct LogisticCvResult {
    LogisticFit fit;
    std::vector<double> grid;
    std::vector<double> cv_deviance;
    std::size_t selected = 0;
};

/// Default ridge grid: 100 log-spaced values from 1000 max|X_c'(y - ybar)| down by 1e-4.
inline std::vector<double> logistic_ridge_grid(const Dataset& d, int size = 100, double ratio = 1e-4)
{
    const VectorXd yc = d.y().array() - d.y().mean();
    const MatrixXd Xc = centered(d.X(), column_means(d.X()));
    double lmax = 1000.0 * (Xc.transpose() * yc).cwiseAbs().maxCoeff();
    if (!(lmax > 0.0)) lmax = 1.0;
    std::vector<double> grid(static_cast<std::size_t>(size));
    for (int k = 0; k < size; ++k) {
        grid[static_cast<std::size_t>(k)] = size == 1 ? lmax : lmax * std::pow(ratio, static_cast<double>(k) / (size - 1));
    }
    return grid;
}

/**
 * Ridge penalty by K-fold cross-validated deviance. Folds are reshuffled (up
 * to 20 attempts) until every training fold contains both classes.
 */
inline LogisticCvResult logistic_ridge_cv(const Dataset& d, int folds, std::uint64_t seed,
                                          std::vector<double> grid = {})
{
    require_binary(d.y());
    if (folds < 2) throw Error("ridgeCV needs at least 2 folds");
    if (d.n() < folds) throw DataError("ridgeCV needs n >= folds");
    if (grid.empty()) grid = logistic_ridge_grid(d);
    const auto n = static_cast<std::size_t>(d.n());

    Rng rng(child_seed(seed, stream::folds));
    std::vector<int> fold_of(n);
    bool ok = false;
    for (int attempt = 0; attempt < 20 && !ok; ++attempt) {
        auto perm = rng.permutation(n);
        for (std::size_t i = 0; i < n; ++i) fold_of[perm[i]] = static_cast<int>(i % static_cast<std::size_t>(folds));
        ok = true;
        for (int f = 0; f < folds && ok; ++f) {
            double ones = 0.0, count = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (fold_of[i] != f) {
                    ones += d.y()(static_cast<Index>(i));
                    count += 1.0;
                }
            }
            ok = ones > 0.0 && ones < count;
        }
    }
    if (!ok) throw DataError("could not build CV folds with both classes in every training fold");

    std::vector<double> dev(grid.size(), 0.0);
    for (int f = 0; f < folds; ++f) {
        std::vector<std::size_t> train, valid;
        for (std::size_t i = 0; i < n; ++i) (fold_of[i] == f ? valid : train).push_back(i);
        const Dataset tr = d.rows(train), va = d.rows(valid);
        VectorXd warm;
        for (std::size_t l = 0; l < grid.size(); ++l) {
            auto fit = fit_logistic_ridge(tr, grid[l], warm);
            warm.resize(fit.p() + 1);
            warm(0) = fit.intercept;
            warm.tail(fit.p()) = fit.beta;
            const VectorXd eta = linear_predictor(fit.intercept, fit.beta, va.X());
            for (Index i = 0; i < eta.size(); ++i) {
                dev[l] += 2.0 * (log1p_exp(eta(i)) - va.y()(i) * eta(i));
            }
        }
    }
    for (double& v : dev) v /= static_cast<double>(n);

    LogisticCvResult res;
    res.grid = grid;
    res.cv_deviance = dev;
    res.selected = static_cast<std::size_t>(std::min_element(dev.begin(), dev.end()) - dev.begin());
    res.fit = fit_logistic_ridge(d, grid[res.selected]);
    res.fit.method_tag = "ridgecv";
    return res;
}

inline LogisticFit fit_logistic_ridge_cv(const Dataset& d, int folds, std::uint64_t seed, std::vector<double> grid = {})
{
    return logistic_ridge_cv(d, folds, seed, std::move(grid)).fit;
}

namespace detail {

inline ChainOutput run_logistic_chain(const MatrixXd& W, const VectorXd& y, const PriorSpec& prior,
                                      const McmcConfig& cfg, std::uint64_t seed)
{
    Rng rng(seed);
    const PolyaGamma pg;
    const Index q = W.cols(), p = q - 1, n = W.rows();
    const int G = prior.structure.groups();
    const Index kept = cfg.kept_per_chain();
    ChainOutput out;
    out.beta0.resize(kept);
    out.sigma2 = VectorXd::Ones(kept);
    out.beta.resize(kept, p);
    out.tau2.resize(kept, G);
    out.nu.resize(kept, G);

    GroupScales scales(prior, rng);
    const VectorXd kappa = y.array() - 0.5;
    const VectorXd Wk = W.transpose() * kappa;
    VectorXd theta = VectorXd::Zero(q);
    theta(0) = logit(std::clamp(y.mean(), 0.05, 0.95));
    VectorXd omega(n), z(q);
    Index stored = 0;
    for (int it = 0; it < cfg.iterations; ++it) {
        const VectorXd eta = W * theta;
        for (Index i = 0; i < n; ++i) omega(i) = pg.draw(rng, eta(i));
        MatrixXd P = W.transpose() * omega.asDiagonal() * W;
        P.diagonal().tail(p) += scales.precision();
        Eigen::LLT<MatrixXd> llt(P);
        if (llt.info() != Eigen::Success) throw Error("posterior precision matrix is numerically singular");
        const VectorXd mean = llt.solve(Wk);
        for (Index k = 0; k < q; ++k) z(k) = rng.normal();
        theta = mean + llt.matrixU().solve(z);
        scales.update(rng, theta.tail(p), 1.0);

        if (it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0 && stored < kept) {
            out.beta0(stored) = theta(0);
            out.beta.row(stored) = theta.tail(p).transpose();
            out.tau2.row(stored) = scales.tau2().transpose();
            out.nu.row(stored) = scales.nu().transpose();
            ++stored;
        }
    }
    return out;
}

}  // namespace detail

/**
 * Bayesian logistic regression via Polya-Gamma augmentation: omega | theta ~
 * PG(1, eta), theta | omega Gaussian, then the group-scale updates with
 * sigma^2 = 1. The intercept has a flat prior.
 */
inline PosteriorDraws fit_logistic_bayes(const Dataset& d, const PriorSpec& prior, const McmcConfig& cfg)
{
    require_binary(d.y());
    prior.validate(d.p());
    const MatrixXd W = with_intercept(d.X());
    auto draws = detail::assemble_chains(cfg, d.p(), prior.structure.groups(), [&](std::uint64_t seed) {
        return detail::run_logistic_chain(W, d.y(), prior, cfg, seed);
    });
    if (cfg.diagnostics) detail::add_diagnostics(draws, false);
    return draws;
}

inline VectorXd predict_prob(const LogisticFit& fit, const MatrixXd& X)
{
    VectorXd eta = linear_predictor(fit.intercept, fit.beta, X);
    return eta.unaryExpr([](double e) { return inv_logit(e); });
}

/// Posterior mean probability (average of per-draw probabilities).
inline VectorXd predict_prob(const PosteriorDraws& draws, const MatrixXd& X)
{
    require_columns(X, draws.p());
    const Index m = X.rows(), block = 64;
    VectorXd out(m);
    for (Index start = 0; start < m; start += block) {
        const Index len = std::min(block, m - start);
        MatrixXd eta = draws.beta * X.middleRows(start, len).transpose();
        eta.colwise() += draws.beta0;
        for (Index j = 0; j < len; ++j) {
            double s = 0.0;
            for (Index t = 0; t < eta.rows(); ++t) s += inv_logit(eta(t, j));
            out(start + j) = s / static_cast<double>(eta.rows());
        }
    }
    return out;
}

}  // namespace shrinkage
