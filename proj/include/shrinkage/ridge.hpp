#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "core.hpp"
#include "linalg.hpp"
#include "optimize.hpp"

namespace shrinkage {

enum class MarginalLikelihood { reml, ml };
enum class RidgeOptimizer { grid, nelder_mead, newton };

/**
 * Multi-penalty ridge specification. Penalized objective is
 * RSS + sum_g lambda_g sum_{k in g} beta_k^2 with an unpenalized intercept.
 */
struct RidgeSpec {
    PenaltyStructure structure;
    RidgeOptimizer optimizer = RidgeOptimizer::nelder_mead;
    MarginalLikelihood criterion = MarginalLikelihood::reml;
    double log_lambda_lo = -10.0;
    double log_lambda_hi = 14.0;
    double tolerance = 1e-7;  // simplex diameter on log-lambda scale
    int restarts = 3;
    int max_iter = 5000;
    int grid_points = 200;
    double fd_step = 1e-4;

    void validate() const
    {
        if (!(log_lambda_lo < log_lambda_hi)) throw Error("ridge bounds need lo < hi");
        if (!(tolerance > 0.0)) throw Error("ridge tolerance must be > 0");
        if (restarts < 1) throw Error("ridge needs at least one start");
    }
};

/// Raised when the penalty optimizer exhausts its budget; carries the best fit found.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, FitResult best) : Error(what), best_(std::move(best)) {}
    const FitResult& best_so_far() const { return best_; }

private:
    FitResult best_;
};

/**
 * Log marginal likelihood of y as a function of the log-penalties of the
 * estimated groups, with beta_k ~ N(0, sigma^2 / lambda_g(k)) integrated out,
 * zero-penalty columns and the intercept treated as fixed effects, and sigma^2
 * profiled out. Values are exact up to an additive constant independent of lambda.
 *
 * With W = [1, X], S = diag(0, lambda_g(k)), A = W'W + S and f the number of
 * zero-penalty columns of W:
 *   REML: -1/2 [ (n-f) log(RSS_pen/(n-f)) + log|A| - sum_{lambda_k>0} log lambda_k + (n-f)(1+log 2pi) ]
 *   ML:   -1/2 [ n log(RSS_pen/n) + log|Z'Z + D| - sum log lambda_k + n(1+log 2pi) ]
 * where RSS_pen = |y - W theta|^2 + theta' S theta at the penalized solution.
 */
class RidgeCriterion {
public:
    struct Solution {
        VectorXd theta;       // (intercept, beta)
        VectorXd col_lambda;  // per coefficient
        double rss_pen = 0.0;
        double sigma2 = 0.0;
        double value = -std::numeric_limits<double>::infinity();
        MatrixXd A_inv;
        bool ok = false;
    };

    RidgeCriterion(const Dataset& d, PenaltyStructure structure, MarginalLikelihood flavor)
        : W_(with_intercept(d.X())), y_(d.y()), structure_(std::move(structure)), flavor_(flavor)
    {
        if (structure_.p() != d.p()) {
            throw DimensionError("penalty structure covers " + std::to_string(structure_.p())
                                 + " coefficients, data has " + std::to_string(d.p()));
        }
        WtW_ = W_.transpose() * W_;
        Wty_ = W_.transpose() * y_;
        estimated_ = structure_.estimated_groups();
    }

    const std::vector<int>& estimated_groups() const { return estimated_; }
    const PenaltyStructure& structure() const { return structure_; }

    /// Per-group lambda for log-penalties of the estimated groups.
    VectorXd group_lambda(const VectorXd& rho) const
    {
        VectorXd lam(structure_.groups());
        for (int g = 0; g < structure_.groups(); ++g) {
            const auto& m = structure_.mode(g);
            lam(g) = m.kind == GroupMode::Kind::fixed ? m.value : 0.0;
        }
        for (std::size_t e = 0; e < estimated_.size(); ++e) lam(estimated_[e]) = std::exp(rho(static_cast<Index>(e)));
        return lam;
    }

    Solution solve(const VectorXd& rho, bool want_inverse = false) const
    {
        Solution s;
        const Index p = structure_.p();
        const VectorXd glam = group_lambda(rho);
        s.col_lambda.resize(p);
        for (Index k = 0; k < p; ++k) s.col_lambda(k) = glam(structure_.group_of(k));

        MatrixXd A = WtW_;
        for (Index k = 0; k < p; ++k) A(k + 1, k + 1) += s.col_lambda(k);
        Eigen::LLT<MatrixXd> llt(A);
        if (llt.info() != Eigen::Success) return s;
        s.theta = llt.solve(Wty_);
        const VectorXd beta = s.theta.tail(p);
        s.rss_pen = (y_ - W_ * s.theta).squaredNorm() + (s.col_lambda.array() * beta.array().square()).sum();

        const double n = static_cast<double>(y_.size());
        Index f = 1;
        double log_lambda_sum = 0.0;
        for (Index k = 0; k < p; ++k) {
            if (s.col_lambda(k) > 0.0) log_lambda_sum += std::log(s.col_lambda(k));
            else ++f;
        }
        const double dof = flavor_ == MarginalLikelihood::reml ? n - static_cast<double>(f) : n;
        if (!(dof > 0.0) || !(s.rss_pen > 0.0)) return s;
        s.sigma2 = s.rss_pen / dof;

        double log_det;
        if (flavor_ == MarginalLikelihood::reml) {
            log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
        } else {
            std::vector<Index> pen;
            for (Index k = 0; k < p; ++k) {
                if (s.col_lambda(k) > 0.0) pen.push_back(k + 1);
            }
            log_det = 0.0;
            if (!pen.empty()) {
                MatrixXd B(static_cast<Index>(pen.size()), static_cast<Index>(pen.size()));
                for (std::size_t a = 0; a < pen.size(); ++a) {
                    for (std::size_t b = 0; b < pen.size(); ++b) {
                        B(static_cast<Index>(a), static_cast<Index>(b)) = A(pen[a], pen[b]);
                    }
                }
                Eigen::LLT<MatrixXd> lb(B);
                if (lb.info() != Eigen::Success) return s;
                log_det = 2.0 * lb.matrixLLT().diagonal().array().log().sum();
            }
        }
        s.value = -0.5 * (dof * std::log(s.sigma2) + log_det - log_lambda_sum
                          + dof * (1.0 + std::log(2.0 * std::numbers::pi)));
        if (want_inverse) s.A_inv = llt.solve(MatrixXd::Identity(A.rows(), A.cols()));
        s.ok = std::isfinite(s.value);
        return s;
    }

    double operator()(const VectorXd& rho) const { return solve(rho).value; }

private:
    MatrixXd W_;
    VectorXd y_;
    MatrixXd WtW_;
    VectorXd Wty_;
    PenaltyStructure structure_;
    MarginalLikelihood flavor_;
    std::vector<int> estimated_;
};

namespace detail {

inline VectorXd clamp_rho(const VectorXd& rho, const RidgeSpec& spec)
{
    return rho.cwiseMax(spec.log_lambda_lo).cwiseMin(spec.log_lambda_hi);
}

inline FitResult ridge_fit_from(const RidgeCriterion& crit, const VectorXd& rho, const std::string& tag)
{
    auto s = crit.solve(rho, true);
    if (!s.ok) throw Error("ridge system is singular at the requested penalties");
    FitResult fit;
    fit.method_tag = tag;
    fit.intercept = s.theta(0);
    fit.beta = s.theta.tail(s.theta.size() - 1);
    fit.sigma2 = s.sigma2;
    fit.lambda = crit.group_lambda(rho);
    fit.covariance = symmetrize(s.sigma2 * s.A_inv);
    return fit;
}

struct RhoSearch {
    VectorXd rho;
    double value = -std::numeric_limits<double>::infinity();
    bool converged = true;
};

inline RhoSearch search_grid(const RidgeCriterion& crit, const RidgeSpec& spec, Index dims)
{
    const int per_dim = dims == 1 ? spec.grid_points
                                  : std::max(3, std::min(spec.grid_points,
                                                         static_cast<int>(std::pow(40000.0, 1.0 / static_cast<double>(dims)))));
    RhoSearch best;
    std::vector<int> idx(static_cast<std::size_t>(dims), 0);
    VectorXd rho(dims);
    while (true) {
        for (Index k = 0; k < dims; ++k) {
            rho(k) = spec.log_lambda_lo
                     + (spec.log_lambda_hi - spec.log_lambda_lo) * idx[static_cast<std::size_t>(k)] / (per_dim - 1);
        }
        const double v = crit(rho);
        if (v > best.value) {
            best.value = v;
            best.rho = rho;
        }
        Index k = 0;
        while (k < dims && ++idx[static_cast<std::size_t>(k)] == per_dim) idx[static_cast<std::size_t>(k++)] = 0;
        if (k == dims) break;
    }
    return best;
}

inline RhoSearch search_nelder_mead(const RidgeCriterion& crit, const RidgeSpec& spec, Index dims)
{
    auto objective = [&](const VectorXd& rho) {
        const double v = crit(clamp_rho(rho, spec));
        return std::isfinite(v) ? -v : std::numeric_limits<double>::max();
    };
    // Deterministic jittered starts around the centre of the plausible range.
    static constexpr double offsets[] = {0.0, 3.1, -2.7, 6.3, -5.9, 1.7};
    RhoSearch best;
    best.converged = false;
    for (int r = 0; r < spec.restarts; ++r) {
        VectorXd start(dims);
        for (Index k = 0; k < dims; ++k) {
            start(k) = offsets[r % 6] + 0.37 * static_cast<double>(k) * (r % 2 == 0 ? 1.0 : -1.0);
        }
        start = clamp_rho(start, spec);
        auto res = nelder_mead(objective, start, 1.0, 1e-12, spec.tolerance, spec.max_iter);
        const VectorXd rho = clamp_rho(res.x, spec);
        const double v = crit(rho);
        if (v > best.value) {
            best.value = v;
            best.rho = rho;
            best.converged = res.converged;
        }
    }
    return best;
}

inline RhoSearch search_newton(const RidgeCriterion& crit, const RidgeSpec& spec, Index dims)
{
    auto f = [&](const VectorXd& rho) { return crit(rho); };
    RhoSearch cur;
    cur.rho = VectorXd::Zero(dims);
    cur.value = f(cur.rho);
    cur.converged = false;
    for (int it = 0; it < spec.max_iter; ++it) {
        const VectorXd g = fd_gradient(f, cur.rho, spec.fd_step);
        const MatrixXd H = fd_hessian(f, cur.rho, spec.fd_step);
        VectorXd step;
        Eigen::LLT<MatrixXd> llt(-H);
        if (llt.info() == Eigen::Success) step = llt.solve(g);
        else step = g;
        double t = 1.0;
        bool moved = false;
        for (int h = 0; h < 40; ++h, t *= 0.5) {
            const VectorXd cand = clamp_rho(cur.rho + t * step, spec);
            const double v = f(cand);
            if (v > cur.value) {
                const double delta = (cand - cur.rho).cwiseAbs().maxCoeff();
                cur.rho = cand;
                cur.value = v;
                moved = true;
                if (delta < spec.tolerance) cur.converged = true;
                break;
            }
        }
        if (!moved || cur.converged) {
            cur.converged = true;
            break;
        }
    }
    return cur;
}

}  // namespace detail

/**
 * Multi-penalty ridge with penalties of the estimated groups chosen by
 * maximizing the (restricted) marginal likelihood. Coefficients are the
 * penalized least-squares solution at the selected penalties and the
 * covariance is the Bayesian posterior covariance sigma^2 A^{-1}.
 */
inline FitResult fit_ridge_ml(const Dataset& d, const RidgeSpec& spec)
{
    spec.validate();
    RidgeCriterion crit(d, spec.structure, spec.criterion);
    const Index dims = static_cast<Index>(crit.estimated_groups().size());
    const std::string tag = "ridge";
    if (dims == 0) return detail::ridge_fit_from(crit, VectorXd(0), tag);

    detail::RhoSearch best;
    switch (spec.optimizer) {
        case RidgeOptimizer::grid: best = detail::search_grid(crit, spec, dims); break;
        case RidgeOptimizer::nelder_mead: best = detail::search_nelder_mead(crit, spec, dims); break;
        case RidgeOptimizer::newton: best = detail::search_newton(crit, spec, dims); break;
    }
    if (best.rho.size() != dims || !std::isfinite(best.value)) {
        throw Error("marginal likelihood is not finite anywhere on the search domain");
    }
    FitResult fit = detail::ridge_fit_from(crit, best.rho, tag);
    if (!best.converged) {
        throw ConvergenceError("penalty optimizer did not converge within " + std::to_string(spec.max_iter)
                                   + " iterations",
                               fit);
    }
    return fit;
}

/// Ridge at fixed penalties (one value per group), no optimization.
inline FitResult fit_ridge_fixed(const Dataset& d, const PenaltyStructure& structure)
{
    RidgeCriterion crit(d, structure, MarginalLikelihood::reml);
    if (!crit.estimated_groups().empty()) throw Error("fit_ridge_fixed needs all groups fixed or unpenalized");
    return detail::ridge_fit_from(crit, VectorXd(0), "ridge");
}

inline FitResult fit_ridge_fixed(const Dataset& d, double lambda)
{
    return fit_ridge_fixed(d, PenaltyStructure::global(d.p(), GroupMode::fixed(lambda)));
}

/**
 * Adds the penalty-uncertainty term J V_rho J' to the covariance of a fit from
 * fit_ridge_ml, where rho = log lambda of the estimated groups, J = d theta/d rho
 * and V_rho the inverse negative Hessian of the criterion at rho-hat (both by
 * central differences). Directions of the Hessian without curvature are
 * dropped and flagged; if none remain the uncorrected covariance is kept.
 */
inline FitResult correct_for_penalty_uncertainty(const FitResult& fit, const Dataset& d, const RidgeSpec& spec)
{
    RidgeCriterion crit(d, spec.structure, spec.criterion);
    const auto& est = crit.estimated_groups();
    FitResult out = fit;
    if (est.empty()) {
        out.covariance_corrected = fit.covariance;
        return out;
    }
    if (fit.lambda.size() != spec.structure.groups()) throw DimensionError("fit does not match penalty structure");
    const Index dims = static_cast<Index>(est.size());
    VectorXd rho(dims);
    for (Index e = 0; e < dims; ++e) rho(e) = std::log(fit.lambda(est[static_cast<std::size_t>(e)]));

    const double h = spec.fd_step;
    const Index q = fit.p() + 1;
    MatrixXd J(q, dims);
    for (Index e = 0; e < dims; ++e) {
        VectorXd a = rho, b = rho;
        a(e) += h;
        b(e) -= h;
        auto sa = crit.solve(a), sb = crit.solve(b);
        if (!sa.ok || !sb.ok) {
            out.covariance_corrected = fit.covariance;
            out.warnings.push_back("penalty-uncertainty correction skipped: criterion not finite near optimum");
            return out;
        }
        J.col(e) = (sa.theta - sb.theta) / (2.0 * h);
    }
    const MatrixXd H = fd_hessian([&](const VectorXd& r) { return crit(r); }, rho, h);
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(symmetrize(-H));
    const VectorXd ev = eig.eigenvalues();
    const double cutoff = 1e-6 * std::max(1.0, ev.cwiseAbs().maxCoeff());
    MatrixXd V_rho = MatrixXd::Zero(dims, dims);
    int kept = 0;
    for (Index k = 0; k < dims; ++k) {
        if (ev(k) > cutoff) {
            V_rho += eig.eigenvectors().col(k) * eig.eigenvectors().col(k).transpose() / ev(k);
            ++kept;
        }
    }
    if (kept == 0) {
        out.covariance_corrected = fit.covariance;
        out.warnings.push_back("penalty Hessian singular; corrected covariance equals conditional covariance");
        return out;
    }
    if (kept < dims) {
        out.warnings.push_back("penalty Hessian singular in " + std::to_string(dims - kept)
                               + " direction(s); correction restricted to identified directions");
    }
    MatrixXd corrected = fit.covariance + J * V_rho * J.transpose();
    Eigen::SelfAdjointEigenSolver<MatrixXd> check(symmetrize(corrected), Eigen::EigenvaluesOnly);
    out.covariance_corrected = check.eigenvalues().minCoeff() < 0.0 ? nearest_psd(corrected) : symmetrize(corrected);
    return out;
}

/// Wald intervals for the linear predictor (no error-variance term).
inline PredictionSet predict_with_intervals(const FitResult& fit, const MatrixXd& X_test, double level,
                                            bool use_corrected = true)
{
    if (!(level > 0.0 && level < 1.0)) throw Error("interval level must lie in (0,1)");
    require_columns(X_test, fit.p());
    const MatrixXd& V = (use_corrected && fit.covariance_corrected) ? *fit.covariance_corrected : fit.covariance;
    const MatrixXd W = with_intercept(X_test);
    const VectorXd var = ((W * V).array() * W.array()).rowwise().sum().matrix();
    const double z = normal_quantile(0.5 * (1.0 + level));
    PredictionSet ps;
    ps.level = level;
    ps.eta_hat = linear_predictor(fit, X_test);
    const VectorXd half = z * var.cwiseMax(0.0).cwiseSqrt();
    ps.lower = ps.eta_hat - half;
    ps.upper = ps.eta_hat + half;
    return ps;
}

}  // namespace shrinkage
