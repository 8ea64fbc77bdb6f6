#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "bayes.hpp"
#include "core.hpp"
#include "logistic.hpp"
#include "ols.hpp"
#include "rng.hpp"

namespace shrinkage {

// ---------------------------------------------------------------- linear

struct LinearScenario {
    VectorXd beta;
    double intercept = 0.0;
    double sigma2 = 1.0;
    Index n_train = 50;
    Index n_test = 1000;
    Index treatment_column = -1;  // drawn as balanced +-1 when >= 0
    double correlation = 0.0;     // equicorrelation among the Gaussian columns

    Index p() const { return beta.size(); }

    void validate() const
    {
        if (beta.size() < 1) throw Error("scenario needs at least one coefficient");
        if (!(sigma2 >= 0.0)) throw Error("scenario sigma2 must be >= 0");
        if (n_train < 1 || n_test < 1) throw Error("scenario sample sizes must be >= 1");
        if (!(correlation >= 0.0 && correlation < 1.0)) throw Error("scenario correlation must lie in [0,1)");
        if (treatment_column >= beta.size()) throw Error("treatment column out of range");
    }

    /// Six small effects plus a strong treatment effect (last column).
    static LinearScenario intro()
    {
        LinearScenario s;
        s.beta.resize(7);
        s.beta << -0.05, -0.05, -0.05, 0.05, 0.05, 0.05, -0.25;
        s.treatment_column = 6;
        return s;
    }

    /// All |beta| = 0.1; the setting that favours a single global penalty.
    static LinearScenario intro_equal()
    {
        LinearScenario s = intro();
        s.beta << -0.1, -0.1, -0.1, 0.1, 0.1, 0.1, -0.1;
        return s;
    }
};

struct LinearReplicate {
    Dataset train;
    Dataset test;
    VectorXd eta_true_test;
};

namespace detail {

inline MatrixXd equicorrelated_normal(Rng& rng, Index n, Index p, double rho)
{
    MatrixXd X(n, p);
    const double a = std::sqrt(rho), b = std::sqrt(1.0 - rho);
    for (Index i = 0; i < n; ++i) {
        const double z0 = rho > 0.0 ? rng.normal() : 0.0;
        for (Index j = 0; j < p; ++j) X(i, j) = a * z0 + b * rng.normal();
    }
    return X;
}

inline std::vector<ColumnMeta> scenario_columns(Index p, Index treatment)
{
    std::vector<ColumnMeta> cols;
    for (Index j = 0; j < p; ++j) {
        if (j == treatment) {
            cols.push_back({ColumnKind::binary, ColumnCoding::plus_minus_one, "treat"});
        } else {
            cols.push_back({ColumnKind::continuous, ColumnCoding::raw, "x" + std::to_string(j + 1)});
        }
    }
    return cols;
}

}  // namespace detail

inline LinearReplicate simulate_linear(const LinearScenario& s, std::uint64_t seed)
{
    s.validate();
    Rng rng(child_seed(seed, stream::data));
    const Index n = s.n_train + s.n_test;
    MatrixXd X = detail::equicorrelated_normal(rng, n, s.p(), s.correlation);
    if (s.treatment_column >= 0) {
        for (Index i = 0; i < n; ++i) X(i, s.treatment_column) = rng.uniform() < 0.5 ? -1.0 : 1.0;
    }
    const VectorXd eta = (X * s.beta).array() + s.intercept;
    VectorXd y(n);
    const double sd = std::sqrt(s.sigma2);
    for (Index i = 0; i < n; ++i) y(i) = eta(i) + sd * rng.normal();
    const auto cols = detail::scenario_columns(s.p(), s.treatment_column);
    return {Dataset(y.head(s.n_train), X.topRows(s.n_train), cols, "train"),
            Dataset(y.tail(s.n_test), X.bottomRows(s.n_test), cols, "test"), eta.tail(s.n_test)};
}

// -------------------------------------------------------------- logistic

enum class Signal { weak, moderate, strong };

struct LogisticScenario {
    VectorXd beta;
    Index n = 50;
    Index n_test = 5000;
    double correlation = 0.5;
    double target_rate = 0.5;
    double intercept = std::numeric_limits<double>::quiet_NaN();  // solved when NaN

    Index p() const { return beta.size(); }

    void validate() const
    {
        if (beta.size() < 1) throw Error("scenario needs at least one coefficient");
        if (!(correlation > -1.0 && correlation < 1.0)) throw Error("correlation must lie in (-1,1)");
        if (correlation < 0.0) throw Error("the shared-factor construction needs correlation >= 0");
        if (!(target_rate > 0.0 && target_rate < 1.0)) throw Error("target event rate must lie in (0,1)");
        if (n < 2 || n_test < 1) throw Error("scenario sample sizes too small");
    }

    /// beta = (0.2, 0.2, 0.2, 0.5, 0.8) scaled by 1/3, 1, 3; extra_null zero coefficients appended.
    static LogisticScenario make(Signal signal, Index n = 50, Index extra_null = 0)
    {
        if (extra_null < 0) throw Error("extra null covariates must be >= 0");
        LogisticScenario s;
        s.n = n;
        s.beta = VectorXd::Zero(5 + extra_null);
        s.beta.head(5) << 0.2, 0.2, 0.2, 0.5, 0.8;
        const double f = signal == Signal::weak ? 1.0 / 3.0 : signal == Signal::strong ? 3.0 : 1.0;
        s.beta *= f;
        return s;
    }
};

/**
 * Intercept giving mean event probability `target` under equicorrelated
 * standard-normal X. Bisection on a Monte Carlo estimate (fixed seed,
 * `draws` antithetic pairs of linear predictors).
 */
inline double solve_intercept(const VectorXd& beta, double correlation, double target, Index draws = 1000000,
                              double tolerance = 0.002)
{
    if (!(target > 0.0 && target < 1.0)) throw Error("target event rate must lie in (0,1)");
    Rng rng(0x5EEDC0FFEEULL);
    const Index half = std::max<Index>(1, draws / 2);
    std::vector<double> lin(static_cast<std::size_t>(half));
    const double a = std::sqrt(correlation), b = std::sqrt(1.0 - correlation);
    const double bsum = beta.sum();
    for (Index i = 0; i < half; ++i) {
        double v = a * rng.normal() * bsum;
        for (Index j = 0; j < beta.size(); ++j) v += b * rng.normal() * beta(j);
        lin[static_cast<std::size_t>(i)] = v;
    }
    auto rate = [&](double b0) {
        double s = 0.0;
        for (double v : lin) s += inv_logit(b0 + v) + inv_logit(b0 - v);
        return s / (2.0 * static_cast<double>(half));
    };
    double lo = -30.0, hi = 30.0;
    if (!(rate(lo) < target && rate(hi) > target)) throw Error("solve_intercept: bracket does not contain the root");
    // Tolerance is on the event rate; keep bisecting well past it on beta0.
    while (hi - lo > 1e-9) {
        const double mid = 0.5 * (lo + hi);
        (rate(mid) < target ? lo : hi) = mid;
    }
    const double b0 = 0.5 * (lo + hi);
    if (std::abs(rate(b0) - target) > tolerance) throw Error("solve_intercept: tolerance not reached");
    return b0;
}

struct LogisticReplicate {
    Dataset train;
    Dataset test;
    VectorXd p_true_test;
    VectorXd eta_true_test;
};

inline LogisticReplicate simulate_logistic(const LogisticScenario& s, std::uint64_t seed)
{
    s.validate();
    const double b0 = std::isnan(s.intercept) ? solve_intercept(s.beta, s.correlation, s.target_rate) : s.intercept;
    Rng rng(child_seed(seed, stream::data));
    const Index n = s.n + s.n_test;
    const MatrixXd X = detail::equicorrelated_normal(rng, n, s.p(), s.correlation);
    const VectorXd eta = (X * s.beta).array() + b0;
    VectorXd y(n), prob(n);
    for (Index i = 0; i < n; ++i) {
        prob(i) = inv_logit(eta(i));
        y(i) = rng.uniform() < prob(i) ? 1.0 : 0.0;
    }
    const auto cols = detail::scenario_columns(s.p(), -1);
    return {Dataset(y.head(s.n), X.topRows(s.n), cols, "train"), Dataset(y.tail(s.n_test), X.bottomRows(s.n_test), cols, "test"),
            prob.tail(s.n_test), eta.tail(s.n_test)};
}

// --------------------------------------------------------------- subsets

struct SubsetPlan {
    std::shared_ptr<const Dataset> source;
    Index subset_size = 50;
    int replicates = 400;
    std::uint64_t seed = 1;
    bool disjoint = false;
};

/// Training rows of one subset; the test set is the complement.
struct SubsetSplit {
    std::vector<std::size_t> train;

    std::vector<std::size_t> test(std::size_t n) const
    {
        std::vector<char> in(n, 0);
        for (auto i : train) in[i] = 1;
        std::vector<std::size_t> out;
        out.reserve(n - train.size());
        for (std::size_t i = 0; i < n; ++i) {
            if (!in[i]) out.push_back(i);
        }
        return out;
    }
};

inline std::vector<SubsetSplit> split_subsets(const SubsetPlan& plan)
{
    if (!plan.source) throw Error("subset plan has no source dataset");
    const auto N = static_cast<std::size_t>(plan.source->n());
    const auto m = static_cast<std::size_t>(plan.subset_size);
    if (plan.subset_size < 1) throw Error("subset size must be >= 1");
    if (m >= N) throw Error("subset size must be smaller than the source (test set would be empty)");
    if (plan.replicates < 1) throw Error("replicates must be >= 1");
    std::vector<SubsetSplit> out(static_cast<std::size_t>(plan.replicates));
    if (plan.disjoint) {
        if (m * out.size() > N) {
            throw Error("disjoint subsets infeasible: " + std::to_string(plan.replicates) + " x " + std::to_string(m)
                        + " exceeds " + std::to_string(N) + " rows");
        }
        Rng rng(child_seed(plan.seed, stream::subsets));
        const auto perm = rng.permutation(N);
        for (std::size_t r = 0; r < out.size(); ++r) {
            out[r].train.assign(perm.begin() + static_cast<std::ptrdiff_t>(r * m),
                                perm.begin() + static_cast<std::ptrdiff_t>((r + 1) * m));
            std::sort(out[r].train.begin(), out[r].train.end());
        }
        return out;
    }
    std::vector<std::size_t> idx(N);
    for (std::size_t r = 0; r < out.size(); ++r) {
        Rng rng(child_seed(child_seed(plan.seed, stream::subsets), r));
        for (std::size_t i = 0; i < N; ++i) idx[i] = i;
        for (std::size_t i = 0; i < m; ++i) std::swap(idx[i], idx[i + rng.index(N - i)]);
        out[r].train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m));
        std::sort(out[r].train.begin(), out[r].train.end());
    }
    return out;
}

inline std::pair<Dataset, Dataset> materialize(const Dataset& source, const SubsetSplit& split)
{
    return {source.rows(split.train), source.rows(split.test(static_cast<std::size_t>(source.n())))};
}

// ------------------------------------------------------------------- DIY

enum class DiyMethod { ols, bayes_loc };

/// Parametric bootstrap on a real design: fitted truth plus one response vector per replicate.
struct DiyScenario {
    std::shared_ptr<const Dataset> base;
    double intercept = 0.0;
    VectorXd beta;
    double sigma2 = 0.0;
    MatrixXd responses;  // n x replicates

    int replicates() const { return static_cast<int>(responses.cols()); }
    VectorXd eta_true() const { return linear_predictor(intercept, beta, base->X()); }
    Dataset replicate(int r) const { return base->with_response(responses.col(r)); }
};

inline DiyScenario diy_scenario(const Dataset& d, DiyMethod method, int replicates, std::uint64_t seed,
                                const McmcConfig& mcmc = {})
{
    if (replicates < 1) throw Error("replicates must be >= 1");
    DiyScenario s;
    s.base = std::make_shared<const Dataset>(d);
    if (method == DiyMethod::ols) {
        const auto fit = fit_ols(d);
        s.intercept = fit.intercept;
        s.beta = fit.beta;
        s.sigma2 = fit.sigma2;
    } else {
        McmcConfig cfg = mcmc;
        cfg.seed = child_seed(seed, stream::method);
        const auto draws = gibbs_linear(d, PriorSpec::local_hc(d.p()), cfg);
        s.intercept = draws.beta0.mean();
        s.beta = draws.beta_mean();
        s.sigma2 = draws.sigma2.mean();
    }
    Rng rng(child_seed(seed, stream::data));
    const VectorXd eta = s.eta_true();
    const double sd = std::sqrt(s.sigma2);
    s.responses.resize(d.n(), replicates);
    for (int r = 0; r < replicates; ++r) {
        for (Index i = 0; i < d.n(); ++i) s.responses(i, r) = eta(i) + sd * rng.normal();
    }
    return s;
}

}  // namespace shrinkage
