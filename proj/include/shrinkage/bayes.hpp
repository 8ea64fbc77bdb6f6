#pragma once

#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <string>
#include <vector>

#include "core.hpp"
#include "diagnostics.hpp"
#include "half_cauchy.hpp"
#include "linalg.hpp"
#include "ridge.hpp"
#include "rng.hpp"
#include "stats.hpp"

namespace shrinkage {

/// Prior on the prior-variance scale tau_g^2 = 1/lambda_g of one group.
struct VariancePrior {
    enum class Kind { fixed, inverse_gamma, half_cauchy };
    Kind kind = Kind::half_cauchy;
    double lambda = 0.0;  // fixed; 0 means a flat prior on the group's coefficients
    double a = 0.001;     // inverse-gamma shape
    double b = 0.001;     // inverse-gamma scale
    double scale = 1.0;   // half-Cauchy scale on tau

    static VariancePrior fixed(double lambda)
    {
        if (!(lambda >= 0.0)) throw Error("fixed lambda must be >= 0");
        return {Kind::fixed, lambda, 0.0, 0.0, 1.0};
    }
    static VariancePrior inverse_gamma(double a = 0.001, double b = 0.001)
    {
        if (!(a > 0.0 && b > 0.0)) throw Error("inverse-gamma parameters must be > 0");
        return {Kind::inverse_gamma, 0.0, a, b, 1.0};
    }
    static VariancePrior half_cauchy(double s = 1.0)
    {
        if (!(s > 0.0)) throw Error("half-Cauchy scale must be > 0");
        return {Kind::half_cauchy, 0.0, 0.0, 0.0, s};
    }
};

struct Sigma2Prior {
    enum class Kind { jeffreys, inverse_gamma, fixed };
    Kind kind = Kind::jeffreys;
    double a = 0.001;
    double b = 0.001;
    double value = 1.0;

    static Sigma2Prior jeffreys() { return {}; }
    static Sigma2Prior inverse_gamma(double a, double b) { return {Kind::inverse_gamma, a, b, 1.0}; }
    static Sigma2Prior fixed(double v) { return {Kind::fixed, 0.0, 0.0, v}; }
};

/// beta_k ~ N(0, sigma^2 tau^2_g(k)) with a prior on each group's tau^2.
struct PriorSpec {
    PenaltyStructure structure;
    std::vector<VariancePrior> group_priors;
    Sigma2Prior sigma2;

    void validate(Index p) const
    {
        if (structure.p() != p) {
            throw DimensionError("prior structure covers " + std::to_string(structure.p())
                                 + " coefficients, data has " + std::to_string(p));
        }
        if (static_cast<int>(group_priors.size()) != structure.groups()) {
            throw Error("need one variance prior per group");
        }
    }

    static PriorSpec uniform(PenaltyStructure s, VariancePrior vp, Sigma2Prior sp = {})
    {
        const auto G = static_cast<std::size_t>(s.groups());
        return {std::move(s), std::vector<VariancePrior>(G, vp), sp};
    }
    /// Bay_EB: global prior fixed at an estimated penalty.
    static PriorSpec empirical_bayes(Index p, double lambda)
    {
        return uniform(PenaltyStructure::global(p), VariancePrior::fixed(lambda));
    }
    static PriorSpec global_ig(Index p) { return uniform(PenaltyStructure::global(p), VariancePrior::inverse_gamma()); }
    static PriorSpec global_hc(Index p, double s = 1.0)
    {
        return uniform(PenaltyStructure::global(p), VariancePrior::half_cauchy(s));
    }
    static PriorSpec grouped_hc(const PenaltyStructure& groups, double s = 1.0)
    {
        return uniform(groups, VariancePrior::half_cauchy(s));
    }
    static PriorSpec local_hc(Index p, double s = 1.0)
    {
        return uniform(PenaltyStructure::local(p), VariancePrior::half_cauchy(s));
    }
};

struct McmcConfig {
    int chains = 4;
    int iterations = 5000;
    int burn_in = 2500;
    int thin = 1;
    std::uint64_t seed = 1;
    bool diagnostics = true;
    bool parallel_chains = false;

    void validate() const
    {
        if (chains < 1) throw Error("mcmc.chains must be >= 1");
        if (thin < 1) throw Error("mcmc.thin must be >= 1");
        if (!(burn_in >= 0 && burn_in < iterations)) throw Error("mcmc.burn_in must lie in [0, iterations)");
    }
    Index kept_per_chain() const { return (iterations - burn_in) / thin; }
};

/**
 * Retained draws, chain-major: rows [c*per_chain, (c+1)*per_chain) belong to
 * chain c. tau2 is +inf for flat (lambda = 0) groups; nu is 0 for groups
 * without a half-Cauchy prior.
 */
struct PosteriorDraws {
    VectorXd beta0;
    MatrixXd beta;
    VectorXd sigma2;
    MatrixXd tau2;
    MatrixXd nu;
    int chains = 1;
    Index per_chain = 0;
    std::vector<ParameterDiagnostics> diagnostics;
    std::vector<std::string> warnings;

    Index draws() const { return beta0.size(); }
    Index p() const { return beta.cols(); }

    /// One column per chain.
    MatrixXd by_chain(const VectorXd& v) const
    {
        MatrixXd m(per_chain, chains);
        for (int c = 0; c < chains; ++c) m.col(c) = v.segment(c * per_chain, per_chain);
        return m;
    }

    VectorXd beta_mean() const { return beta.colwise().mean().transpose(); }

    const ParameterDiagnostics* diagnostic(const std::string& name) const
    {
        for (const auto& d : diagnostics) {
            if (d.name == name) return &d;
        }
        return nullptr;
    }
};

namespace detail {

/// Sufficient statistics of the centred linear model; n = 0 gives the prior.
struct GaussianSuffStats {
    MatrixXd XtX;
    VectorXd Xty;
    double yty = 0.0;  // centred
    double ybar = 0.0;
    VectorXd xbar;
    double n = 0.0;

    static GaussianSuffStats from(const Dataset& d)
    {
        GaussianSuffStats s;
        s.xbar = column_means(d.X());
        s.ybar = d.y().mean();
        const MatrixXd Xc = centered(d.X(), s.xbar);
        const VectorXd yc = d.y().array() - s.ybar;
        s.XtX = Xc.transpose() * Xc;
        s.Xty = Xc.transpose() * yc;
        s.yty = yc.squaredNorm();
        s.n = static_cast<double>(d.n());
        return s;
    }

    static GaussianSuffStats empty(Index p)
    {
        GaussianSuffStats s;
        s.XtX = MatrixXd::Zero(p, p);
        s.Xty = VectorXd::Zero(p);
        s.xbar = VectorXd::Zero(p);
        return s;
    }
};

struct ChainOutput {
    VectorXd beta0, sigma2;
    MatrixXd beta, tau2, nu;
};

/// Per-group tau^2 / nu state and their conditional updates, shared with the logistic sampler.
class GroupScales {
public:
    GroupScales(const PriorSpec& prior, Rng& rng) : prior_(prior)
    {
        const int G = prior.structure.groups();
        tau2_.resize(G);
        nu_ = VectorXd::Zero(G);
        for (int g = 0; g < G; ++g) {
            const auto& vp = prior.group_priors[static_cast<std::size_t>(g)];
            switch (vp.kind) {
                case VariancePrior::Kind::fixed:
                    tau2_(g) = vp.lambda > 0.0 ? 1.0 / vp.lambda : std::numeric_limits<double>::infinity();
                    break;
                case VariancePrior::Kind::inverse_gamma:
                    tau2_(g) = std::exp(rng.normal());
                    break;
                case VariancePrior::Kind::half_cauchy:
                    tau2_(g) = std::exp(rng.normal()) * vp.scale * vp.scale;
                    nu_(g) = vp.scale * vp.scale;
                    break;
            }
        }
        sizes_.resize(static_cast<std::size_t>(G));
        for (int g = 0; g < G; ++g) sizes_[static_cast<std::size_t>(g)] = prior.structure.group_size(g);
    }

    /// Prior precision 1/tau^2 per coefficient (0 for flat groups).
    VectorXd precision() const
    {
        const Index p = prior_.structure.p();
        VectorXd prec(p);
        for (Index k = 0; k < p; ++k) prec(k) = 1.0 / tau2_(prior_.structure.group_of(k));
        return prec;
    }

    /// Number of coefficients with a proper Gaussian prior.
    double proper_count() const
    {
        double c = 0.0;
        for (Index k = 0; k < prior_.structure.p(); ++k) c += std::isfinite(tau2_(prior_.structure.group_of(k)));
        return c;
    }

    void update(Rng& rng, const VectorXd& beta, double sigma2)
    {
        const int G = prior_.structure.groups();
        VectorXd ss = VectorXd::Zero(G);
        for (Index k = 0; k < beta.size(); ++k) ss(prior_.structure.group_of(k)) += beta(k) * beta(k);
        ss /= sigma2;
        for (int g = 0; g < G; ++g) {
            const auto& vp = prior_.group_priors[static_cast<std::size_t>(g)];
            const int m = sizes_[static_cast<std::size_t>(g)];
            switch (vp.kind) {
                case VariancePrior::Kind::fixed: break;
                case VariancePrior::Kind::inverse_gamma:
                    tau2_(g) = draw_tau2_inverse_gamma(rng, vp.a, vp.b, m, ss(g));
                    break;
                case VariancePrior::Kind::half_cauchy:
                    tau2_(g) = draw_tau2_half_cauchy(rng, nu_(g), m, ss(g));
                    nu_(g) = draw_nu_half_cauchy(rng, tau2_(g), vp.scale);
                    break;
            }
        }
    }

    const VectorXd& tau2() const { return tau2_; }
    const VectorXd& nu() const { return nu_; }

private:
    const PriorSpec& prior_;
    VectorXd tau2_;
    VectorXd nu_;
    std::vector<int> sizes_;
};

inline ChainOutput run_gaussian_chain(const GaussianSuffStats& s, const PriorSpec& prior, const McmcConfig& cfg,
                                      std::uint64_t seed)
{
    Rng rng(seed);
    const Index p = prior.structure.p();
    const int G = prior.structure.groups();
    const Index kept = cfg.kept_per_chain();
    ChainOutput out;
    out.beta0.resize(kept);
    out.sigma2.resize(kept);
    out.beta.resize(kept, p);
    out.tau2.resize(kept, G);
    out.nu.resize(kept, G);

    GroupScales scales(prior, rng);
    double sigma2;
    switch (prior.sigma2.kind) {
        case Sigma2Prior::Kind::fixed: sigma2 = prior.sigma2.value; break;
        default: {
            const double v = s.n > 1.0 ? s.yty / (s.n - 1.0) : 1.0;
            sigma2 = (v > 0.0 ? v : 1.0) * std::exp(0.5 * rng.normal());
        }
    }
    VectorXd beta(p), z(p);
    double alpha = s.ybar;

    Index stored = 0;
    for (int it = 0; it < cfg.iterations; ++it) {
        // beta | sigma2, tau2 ~ N(A^{-1} X'y, sigma2 A^{-1}),  A = X'X + diag(1/tau2)
        MatrixXd A = s.XtX;
        A.diagonal() += scales.precision();
        Eigen::LLT<MatrixXd> llt(A);
        if (llt.info() != Eigen::Success) throw Error("posterior precision matrix is numerically singular");
        const VectorXd mean = llt.solve(s.Xty);
        for (Index k = 0; k < p; ++k) z(k) = rng.normal();
        beta = mean + std::sqrt(sigma2) * llt.matrixU().solve(z);

        // alpha | rest ~ N(ybar, sigma2 / n) under a flat prior (centred design)
        alpha = s.n > 0.0 ? s.ybar + std::sqrt(sigma2 / s.n) * rng.normal() : 0.0;

        // sigma2 | rest
        if (prior.sigma2.kind != Sigma2Prior::Kind::fixed) {
            const double rss = std::max(0.0, s.yty - 2.0 * beta.dot(s.Xty) + beta.dot(s.XtX * beta))
                               + s.n * (alpha - s.ybar) * (alpha - s.ybar);
            const VectorXd prec = scales.precision();
            const double pen = (beta.array().square() * prec.array()).sum();
            double shape = 0.5 * (s.n + scales.proper_count());
            double rate = 0.5 * (rss + pen);
            if (prior.sigma2.kind == Sigma2Prior::Kind::inverse_gamma) {
                shape += prior.sigma2.a;
                rate += prior.sigma2.b;
            }
            sigma2 = rng.inv_gamma(shape, rate);
        }

        // tau2, nu | beta, sigma2
        scales.update(rng, beta, sigma2);

        if (it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0 && stored < kept) {
            out.beta.row(stored) = beta.transpose();
            out.beta0(stored) = alpha - s.xbar.dot(beta);
            out.sigma2(stored) = sigma2;
            out.tau2.row(stored) = scales.tau2().transpose();
            out.nu.row(stored) = scales.nu().transpose();
            ++stored;
        }
    }
    return out;
}

template <class RunChain>
PosteriorDraws assemble_chains(const McmcConfig& cfg, Index p, int G, RunChain&& run_chain)
{
    cfg.validate();
    std::vector<ChainOutput> outs(static_cast<std::size_t>(cfg.chains));
    if (cfg.parallel_chains && cfg.chains > 1) {
        std::vector<std::future<ChainOutput>> futs;
        for (int c = 0; c < cfg.chains; ++c) {
            futs.push_back(std::async(std::launch::async, [&, c] {
                return run_chain(child_seed(cfg.seed, stream::chain * 1000003ULL + static_cast<std::uint64_t>(c)));
            }));
        }
        for (int c = 0; c < cfg.chains; ++c) outs[static_cast<std::size_t>(c)] = futs[static_cast<std::size_t>(c)].get();
    } else {
        for (int c = 0; c < cfg.chains; ++c) {
            outs[static_cast<std::size_t>(c)] =
                run_chain(child_seed(cfg.seed, stream::chain * 1000003ULL + static_cast<std::uint64_t>(c)));
        }
    }

    PosteriorDraws d;
    d.chains = cfg.chains;
    d.per_chain = cfg.kept_per_chain();
    const Index total = d.per_chain * cfg.chains;
    d.beta0.resize(total);
    d.sigma2.resize(total);
    d.beta.resize(total, p);
    d.tau2.resize(total, G);
    d.nu.resize(total, G);
    for (int c = 0; c < cfg.chains; ++c) {
        const auto& o = outs[static_cast<std::size_t>(c)];
        const Index off = c * d.per_chain;
        d.beta0.segment(off, d.per_chain) = o.beta0;
        d.sigma2.segment(off, d.per_chain) = o.sigma2;
        d.beta.middleRows(off, d.per_chain) = o.beta;
        d.tau2.middleRows(off, d.per_chain) = o.tau2;
        d.nu.middleRows(off, d.per_chain) = o.nu;
    }
    return d;
}

inline void add_diagnostics(PosteriorDraws& d, bool include_sigma2)
{
    auto diag = [&](const std::string& name, const VectorXd& v) {
        if (!v.allFinite()) return;
        const MatrixXd ch = d.by_chain(v);
        ParameterDiagnostics pd{name, effective_sample_size(ch), d.chains * d.per_chain >= 4 ? split_rhat(ch) : 1.0};
        if (std::isfinite(pd.rhat) && pd.rhat > 1.1) {
            d.warnings.push_back("split-Rhat " + std::to_string(pd.rhat) + " > 1.1 for " + name);
        }
        d.diagnostics.push_back(std::move(pd));
    };
    diag("beta0", d.beta0);
    for (Index k = 0; k < d.p(); ++k) diag("beta[" + std::to_string(k + 1) + "]", d.beta.col(k));
    if (include_sigma2) diag("sigma2", d.sigma2);
    for (Index g = 0; g < d.tau2.cols(); ++g) {
        if (d.tau2.col(g).maxCoeff() != d.tau2.col(g).minCoeff()) {
            diag("tau2[" + std::to_string(g + 1) + "]", d.tau2.col(g));
        }
    }
}

}  // namespace detail

/**
 * Systematic-scan Gibbs sampler for the Gaussian linear model under a
 * per-group prior ladder (fixed / inverse-gamma / half-Cauchy on tau_g).
 * Scan: joint beta draw, flat-prior intercept, sigma^2, then tau^2 and nu.
 */
inline PosteriorDraws gibbs_linear(const Dataset& d, const PriorSpec& prior, const McmcConfig& cfg)
{
    prior.validate(d.p());
    if (prior.sigma2.kind == Sigma2Prior::Kind::jeffreys && d.n() < 2) {
        throw DataError("Jeffreys sigma^2 prior needs n >= 2");
    }
    const auto stats = detail::GaussianSuffStats::from(d);
    auto draws = detail::assemble_chains(cfg, d.p(), prior.structure.groups(), [&](std::uint64_t seed) {
        return detail::run_gaussian_chain(stats, prior, cfg, seed);
    });
    if (cfg.diagnostics) detail::add_diagnostics(draws, prior.sigma2.kind != Sigma2Prior::Kind::fixed);
    return draws;
}

/// The same sampler with no likelihood contribution (sigma^2 must be fixed).
inline PosteriorDraws gibbs_prior_only(const PriorSpec& prior, const McmcConfig& cfg)
{
    if (prior.sigma2.kind != Sigma2Prior::Kind::fixed) throw Error("prior-only sampling needs a fixed sigma^2");
    const auto stats = detail::GaussianSuffStats::empty(prior.structure.p());
    auto draws = detail::assemble_chains(cfg, prior.structure.p(), prior.structure.groups(),
                                         [&](std::uint64_t seed) { return detail::run_gaussian_chain(stats, prior, cfg, seed); });
    if (cfg.diagnostics) detail::add_diagnostics(draws, false);
    return draws;
}

/// Draws of tau from the bare (tau^2, nu) Gibbs pair, C+(0, scale) marginally.
inline VectorXd sample_half_cauchy_pair(double scale, Index draws, std::uint64_t seed, int burn_in = 100)
{
    Rng rng(seed);
    double nu = scale * scale, tau2 = scale * scale;
    VectorXd out(draws);
    for (Index i = -burn_in; i < draws; ++i) {
        tau2 = draw_tau2_half_cauchy(rng, nu, 0, 0.0);
        nu = draw_nu_half_cauchy(rng, tau2, scale);
        if (i >= 0) out(i) = std::sqrt(tau2);
    }
    return out;
}

/// Per-row linear-predictor draws summarized by posterior mean and central quantiles.
inline PredictionSet posterior_predict(const PosteriorDraws& draws, const MatrixXd& X_test, double level)
{
    if (!(level > 0.0 && level < 1.0)) throw Error("interval level must lie in (0,1)");
    if (draws.draws() == 0) throw Error("no posterior draws");
    require_columns(X_test, draws.p());
    const Index m = X_test.rows();
    PredictionSet ps;
    ps.level = level;
    ps.eta_hat.resize(m);
    ps.lower.resize(m);
    ps.upper.resize(m);
    const Index block = 64;
    std::vector<double> col(static_cast<std::size_t>(draws.draws()));
    for (Index start = 0; start < m; start += block) {
        const Index len = std::min(block, m - start);
        MatrixXd eta = draws.beta * X_test.middleRows(start, len).transpose();
        eta.colwise() += draws.beta0;
        for (Index j = 0; j < len; ++j) {
            Eigen::Map<VectorXd>(col.data(), draws.draws()) = eta.col(j);
            ps.eta_hat(start + j) = eta.col(j).mean();
            ps.lower(start + j) = quantile_inplace(col, 0.5 * (1.0 - level));
            ps.upper(start + j) = quantile_inplace(col, 0.5 * (1.0 + level));
        }
    }
    return ps;
}

/// Posterior-mean point estimate as a FitResult (covariance from the draws).
inline FitResult posterior_summary_fit(const PosteriorDraws& draws, std::string tag)
{
    FitResult fit;
    fit.method_tag = std::move(tag);
    fit.intercept = draws.beta0.mean();
    fit.beta = draws.beta_mean();
    fit.sigma2 = draws.sigma2.mean();
    fit.lambda.resize(draws.tau2.cols());
    for (Index g = 0; g < draws.tau2.cols(); ++g) {
        VectorXd inv = draws.tau2.col(g).cwiseInverse();
        std::vector<double> v(inv.data(), inv.data() + inv.size());
        fit.lambda(g) = quantile(v, 0.5);
    }
    MatrixXd theta(draws.draws(), draws.p() + 1);
    theta.col(0) = draws.beta0;
    theta.rightCols(draws.p()) = draws.beta;
    MatrixXd c = theta.rowwise() - theta.colwise().mean();
    fit.covariance = (c.transpose() * c) / static_cast<double>(std::max<Index>(1, draws.draws() - 1));
    fit.warnings = draws.warnings;
    return fit;
}

/// Empirical-Bayes global penalty from the marginal-likelihood optimizer.
inline double estimate_lambda_eb(const Dataset& d, MarginalLikelihood flavor = MarginalLikelihood::reml)
{
    RidgeSpec spec;
    spec.structure = PenaltyStructure::global(d.p());
    spec.criterion = flavor;
    return fit_ridge_ml(d, spec).lambda(0);
}

}  // namespace shrinkage
