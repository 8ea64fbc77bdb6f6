#include <gtest/gtest.h>

#include "shrinkage/lasso.hpp"
#include "shrinkage/ols.hpp"
#include "shrinkage/rng.hpp"

using namespace shrinkage;

namespace {

MatrixXd gaussian(Index n, Index p, Rng& rng)
{
    MatrixXd X(n, p);
    for (Index i = 0; i < n; ++i)
        for (Index k = 0; k < p; ++k) X(i, k) = rng.normal();
    return X;
}

// centered columns with X'X = n I
MatrixXd orthonormal_design(Index n, Index p, Rng& rng)
{
    MatrixXd X = gaussian(n, p, rng);
    X.rowwise() -= X.colwise().mean();
    Eigen::HouseholderQR<MatrixXd> qr(X);
    MatrixXd Q = qr.householderQ() * MatrixXd::Identity(n, p);
    return Q * std::sqrt(static_cast<double>(n));
}

}  // namespace

TEST(Ols, NoiselessRecovery)
{
    Rng rng(1);
    MatrixXd X = gaussian(30, 4, rng);
    VectorXd b(4);
    b << 0.5, -1, 2, 0.25;
    Dataset d((1.0 + (X * b).array()).matrix(), X);
    auto f = fit_ols(d);
    EXPECT_NEAR(f.intercept, 1.0, 1e-8);
    EXPECT_LT((f.beta - b).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_EQ(f.lambda.size(), 1);
    EXPECT_EQ(f.lambda(0), 0.0);
}

TEST(Ols, HandComputedFourPoints)
{
    MatrixXd X(4, 1);
    X << 0, 1, 2, 3;
    VectorXd y(4);
    y << 1, 3, 2, 6;
    // xbar 1.5, ybar 3, Sxy = 7.5... slope = Sxy / Sxx
    const double sxy = (-1.5) * (-2) + (-0.5) * 0 + 0.5 * (-1) + 1.5 * 3;
    const double sxx = 2.25 + 0.25 + 0.25 + 2.25;
    auto f = fit_ols(Dataset(y, X));
    EXPECT_NEAR(f.beta(0), sxy / sxx, 1e-12);
    EXPECT_NEAR(f.intercept, 3.0 - 1.5 * sxy / sxx, 1e-12);
}

TEST(Ols, CovarianceMatchesTextbook)
{
    Rng rng(2);
    MatrixXd X = gaussian(40, 3, rng);
    VectorXd y = X.col(0) + gaussian(40, 1, rng);
    auto f = fit_ols(Dataset(y, X));
    MatrixXd W(40, 4);
    W << VectorXd::Ones(40), X;
    const VectorXd theta = (W.transpose() * W).inverse() * W.transpose() * y;
    const double s2 = (y - W * theta).squaredNorm() / (40 - 3 - 1);
    EXPECT_NEAR(f.sigma2, s2, 1e-10);
    const MatrixXd V = s2 * (W.transpose() * W).inverse();
    EXPECT_LT((f.cov_beta() - V.bottomRightCorner(3, 3)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((f.covariance - V).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Ols, Errors)
{
    Rng rng(3);
    EXPECT_THROW(fit_ols(Dataset(VectorXd::Zero(4), gaussian(4, 3, rng))), Error);
    MatrixXd X = gaussian(10, 2, rng);
    X.col(1) = 2.0 * X.col(0);
    EXPECT_THROW(fit_ols(Dataset(gaussian(10, 1, rng).col(0), X)), Error);
}

TEST(Stepwise, PureNoiseExcludedExactlyZero)
{
    int null_models = 0;
    for (int s = 0; s < 20; ++s) {
        Rng rng(100 + s);
        MatrixXd X = gaussian(200, 5, rng);
        VectorXd y = 3.0 * gaussian(200, 1, rng).col(0);
        auto r = stepwise_search(Dataset(y, X));
        EXPECT_LE(r.aic, r.null_aic);
        for (Index k = 0; k < 5; ++k) {
            if (std::find(r.selected.begin(), r.selected.end(), k) == r.selected.end()) {
                EXPECT_EQ(r.fit.beta(k), 0.0);
            }
        }
        if (r.selected.empty()) ++null_models;
    }
    EXPECT_GE(null_models, 5);
}

TEST(Stepwise, DominantCovariateSelected)
{
    int hits = 0;
    for (int s = 0; s < 100; ++s) {
        Rng rng(500 + s);
        MatrixXd X = gaussian(50, 6, rng);
        VectorXd y = 5.0 * X.col(2) + 0.1 * gaussian(50, 1, rng).col(0);
        auto r = stepwise_search(Dataset(y, X));
        if (std::find(r.selected.begin(), r.selected.end(), 2) != r.selected.end()) ++hits;
    }
    EXPECT_GE(hits, 95);
}

TEST(Lasso, AboveLambdaMaxAllZero)
{
    Rng rng(4);
    MatrixXd X = gaussian(40, 5, rng);
    VectorXd y = X * VectorXd::LinSpaced(5, -1, 1) + gaussian(40, 1, rng).col(0);
    Dataset d(y, X);
    const double lmax = lasso_lambda_max(X, y);
    auto f = fit_lasso(d, lmax * 1.0001);
    EXPECT_EQ(f.beta.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_NEAR(f.intercept, y.mean(), 1e-12);
    EXPECT_GT(fit_lasso(d, lmax * 0.9).beta.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Lasso, TinyLambdaMatchesOls)
{
    Rng rng(5);
    MatrixXd X = gaussian(60, 4, rng);
    VectorXd y = X * VectorXd::LinSpaced(4, 1, 2) + gaussian(60, 1, rng).col(0);
    Dataset d(y, X);
    auto l = fit_lasso(d, 1e-9);
    auto o = fit_ols(d);
    EXPECT_LT((l.beta - o.beta).cwiseAbs().maxCoeff(), 1e-4);
    EXPECT_NEAR(l.intercept, o.intercept, 1e-4);
}

TEST(Lasso, OrthonormalSoftThreshold)
{
    Rng rng(6);
    const Index n = 50;
    MatrixXd X = orthonormal_design(n, 4, rng);
    VectorXd b(4);
    b << 2, -1, 0.1, 0;
    VectorXd y = X * b + 0.5 * gaussian(n, 1, rng).col(0);
    const double lambda = 0.3;
    auto f = fit_lasso(Dataset(y, X), lambda);
    const VectorXd z = X.transpose() * (y.array() - y.mean()).matrix() / static_cast<double>(n);
    for (Index k = 0; k < 4; ++k) EXPECT_NEAR(f.beta(k), soft_threshold(z(k), lambda), 1e-8);
}

TEST(Lasso, KktAtCvSolution)
{
    for (int s = 0; s < 5; ++s) {
        Rng rng(40 + s);
        MatrixXd X = gaussian(50, 8, rng);
        VectorXd y = X.col(0) - 0.5 * X.col(3) + gaussian(50, 1, rng).col(0);
        Dataset d(y, X);
        auto cv = lasso_cv(d, {}, 99 + s);
        const double lambda = cv.grid[cv.selected];
        const VectorXd r = y - linear_predictor(cv.fit, X);
        const MatrixXd Xc = X.rowwise() - X.colwise().mean();
        const VectorXd g = Xc.transpose() * r / 50.0;
        for (Index j = 0; j < 8; ++j) {
            if (cv.fit.beta(j) == 0.0) {
                EXPECT_LE(std::abs(g(j)), lambda + 1e-6);
            } else {
                EXPECT_NEAR(g(j), lambda * (cv.fit.beta(j) > 0 ? 1.0 : -1.0), 1e-6);
            }
        }
        EXPECT_EQ(cv.fit.lambda(0), lambda);
        EXPECT_EQ(*std::min_element(cv.cv_error.begin(), cv.cv_error.end()), cv.cv_error[cv.selected]);
    }
}

TEST(Lasso, CvDeterministicAndValidated)
{
    Rng rng(7);
    MatrixXd X = gaussian(30, 3, rng);
    Dataset d(X.col(0) + gaussian(30, 1, rng).col(0), X);
    EXPECT_EQ(fit_lasso_cv(d, {}, 3).beta, fit_lasso_cv(d, {}, 3).beta);
    LassoSpec bad;
    bad.lambda_grid = {0.1, 0.2};
    EXPECT_THROW(lasso_cv(d, bad, 1), Error);
    LassoSpec one;
    one.folds = 1;
    EXPECT_THROW(lasso_cv(d, one, 1), Error);
    LassoSpec many;
    many.folds = 20;
    EXPECT_THROW(lasso_cv(d, many, 1), DataError);
}
