#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "shrinkage/core.hpp"
#include "shrinkage/rng.hpp"

using namespace shrinkage;

TEST(Dataset, RejectsBadShapes)
{
    EXPECT_THROW(Dataset(VectorXd(0), MatrixXd(0, 2)), DataError);
    EXPECT_THROW(Dataset(VectorXd::Zero(3), MatrixXd::Zero(4, 2)), DimensionError);
    MatrixXd X = MatrixXd::Zero(3, 2);
    X(1, 1) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(Dataset(VectorXd::Zero(3), X), DataError);
    VectorXd y = VectorXd::Zero(3);
    y(0) = std::numeric_limits<double>::infinity();
    EXPECT_THROW(Dataset(y, MatrixXd::Zero(3, 2)), DataError);
}

TEST(Dataset, RowsAndResponse)
{
    MatrixXd X(3, 1);
    X << 1, 2, 3;
    Dataset d(VectorXd::LinSpaced(3, 10, 30), X);
    auto s = d.rows({2, 0});
    EXPECT_EQ(s.n(), 2);
    EXPECT_DOUBLE_EQ(s.y()(0), 30);
    EXPECT_DOUBLE_EQ(s.X()(1, 0), 1);
    auto r = d.with_response(VectorXd::Ones(3));
    EXPECT_DOUBLE_EQ(r.y().sum(), 3);
    EXPECT_EQ(r.columns().size(), 1u);
}

TEST(PenaltyStructure, Invariants)
{
    EXPECT_THROW(PenaltyStructure({0, 0, 2}, {GroupMode::estimated(), GroupMode::estimated(), GroupMode::estimated()}),
                 Error);  // group 2 empty
    EXPECT_THROW(PenaltyStructure({0}, {GroupMode::estimated(), GroupMode::estimated()}), Error);  // G > p
    EXPECT_THROW(PenaltyStructure({0, 3}, {GroupMode::estimated(), GroupMode::estimated()}), Error);
    auto local = PenaltyStructure::local(4);
    EXPECT_EQ(local.groups(), 4);
    for (Index k = 0; k < 4; ++k) EXPECT_EQ(local.group_of(k), k);
    auto s = PenaltyStructure::from_labels({1, 1, 2}, {GroupMode::unpenalized(), GroupMode::estimated()});
    EXPECT_EQ(s.group_size(0), 2);
    EXPECT_EQ(s.estimated_groups(), std::vector<int>{1});
    EXPECT_THROW(GroupMode::fixed(-1.0), Error);
}

TEST(LinearPredictor, ZeroBetaGivesIntercept)
{
    FitResult f;
    f.intercept = 2.5;
    f.beta = VectorXd::Zero(3);
    const VectorXd eta = linear_predictor(f, MatrixXd::Random(6, 3));
    for (Index i = 0; i < eta.size(); ++i) EXPECT_DOUBLE_EQ(eta(i), 2.5);
}

TEST(LinearPredictor, UnitRowPicksCoefficient)
{
    FitResult f;
    f.intercept = -1.0;
    f.beta = VectorXd::LinSpaced(4, 1, 4);
    for (Index k = 0; k < 4; ++k) {
        MatrixXd e = MatrixXd::Zero(1, 4);
        e(0, k) = 1.0;
        EXPECT_DOUBLE_EQ(linear_predictor(f, e)(0), -1.0 + f.beta(k));
    }
}

TEST(LinearPredictor, MatchesNaiveLoop)
{
    Rng rng(3);
    FitResult f;
    f.intercept = rng.normal();
    f.beta.resize(5);
    for (Index k = 0; k < 5; ++k) f.beta(k) = rng.normal();
    MatrixXd X(20, 5);
    for (Index i = 0; i < 20; ++i)
        for (Index k = 0; k < 5; ++k) X(i, k) = rng.normal();
    const VectorXd eta = linear_predictor(f, X);
    for (Index i = 0; i < 20; ++i) {
        double s = f.intercept;
        for (Index k = 0; k < 5; ++k) s += X(i, k) * f.beta(k);
        EXPECT_NEAR(eta(i), s, 1e-12);
    }
}

TEST(LinearPredictor, DimensionMismatch)
{
    FitResult f;
    f.beta = VectorXd::Zero(3);
    EXPECT_THROW(linear_predictor(f, MatrixXd::Zero(2, 4)), DimensionError);
}

TEST(Rng, ChildSeedsDifferAndRepeat)
{
    EXPECT_EQ(child_seed(1, 2), child_seed(1, 2));
    EXPECT_NE(child_seed(1, 2), child_seed(1, 3));
    EXPECT_NE(child_seed(1, 2), child_seed(2, 2));
    Rng a(9), b(9);
    for (int i = 0; i < 10; ++i) EXPECT_EQ(a.normal(), b.normal());
}

TEST(Rng, PermutationIsPermutation)
{
    Rng rng(4);
    auto p = rng.permutation(50);
    std::sort(p.begin(), p.end());
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p[i], i);
}
