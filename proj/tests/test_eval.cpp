#include <gtest/gtest.h>

#include "shrinkage/eval.hpp"
#include "shrinkage/rng.hpp"

using namespace shrinkage;

namespace {

VectorXd normals(Index n, Rng& rng)
{
    VectorXd v(n);
    for (Index i = 0; i < n; ++i) v(i) = rng.normal();
    return v;
}

}  // namespace

TEST(Msep, Examples)
{
    VectorXd a(3);
    a << 1, 2, 3;
    EXPECT_EQ(msep(a, a), 0.0);
    EXPECT_DOUBLE_EQ(msep(VectorXd::Zero(2), VectorXd::Ones(2)), 1.0);
    EXPECT_THROW(msep(a, VectorXd::Zero(2)), DimensionError);
}

TEST(Msep, NaiveLoopAndSymmetry)
{
    Rng rng(1);
    VectorXd a = normals(200, rng), b = normals(200, rng);
    double s = 0.0;
    for (Index i = 0; i < 200; ++i) s += (a(i) - b(i)) * (a(i) - b(i));
    EXPECT_NEAR(msep(a, b), s / 200.0, 1e-12);
    EXPECT_EQ(msep(a, b), msep(b, a));
    EXPECT_GT(msep(a, b), 0.0);
}

TEST(Cslope, Examples)
{
    Rng rng(2);
    VectorXd eta = normals(50, rng);
    EXPECT_NEAR(cslope(eta, eta), 1.0, 1e-12);
    EXPECT_NEAR(cslope(eta, (0.5 * eta.array() + 3.0).matrix()), 0.5, 1e-12);
    EXPECT_THROW(cslope(VectorXd::Ones(5), eta.head(5)), DataError);
    EXPECT_THROW(cslope(eta.head(2), eta.head(2)), Error);
}

TEST(Cslope, PureNoiseTendsToZero)
{
    Rng rng(3);
    VectorXd eta = normals(100000, rng), hat = normals(100000, rng);
    EXPECT_LT(std::abs(cslope(eta, hat)), 0.05);
}

TEST(Cslope, ShiftInvariantScaleLinear)
{
    Rng rng(4);
    VectorXd eta = normals(30, rng), hat = normals(30, rng) + eta;
    const double base = cslope(eta, hat);
    EXPECT_NEAR(cslope(eta, (hat.array() + 7.5).matrix()), base, 1e-12);
    EXPECT_NEAR(cslope(eta, 2.5 * hat), 2.5 * base, 1e-12);
}

TEST(Cslope, DirectionIsPredictionsOnTruth)
{
    // eta_hat = 2 eta + noise: slope of eta_hat on eta is ~2, the classical one ~1/2
    Rng rng(5);
    VectorXd eta = normals(5000, rng);
    VectorXd hat = 2.0 * eta + 0.1 * normals(5000, rng);
    EXPECT_NEAR(cslope(eta, hat), 2.0, 0.01);
    EXPECT_NEAR(calibration_slope(eta, hat), 0.5, 0.01);
}

TEST(Coverage, Examples)
{
    VectorXd eta(4);
    eta << -1, 0, 2, 5;
    PredictionSet wide{eta, VectorXd::Constant(4, -1e300), VectorXd::Constant(4, 1e300), 0.95};
    EXPECT_EQ(coverage(wide, eta).coverage, 1.0);
    VectorXd off = eta.array() + 1.0;
    PredictionSet point{off, off, off, 0.95};
    auto c = coverage(point, eta);
    EXPECT_EQ(c.coverage, 0.0);
    EXPECT_EQ(c.mean_width, 0.0);
    PredictionSet half{eta, eta.array() - 1.0, eta.array() + VectorXd::LinSpaced(4, -2, 1).array(), 0.95};
    // upper offsets -2, -1, 0, 1: rows 2 and 3 covered
    c = coverage(half, eta);
    EXPECT_DOUBLE_EQ(c.coverage, 0.5);
    EXPECT_DOUBLE_EQ(c.mean_width, 0.5);
    EXPECT_THROW(coverage(half, eta.head(3)), DimensionError);
}

TEST(Coverage, MergedEqualsMeanOfEqualSizedReplicates)
{
    Rng rng(6);
    const Index m = 40;
    VectorXd all_eta(3 * m), all_lo(3 * m), all_hi(3 * m);
    double sum = 0.0;
    for (int r = 0; r < 3; ++r) {
        VectorXd eta = normals(m, rng), lo = eta + normals(m, rng), hi = lo.array() + 1.5;
        sum += coverage(PredictionSet{eta, lo, hi, 0.95}, eta).coverage;
        all_eta.segment(r * m, m) = eta;
        all_lo.segment(r * m, m) = lo;
        all_hi.segment(r * m, m) = hi;
    }
    EXPECT_NEAR(coverage(PredictionSet{all_eta, all_lo, all_hi, 0.95}, all_eta).coverage, sum / 3.0, 1e-12);
}

TEST(Winsorize, Examples)
{
    EXPECT_DOUBLE_EQ(winsorize_cslope(0.1), 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(winsorize_cslope(1.0), 1.0);
    EXPECT_DOUBLE_EQ(winsorize_cslope(10.0, 0.1, 10.0), 10.0);
    EXPECT_DOUBLE_EQ(winsorize_cslope(50.0), 3.0);
    EXPECT_THROW(winsorize_cslope(1.0, 2.0, 1.0), Error);
    EXPECT_THROW(winsorize_cslope(1.0, 0.0, 1.0), Error);
}

TEST(Aggregate, SingleRecordAndPerfectSlopes)
{
    Record r{3, "ridge", "ok", 0.1, 0.9, 0.8, 1.2};
    auto aggs = aggregate({r});
    ASSERT_EQ(aggs.size(), 1u);
    EXPECT_EQ(aggs[0].msep.mean, 0.1);
    EXPECT_EQ(aggs[0].msep.median, 0.1);
    EXPECT_EQ(aggs[0].cslope.q10, 0.9);
    EXPECT_EQ(aggs[0].coverage.q90, 0.8);
    EXPECT_NEAR(aggs[0].rmse_cslope_vs_1, 0.1, 1e-12);

    std::vector<Record> ones;
    for (int i = 0; i < 5; ++i) ones.push_back({i, "ols", "ok", 0.2, 1.0, 0.95, 1.0});
    EXPECT_EQ(aggregate(ones)[0].rmse_cslope_vs_1, 0.0);
    EXPECT_THROW(aggregate({}), Error);
}

TEST(Aggregate, QuantilesOrderAndFailures)
{
    std::vector<Record> recs;
    for (int i = 0; i < 11; ++i) {
        recs.push_back({i, "b", "ok", static_cast<double>(i), 1.0 + 0.1 * i, std::nan(""), std::nan("")});
        recs.push_back({i, "a", i == 0 ? "error" : "ok", 1.0, 1.0, 0.9, 2.0});
    }
    recs[1].msep = std::nan("");
    recs[1].status = "error";
    auto aggs = aggregate(recs);
    ASSERT_EQ(aggs.size(), 2u);
    EXPECT_EQ(aggs[0].method, "b");  // first appearance
    const auto* a = find_method(aggs, "a");
    ASSERT_NE(a, nullptr);
    EXPECT_EQ(a->failures, 1);
    EXPECT_EQ(a->records, 11);
    EXPECT_EQ(find_method(aggs, "zzz"), nullptr);
    // b: msep 0..10, type-7 quantiles
    EXPECT_DOUBLE_EQ(aggs[0].msep.q10, 1.0);
    EXPECT_DOUBLE_EQ(aggs[0].msep.q90, 9.0);
    EXPECT_DOUBLE_EQ(aggs[0].msep.median, 5.0);
    EXPECT_EQ(aggs[0].coverage.count, 0);
    EXPECT_TRUE(std::isnan(aggs[0].coverage.mean));
    // rmse from records: sqrt(mean((0.1 i)^2))
    double s = 0.0;
    for (int i = 0; i < 11; ++i) s += 0.01 * i * i;
    EXPECT_NEAR(aggs[0].rmse_cslope_vs_1, std::sqrt(s / 11.0), 1e-12);
}
