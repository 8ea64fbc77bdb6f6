#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "core.hpp"
#include "stats.hpp"

namespace shrinkage {

inline void require_same_length(const VectorXd& a, const VectorXd& b)
{
    if (a.size() != b.size()) {
        throw DimensionError("length mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
}

/// Mean squared difference between true and estimated linear predictors.
inline double msep(const VectorXd& eta_true, const VectorXd& eta_hat)
{
    require_same_length(eta_true, eta_hat);
    if (eta_true.size() == 0) throw Error("msep of empty vectors");
    return (eta_true - eta_hat).squaredNorm() / static_cast<double>(eta_true.size());
}

namespace detail {

inline double ls_slope(const VectorXd& x, const VectorXd& y)
{
    const VectorXd xc = x.array() - x.mean();
    const double sxx = xc.squaredNorm();
    if (!(sxx > 0.0)) throw DataError("regressor has zero variance");
    return xc.dot((y.array() - y.mean()).matrix()) / sxx;
}

}  // namespace detail

/// Slope of eta_hat regressed on eta_true (with intercept).
inline double cslope(const VectorXd& eta_true, const VectorXd& eta_hat)
{
    require_same_length(eta_true, eta_hat);
    if (eta_true.size() < 3) throw Error("cslope needs at least 3 points");
    return detail::ls_slope(eta_true, eta_hat);
}

/// Classical calibration slope: observations regressed on predictions. Secondary metric.
inline double calibration_slope(const VectorXd& observed, const VectorXd& eta_hat)
{
    require_same_length(observed, eta_hat);
    if (observed.size() < 3) throw Error("calibration slope needs at least 3 points");
    return detail::ls_slope(eta_hat, observed);
}

struct CoverageResult {
    double coverage = 0.0;
    double mean_width = 0.0;
};

inline CoverageResult coverage(const PredictionSet& ps, const VectorXd& eta_true)
{
    require_same_length(ps.lower, eta_true);
    require_same_length(ps.upper, eta_true);
    if (eta_true.size() == 0) throw Error("coverage of empty vectors");
    double hit = 0.0, width = 0.0;
    for (Index i = 0; i < eta_true.size(); ++i) {
        hit += ps.lower(i) <= eta_true(i) && eta_true(i) <= ps.upper(i);
        width += ps.upper(i) - ps.lower(i);
    }
    const auto n = static_cast<double>(eta_true.size());
    return {hit / n, width / n};
}

inline double winsorize_cslope(double slope, double lo = 1.0 / 3.0, double hi = 3.0)
{
    if (!(lo > 0.0 && lo < hi)) throw Error("winsorization bounds need 0 < lo < hi");
    return std::clamp(slope, lo, hi);
}

/// One (replicate, method) evaluation. Missing metrics are NaN.
struct Record {
    int replicate = 0;
    std::string method;
    std::string status = "ok";
    double msep = std::numeric_limits<double>::quiet_NaN();
    double cslope = std::numeric_limits<double>::quiet_NaN();
    double coverage = std::numeric_limits<double>::quiet_NaN();
    double mean_width = std::numeric_limits<double>::quiet_NaN();
};

struct MetricSummary {
    Index count = 0;
    double mean = std::numeric_limits<double>::quiet_NaN();
    double median = std::numeric_limits<double>::quiet_NaN();
    double q10 = std::numeric_limits<double>::quiet_NaN();
    double q90 = std::numeric_limits<double>::quiet_NaN();
};

struct MethodAggregate {
    std::string method;
    Index records = 0;
    Index failures = 0;
    MetricSummary msep, cslope, coverage, mean_width;
    double rmse_cslope_vs_1 = std::numeric_limits<double>::quiet_NaN();
};

inline MetricSummary summarize(const std::vector<double>& values)
{
    std::vector<double> v;
    for (double x : values) {
        if (std::isfinite(x)) v.push_back(x);
    }
    MetricSummary s;
    s.count = static_cast<Index>(v.size());
    if (v.empty()) return s;
    s.mean = mean(v);
    s.median = quantile(v, 0.5);
    s.q10 = quantile(v, 0.1);
    s.q90 = quantile(v, 0.9);
    return s;
}

/// Per-method aggregates, in order of first appearance. Non-finite metrics are skipped.
inline std::vector<MethodAggregate> aggregate(const std::vector<Record>& records)
{
    if (records.empty()) throw Error("aggregate of empty record set");
    std::vector<std::string> order;
    std::map<std::string, std::vector<const Record*>> by;
    for (const auto& r : records) {
        if (!by.count(r.method)) order.push_back(r.method);
        by[r.method].push_back(&r);
    }
    std::vector<MethodAggregate> out;
    for (const auto& m : order) {
        const auto& rs = by[m];
        MethodAggregate a;
        a.method = m;
        a.records = static_cast<Index>(rs.size());
        std::vector<double> ms, cs, cv, w;
        double sq = 0.0;
        Index ncs = 0;
        for (const Record* r : rs) {
            if (r->status != "ok") ++a.failures;
            ms.push_back(r->msep);
            cs.push_back(r->cslope);
            cv.push_back(r->coverage);
            w.push_back(r->mean_width);
            if (std::isfinite(r->cslope)) {
                sq += (r->cslope - 1.0) * (r->cslope - 1.0);
                ++ncs;
            }
        }
        a.msep = summarize(ms);
        a.cslope = summarize(cs);
        a.coverage = summarize(cv);
        a.mean_width = summarize(w);
        if (ncs > 0) a.rmse_cslope_vs_1 = std::sqrt(sq / static_cast<double>(ncs));
        out.push_back(std::move(a));
    }
    return out;
}

inline const MethodAggregate* find_method(const std::vector<MethodAggregate>& aggs, const std::string& m)
{
    for (const auto& a : aggs) {
        if (a.method == m) return &a;
    }
    return nullptr;
}

}  // namespace shrinkage
