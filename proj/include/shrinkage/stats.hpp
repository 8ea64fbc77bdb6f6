#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace shrinkage {

/// Type-7 (linear interpolation) sample quantile. Reorders `v`.
inline double quantile_inplace(std::vector<double>& v, double prob)
{
    if (v.empty()) throw std::invalid_argument("quantile of empty sample");
    const double h = (static_cast<double>(v.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, v.size() - 1);
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
    const double a = v[lo];
    if (hi == lo) return a;
    const double b = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(lo) + 1, v.end());
    return a + (h - static_cast<double>(lo)) * (b - a);
}

inline double quantile(std::vector<double> v, double prob) { return quantile_inplace(v, prob); }

inline double mean(const std::vector<double>& v)
{
    if (v.empty()) throw std::invalid_argument("mean of empty sample");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace shrinkage
