#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "core.hpp"

namespace shrinkage {

struct MinimizeResult {
    VectorXd x;
    double value = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
};

/**
 * Nelder-Mead simplex minimizer (standard reflection/expansion/contraction/
 * shrink coefficients 1, 2, 1/2, 1/2). Converges when both the spread of
 * function values and the simplex diameter fall below their tolerances.
 */
inline MinimizeResult nelder_mead(const std::function<double(const VectorXd&)>& f, const VectorXd& start,
                                  double step, double ftol, double xtol, int max_iter)
{
    const Index d = start.size();
    std::vector<VectorXd> simplex(static_cast<std::size_t>(d + 1), start);
    std::vector<double> fv(static_cast<std::size_t>(d + 1));
    for (Index i = 0; i < d; ++i) simplex[static_cast<std::size_t>(i + 1)](i) += step;
    for (std::size_t i = 0; i < simplex.size(); ++i) fv[i] = f(simplex[i]);

    std::vector<std::size_t> order(simplex.size());
    MinimizeResult res;
    for (int it = 0; it < max_iter; ++it) {
        res.iterations = it + 1;
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        const std::size_t best = order.front(), worst = order.back(), second = order[order.size() - 2];

        double diam = 0.0;
        for (const auto& v : simplex) diam = std::max(diam, (v - simplex[best]).cwiseAbs().maxCoeff());
        if (std::abs(fv[worst] - fv[best]) <= ftol * (1.0 + std::abs(fv[best])) && diam <= xtol) {
            res.converged = true;
            break;
        }

        VectorXd centroid = VectorXd::Zero(d);
        for (std::size_t i = 0; i < simplex.size(); ++i) {
            if (i != worst) centroid += simplex[i];
        }
        centroid /= static_cast<double>(d);

        VectorXd xr = centroid + (centroid - simplex[worst]);
        const double fr = f(xr);
        if (fr < fv[best]) {
            VectorXd xe = centroid + 2.0 * (centroid - simplex[worst]);
            const double fe = f(xe);
            if (fe < fr) {
                simplex[worst] = xe;
                fv[worst] = fe;
            } else {
                simplex[worst] = xr;
                fv[worst] = fr;
            }
        } else if (fr < fv[second]) {
            simplex[worst] = xr;
            fv[worst] = fr;
        } else {
            const bool outside = fr < fv[worst];
            VectorXd xc = outside ? VectorXd(centroid + 0.5 * (xr - centroid))
                                  : VectorXd(centroid + 0.5 * (simplex[worst] - centroid));
            const double fc = f(xc);
            if (fc < (outside ? fr : fv[worst])) {
                simplex[worst] = xc;
                fv[worst] = fc;
            } else {
                for (std::size_t i = 0; i < simplex.size(); ++i) {
                    if (i == best) continue;
                    simplex[i] = simplex[best] + 0.5 * (simplex[i] - simplex[best]);
                    fv[i] = f(simplex[i]);
                }
            }
        }
    }
    const auto best = static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
    res.x = simplex[best];
    res.value = fv[best];
    return res;
}

/// Central-difference gradient.
inline VectorXd fd_gradient(const std::function<double(const VectorXd&)>& f, const VectorXd& x, double h)
{
    VectorXd g(x.size());
    for (Index i = 0; i < x.size(); ++i) {
        VectorXd a = x, b = x;
        a(i) += h;
        b(i) -= h;
        g(i) = (f(a) - f(b)) / (2.0 * h);
    }
    return g;
}

/// Central-difference Hessian.
inline MatrixXd fd_hessian(const std::function<double(const VectorXd&)>& f, const VectorXd& x, double h)
{
    const Index d = x.size();
    MatrixXd H(d, d);
    const double f0 = f(x);
    for (Index i = 0; i < d; ++i) {
        VectorXd a = x, b = x;
        a(i) += h;
        b(i) -= h;
        H(i, i) = (f(a) - 2.0 * f0 + f(b)) / (h * h);
        for (Index j = 0; j < i; ++j) {
            VectorXd pp = x, pm = x, mp = x, mm = x;
            pp(i) += h; pp(j) += h;
            pm(i) += h; pm(j) -= h;
            mp(i) -= h; mp(j) += h;
            mm(i) -= h; mm(j) -= h;
            H(i, j) = H(j, i) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h * h);
        }
    }
    return H;
}

}  // namespace shrinkage
