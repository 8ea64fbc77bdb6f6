#pragma once

#include <cmath>

#include <boost/math/distributions/normal.hpp>

#include "core.hpp"

namespace shrinkage {

inline double normal_quantile(double prob)
{
    return boost::math::quantile(boost::math::normal_distribution<double>(), prob);
}

inline double normal_cdf(double x)
{
    return boost::math::cdf(boost::math::normal_distribution<double>(), x);
}

inline MatrixXd symmetrize(const MatrixXd& M) { return 0.5 * (M + M.transpose()); }

/// Nearest symmetric PSD matrix in Frobenius norm (negative eigenvalues clipped).
inline MatrixXd nearest_psd(const MatrixXd& M)
{
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(symmetrize(M));
    VectorXd ev = eig.eigenvalues().cwiseMax(0.0);
    return symmetrize(eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose());
}

inline VectorXd column_means(const MatrixXd& X) { return X.colwise().mean().transpose(); }

inline MatrixXd centered(const MatrixXd& X, const VectorXd& means) { return X.rowwise() - means.transpose(); }

/// Inverse of a symmetric positive-definite matrix via Cholesky.
inline MatrixXd spd_inverse(const MatrixXd& A)
{
    Eigen::LLT<MatrixXd> llt(A);
    if (llt.info() != Eigen::Success) throw Error("matrix is not positive definite");
    return llt.solve(MatrixXd::Identity(A.rows(), A.cols()));
}

}  // namespace shrinkage
