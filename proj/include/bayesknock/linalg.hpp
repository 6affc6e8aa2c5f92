#pragma once

#include "bayesknock/common.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <optional>

namespace bayesknock {

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

/// Relative symmetry check: max |m - m^T| <= tol * max(1, max |m|).
inline bool is_symmetric(const Matrix& m, double rel_tol = 1e-10) {
    if (m.rows() != m.cols()) {
        return false;
    }
    if (m.size() == 0) {
        return true;
    }
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

/// Lower Cholesky factor, or nullopt when the matrix is not numerically positive definite.
inline std::optional<Matrix> try_cholesky(const Matrix& a) {
    if (a.rows() != a.cols() || a.rows() == 0 || !a.allFinite()) {
        return std::nullopt;
    }
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success) {
        return std::nullopt;
    }
    Matrix lower = llt.matrixL();
    if (!lower.allFinite() || lower.diagonal().minCoeff() <= 0.0) {
        return std::nullopt;
    }
    return lower;
}

inline Matrix cholesky_lower(const Matrix& a, const std::string& failure_message) {
    auto lower = try_cholesky(a);
    if (!lower) {
        throw Error(failure_message);
    }
    return *std::move(lower);
}

inline bool is_positive_definite(const Matrix& a) { return try_cholesky(a).has_value(); }

inline double min_eigenvalue(const Matrix& a) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(a, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
}

inline double max_eigenvalue(const Matrix& a) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(a, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().maxCoeff();
}

/// Inverse of a symmetric positive definite matrix, symmetrized.
inline Matrix spd_inverse(const Matrix& a, const std::string& failure_message) {
    const Matrix lower = cholesky_lower(a, failure_message);
    const Index p = a.rows();
    Matrix inv = Matrix::Identity(p, p);
    lower.triangularView<Eigen::Lower>().solveInPlace(inv);
    lower.transpose().triangularView<Eigen::Upper>().solveInPlace(inv);
    return symmetrize(inv);
}

/// n rows drawn i.i.d. from N(0, L L^T) given the lower factor L. This is the single
/// multivariate-normal primitive of the library.
inline Matrix sample_mvn_rows(const Matrix& lower, Index n, Rng& rng) {
    const Matrix z = rng.normal_matrix(n, lower.rows());
    return z * lower.transpose();
}

/// Empirical covariance (divisor n) of the rows of x, assuming a known zero mean.
inline Matrix second_moment(const Matrix& x) {
    return (x.transpose() * x) / static_cast<double>(x.rows());
}

inline Matrix covariance_to_correlation(const Matrix& sigma) {
    const Vector inv_sd = sigma.diagonal().cwiseSqrt().cwiseInverse();
    return inv_sd.asDiagonal() * sigma * inv_sd.asDiagonal();
}

}  // namespace bayesknock
