#pragma once

// Gaussian model-X knockoff machinery: the equicorrelated s-vector, the A matrix, the
// conditional mean map of X~ given X, and draws of the latent noise U ~ N(0, A).

#include "bayesknock/common.hpp"
#include "bayesknock/linalg.hpp"

namespace bayesknock {

inline constexpr double kDefaultShrink = 1.0 - 1e-6;

/// Covariate precision matrix Omega = Sigma^{-1}. Construction validates symmetry and strict
/// positive definiteness; the stored matrix is exactly symmetric.
class PrecisionMatrix {
  public:
    explicit PrecisionMatrix(const Matrix& omega) {
        require(omega.rows() == omega.cols() && omega.rows() > 0, "precision matrix must be square and nonempty");
        require(omega.allFinite(), "precision matrix has non-finite entries");
        require(is_symmetric(omega), "precision matrix not symmetric");
        omega_ = symmetrize(omega);
        require(is_positive_definite(omega_), "precision matrix not positive definite");
    }

    static PrecisionMatrix identity(Index p) { return PrecisionMatrix(Matrix::Identity(p, p)); }

    static PrecisionMatrix from_covariance(const Matrix& sigma) {
        return PrecisionMatrix(spd_inverse(sigma, "covariance not positive definite"));
    }

    const Matrix& matrix() const { return omega_; }
    Index dim() const { return omega_.rows(); }
    Matrix covariance() const { return spd_inverse(omega_, "precision matrix not positive definite"); }

  private:
    Matrix omega_;
};

/// Everything needed to draw valid Gaussian knockoffs under a given precision matrix.
struct KnockoffParams {
    Vector s;
    Matrix a;           ///< 2 diag(s) - diag(s) Omega diag(s)
    Matrix a_lower;     ///< Cholesky factor of a
    Matrix gamma_map;   ///< I - Omega diag(s); knockoff mean is X * gamma_map
};

/// Latent knockoff noise: one row per observation, prior law N(0, A) per row.
using LatentU = Matrix;

inline Matrix compute_A(const PrecisionMatrix& omega, const Vector& s) {
    require(s.size() == omega.dim(), "s length does not match precision dimension");
    const Matrix& om = omega.matrix();
    Matrix a = -(s.asDiagonal() * om * s.asDiagonal());
    a.diagonal() += 2.0 * s;
    return symmetrize(a);
}

/// Equicorrelated construction: s_j = shrink * min(2 lambda_min(R), 1) * sigma_jj with R the
/// correlation matrix of sigma. Throws if the resulting A is not strictly positive definite.
inline Vector compute_s_equicorrelated(const Matrix& sigma, double shrink = kDefaultShrink) {
    require(sigma.rows() == sigma.cols() && sigma.rows() > 0, "covariance must be square and nonempty");
    require(shrink > 0.0 && shrink < 1.0 + 1e-15, "shrink must lie in (0, 1]");
    require(is_symmetric(sigma, 1e-8), "covariance not positive definite");
    const Matrix sym = symmetrize(sigma);
    require(is_positive_definite(sym), "covariance not positive definite");

    const double lambda_min = min_eigenvalue(covariance_to_correlation(sym));
    const double level = shrink * std::min(2.0 * lambda_min, 1.0);
    Vector s = level * sym.diagonal();

    const PrecisionMatrix omega = PrecisionMatrix::from_covariance(sym);
    if (!is_positive_definite(compute_A(omega, s))) {
        throw Error("A not PD; reduce shrink");
    }
    return s;
}

/// Gamma = X (I - Omega diag(s)), the conditional mean of the knockoffs given X.
inline Matrix knockoff_mean_map(const Matrix& x, const PrecisionMatrix& omega, const Vector& s) {
    require(x.cols() == omega.dim(), "covariate matrix width does not match precision dimension");
    require(s.size() == omega.dim(), "s length does not match precision dimension");
    Matrix map = -(omega.matrix() * s.asDiagonal());
    map.diagonal().array() += 1.0;
    return x * map;
}

inline KnockoffParams make_knockoff_params(const PrecisionMatrix& omega, const Vector& s) {
    KnockoffParams kp;
    kp.s = s;
    kp.a = compute_A(omega, s);
    kp.a_lower = cholesky_lower(kp.a, "A not PD");
    kp.gamma_map = -(omega.matrix() * s.asDiagonal());
    kp.gamma_map.diagonal().array() += 1.0;
    return kp;
}

/// Equicorrelated knockoff parameters for the covariance implied by omega.
inline KnockoffParams make_knockoff_params(const PrecisionMatrix& omega, double shrink = kDefaultShrink) {
    return make_knockoff_params(omega, compute_s_equicorrelated(omega.covariance(), shrink));
}

inline LatentU sample_U_prior(const Matrix& a, Index n, Rng& rng) {
    require(n >= 0, "sample count must be nonnegative");
    const Matrix lower = cholesky_lower(symmetrize(a), "A not PD");
    return sample_mvn_rows(lower, n, rng);
}

/// One draw of X~ | X ~ N(X - X Omega diag(s), A).
inline Matrix sample_joint_knockoffs(const Matrix& x, const PrecisionMatrix& omega, const Vector& s, Rng& rng) {
    const Matrix mean = knockoff_mean_map(x, omega, s);
    return mean + sample_U_prior(compute_A(omega, s), x.rows(), rng);
}

}  // namespace bayesknock
