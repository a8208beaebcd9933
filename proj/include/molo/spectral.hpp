#pragma once

// SVD / eigendecomposition based matrix primitives. These are the reference
// routes; the iterative kernels in kernels.hpp are checked against them.

#include "molo/core.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace molo {

inline Vector singular_values(const Matrix& a) {
    return Eigen::JacobiSVD<Matrix>(a).singularValues();
}

/// Sum of singular values.
inline double nuclear_norm(const Matrix& a) {
    require_finite(a, "nuclear_norm");
    return singular_values(a).sum();
}

/// Largest singular value.
inline double operator_norm(const Matrix& a) {
    require_finite(a, "operator_norm");
    if (a.size() == 0) return 0.0;
    return singular_values(a)(0);
}

/// Polar factor U V^T from the thin SVD. Requires full rank min(m, n);
/// callers that need robustness jitter or fall back to pseudo_polar.
inline Matrix polar_exact(const Matrix& a, double rank_tol_rel = 1e-10) {
    require_finite(a, "polar_exact");
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sigma = svd.singularValues();
    const double smax = sigma.size() > 0 ? sigma(0) : 0.0;
    const double tol = rank_tol_rel * smax;
    if (sigma.size() == 0 || sigma(sigma.size() - 1) <= tol)
        throw RankDeficient("polar_exact: singular value below rank tolerance");
    return svd.matrixU() * svd.matrixV().transpose();
}

/// Polar factor restricted to the range: U_r V_r^T over singular values above
/// tolerance. Any such matrix maximizes <S, X> over the unit operator-norm
/// ball, which is all the online learners need. Returns zero for S = 0.
inline Matrix pseudo_polar(const Matrix& a, double rank_tol_rel = 1e-12) {
    require_finite(a, "pseudo_polar");
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sigma = svd.singularValues();
    const double tol = rank_tol_rel * (sigma.size() > 0 ? sigma(0) : 0.0);
    Matrix p = Matrix::Zero(a.rows(), a.cols());
    for (Eigen::Index i = 0; i < sigma.size(); ++i)
        if (sigma(i) > tol && sigma(i) > 0.0)
            p += svd.matrixU().col(i) * svd.matrixV().col(i).transpose();
    return p;
}

/// Lower-triangular L with L L^T = A.
inline Matrix cholesky(const Matrix& a) {
    require_finite(a, "cholesky");
    require_symmetric(a, "cholesky", 1e-10);
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefinite("cholesky: non-positive pivot");
    return llt.matrixL();
}

struct SymEig {
    Vector values;   // ascending
    Matrix vectors;  // columns
};

inline SymEig sym_eig(const Matrix& a, const char* who) {
    require_finite(a, who);
    require_symmetric(a, who, 1e-9);
    Eigen::SelfAdjointEigenSolver<Matrix> es(a);
    if (es.info() != Eigen::Success) throw Error(std::string(who) + ": eigendecomposition failed");
    return {es.eigenvalues(), es.eigenvectors()};
}

/// Unique PSD square root via symmetric eigendecomposition. Small negative
/// eigenvalues from roundoff are clamped to zero.
inline Matrix sqrt_psd(const Matrix& a) {
    SymEig es = sym_eig(a, "sqrt_psd");
    Vector d = es.values.cwiseMax(0.0).cwiseSqrt();
    return es.vectors * d.asDiagonal() * es.vectors.transpose();
}

/// A^{-1/2} for symmetric positive definite A (eigendecomposition route).
inline Matrix inv_sqrt_psd(const Matrix& a, double pd_tol = 1e-12) {
    SymEig es = sym_eig(a, "inv_sqrt_psd");
    const double top = es.values(es.values.size() - 1);
    if (es.values(0) <= pd_tol * std::max(1.0, top))
        throw NotPositiveDefinite("inv_sqrt_psd: matrix not positive definite");
    Vector d = es.values.cwiseSqrt().cwiseInverse();
    return es.vectors * d.asDiagonal() * es.vectors.transpose();
}

/// Matrix power A^p for symmetric PSD A (p >= 0), eigendecomposition route.
inline Matrix pow_psd(const Matrix& a, double p) {
    SymEig es = sym_eig(a, "pow_psd");
    Vector d(es.values.size());
    for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = std::pow(std::max(es.values(i), 0.0), p);
    return es.vectors * d.asDiagonal() * es.vectors.transpose();
}

/// Polar factor via the Gram route (S S^T)^{-1/2} S. Cheaper than an SVD for
/// wide matrices with few rows; requires full row rank.
inline Matrix polar_gram(const Matrix& s, double pd_tol = 1e-13) {
    Matrix gram = s * s.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
    const Vector& lam = es.eigenvalues();
    const double top = lam(lam.size() - 1);
    if (lam(0) <= pd_tol * std::max(1.0, top))
        return polar_exact(s);  // near rank deficiency, let the SVD route decide
    Vector d = lam.cwiseSqrt().cwiseInverse();
    return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose() * s;
}

/// Clip singular values of A at `cap` (projection onto the operator-norm ball).
inline Matrix clip_operator_norm(const Matrix& a, double cap) {
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Vector sigma = svd.singularValues().cwiseMin(cap);
    return svd.matrixU() * sigma.asDiagonal() * svd.matrixV().transpose();
}

}  // namespace molo
