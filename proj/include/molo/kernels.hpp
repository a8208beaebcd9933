#pragma once

// Iterative spectral kernels: Newton-Schulz polar iteration, the coupled
// inverse-square-root iteration, and the augmented block recursion that
// extracts the leading block of polar([S L]) without forming L.

#include "molo/core.hpp"
#include "molo/spectral.hpp"

namespace molo {

struct KernelResult {
    Matrix value;
    KernelReport report;
};

struct KernelOptions {
    int max_iters = 100;
    double tol = 1e-10;
    // Scale the initial iterate by an estimated 1/sigma_max (20 power-iteration
    // steps) instead of 1/||A||_F. Speeds up badly scaled inputs; off by
    // default to keep the plain Frobenius initialization.
    bool sigma_max_init = false;
    double pd_tol = 1e-12;
};

namespace detail {

inline double estimate_sigma_max(const Matrix& a, int steps = 20) {
    Vector v = Vector::Ones(a.cols());
    v /= v.norm();
    double est = 0.0;
    for (int i = 0; i < steps; ++i) {
        Vector w = a.transpose() * (a * v);
        est = std::sqrt(w.norm());
        if (w.norm() == 0.0) break;
        v = w / w.norm();
    }
    return est;
}

}  // namespace detail

/// Newton-Schulz polar iteration: X <- (1/2)(3I - X X^T) X from X0 = A/||A||_F.
/// Stops when successive iterates differ by at most tol in Frobenius norm.
inline KernelResult polar_ns(const Matrix& a, const KernelOptions& opt = {}) {
    require_finite(a, "polar_ns");
    const double fnorm = a.norm();
    if (fnorm == 0.0) throw ZeroMatrix("polar_ns: zero input");

    double scale = fnorm;
    if (opt.sigma_max_init) {
        double smax = detail::estimate_sigma_max(a);
        if (smax > 0.0) scale = smax;
    }

    const Eigen::Index m = a.rows(), n = a.cols();
    Matrix x = a / scale;
    KernelReport report;
    for (int k = 1; k <= opt.max_iters; ++k) {
        Matrix next = 0.5 * (3.0 * x - (x * x.transpose()) * x);
        report.iterations = k;
        report.residual = (next - x).norm();
        x = std::move(next);
        if (report.residual <= opt.tol) {
            report.converged = true;
            break;
        }
    }
    report.flops_estimate =
        4LL * report.iterations * static_cast<std::int64_t>(m) * m * n;
    if (!report.converged) throw NotConverged(report);
    return {std::move(x), report};
}

/// Coupled Newton-Schulz iteration for A^{-1/2} of a symmetric positive
/// definite A: Y0 = A/sqrt(||A||_F), Z0 = I/sqrt(||A||_F),
/// T = Z Y, Y <- (1/2) Y (3I - T), Z <- (1/2)(3I - T) Z.
/// Since Y = A Z throughout, T = Z A Z and ||T - I||_F is exactly the
/// inversion residual, which is what the stopping test uses.
inline KernelResult inv_sqrt_coupled_ns(const Matrix& a, const KernelOptions& opt = {}) {
    require_finite(a, "inv_sqrt_coupled_ns");
    require_symmetric(a, "inv_sqrt_coupled_ns", 1e-10);
    const Eigen::Index m = a.rows();
    {
        Eigen::LLT<Matrix> llt(a - opt.pd_tol * Matrix::Identity(m, m));
        if (llt.info() != Eigen::Success)
            throw NotPositiveDefinite("inv_sqrt_coupled_ns: input not positive definite");
    }
    const double fnorm = a.norm();
    const double root = std::sqrt(fnorm);
    Matrix y = a / root;
    Matrix z = Matrix::Identity(m, m) / root;
    const Matrix eye3 = 3.0 * Matrix::Identity(m, m);
    KernelReport report;
    for (int k = 0; k <= opt.max_iters; ++k) {
        Matrix t = z * y;
        report.iterations = k;
        report.residual = (t - Matrix::Identity(m, m)).norm();
        if (report.residual <= opt.tol) {
            report.converged = true;
            break;
        }
        if (k == opt.max_iters) break;
        Matrix half = 0.5 * (eye3 - t);
        y = y * half;
        z = half * z;
    }
    report.flops_estimate = 6LL * report.iterations * static_cast<std::int64_t>(m) * m * m;
    if (!report.converged) throw NotConverged(report);
    return {std::move(z), report};
}

/// Leading m-by-n block of polar([S L]) where L L^T is supplied as a Gram
/// matrix (never the factor itself). Augmented block recursion:
/// T = (1/2)(3I - B), X <- T X, B <- T B T, with
/// X0 = S/f, B0 = (S S^T + L L^T)/f^2, f^2 = ||S||_F^2 + tr(L L^T).
inline KernelResult polar_augmented_ns(const Matrix& s, const Matrix& llt,
                                       const KernelOptions& opt = {}) {
    require_finite(s, "polar_augmented_ns");
    require_finite(llt, "polar_augmented_ns");
    require_symmetric(llt, "polar_augmented_ns", 1e-10);
    const Eigen::Index m = s.rows(), n = s.cols();
    if (llt.rows() != m) throw Error("polar_augmented_ns: dimension mismatch");
    {
        Eigen::LLT<Matrix> chk(llt - opt.pd_tol * Matrix::Identity(m, m));
        if (chk.info() != Eigen::Success)
            throw NotPositiveDefinite("polar_augmented_ns: L L^T not positive definite");
    }
    const double f2 = s.squaredNorm() + llt.trace();
    Matrix x = s / std::sqrt(f2);
    Matrix b = (s * s.transpose() + llt) / f2;
    const Matrix eye = Matrix::Identity(m, m);
    KernelReport report;
    for (int k = 0; k <= opt.max_iters; ++k) {
        report.iterations = k;
        report.residual = (b - eye).norm();
        if (report.residual <= opt.tol) {
            report.converged = true;
            break;
        }
        if (k == opt.max_iters) break;
        Matrix t = 0.5 * (3.0 * eye - b);
        x = t * x;
        b = t * b * t;
    }
    report.flops_estimate =
        4LL * m * m * n +
        static_cast<std::int64_t>(report.iterations) * (2LL * m * m * n + 4LL * m * m * m);
    if (!report.converged) throw NotConverged(report);
    return {std::move(x), report};
}

}  // namespace molo
