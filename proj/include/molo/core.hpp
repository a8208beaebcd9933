#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace molo {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Error types
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RankDeficient : Error {
    using Error::Error;
};

struct ZeroMatrix : Error {
    using Error::Error;
};

struct NotPositiveDefinite : Error {
    using Error::Error;
};

struct NotSymmetric : Error {
    using Error::Error;
};

struct Singular : Error {
    using Error::Error;
};

struct QpNotConverged : Error {
    double residual;
    explicit QpNotConverged(double r)
        : Error("quadratic subproblem did not converge, residual " + std::to_string(r)), residual(r) {}
};

struct DegreesOfFreedom : Error {
    using Error::Error;
};

/// Progress report for an iterative spectral kernel.
struct KernelReport {
    int iterations = 0;
    double residual = 0.0;
    std::int64_t flops_estimate = 0;
    bool converged = false;
};

struct NotConverged : Error {
    KernelReport report;
    explicit NotConverged(const KernelReport& r)
        : Error("iterative kernel did not converge, residual " + std::to_string(r.residual)), report(r) {}
};

// ---------------------------------------------------------------------------
// Validation helpers
// ---------------------------------------------------------------------------

inline bool is_finite(const Matrix& a) { return a.allFinite(); }

inline void require_finite(const Matrix& a, const char* who) {
    if (!a.allFinite()) throw Error(std::string(who) + ": non-finite entries");
}

inline void require_symmetric(const Matrix& a, const char* who, double tol = 1e-12) {
    if (a.rows() != a.cols()) throw NotSymmetric(std::string(who) + ": matrix not square");
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = i + 1; j < a.cols(); ++j)
            if (std::abs(a(i, j) - a(j, i)) > tol * std::max(1.0, std::abs(a(i, j))))
                throw NotSymmetric(std::string(who) + ": matrix not symmetric");
}

}  // namespace molo
