#pragma once

// Smoothings of the nuclear norm: the regularized, stochastic, and hyperbolic
// families, each exposing value and gradient at (S, L), plus an empirical
// admissibility checker and a Wishart inverse-moment Monte Carlo check.

#include "molo/core.hpp"
#include "molo/rng.hpp"
#include "molo/spectral.hpp"

#include <algorithm>
#include <limits>

namespace molo {

enum class PotentialKind { regularized, stochastic, hyperbolic };

struct PotentialFamily {
    PotentialKind kind = PotentialKind::hyperbolic;
    // stochastic only
    int mc_samples = 10000;
    std::uint64_t rng_seed = 0;
    // regularized only
    double qp_tol = 1e-8;
    int qp_max_iters = 10000;
    double pd_tol = 1e-12;
};

struct PotentialEval {
    double value = 0.0;
    Matrix gradient;
};

namespace detail {

/// Nuclear norm and polar factor from one Gram eigendecomposition (m <= n
/// fast path for Monte Carlo sampling; falls back to the SVD route near rank
/// deficiency).
inline bool nuclear_and_polar(const Matrix& s, double& nuc, Matrix& polar) {
    const bool wide = s.rows() <= s.cols();
    const Matrix& a = s;
    Matrix gram = wide ? Matrix(a * a.transpose()) : Matrix(a.transpose() * a);
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
    const Vector& lam = es.eigenvalues();
    const double top = lam(lam.size() - 1);
    if (top <= 0.0 || lam(0) <= 1e-24 * top) return false;
    nuc = lam.cwiseMax(0.0).cwiseSqrt().sum();
    Vector inv = lam.cwiseSqrt().cwiseInverse();
    Matrix root_inv = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
    polar = wide ? Matrix(root_inv * a) : Matrix(a * root_inv);
    return true;
}

}  // namespace detail

/// Hyperbolic smoothing tr(sqrt(S S^T + L L^T)); the caller passes the Gram
/// matrix L L^T. Gradient is (S S^T + L L^T)^{-1/2} S and requires the Gram
/// argument of the square root to be strictly positive definite.
inline PotentialEval eval_hyperbolic(const Matrix& s, const Matrix& llt, double pd_tol = 1e-12) {
    require_finite(s, "eval_hyperbolic");
    require_symmetric(llt, "eval_hyperbolic", 1e-9);
    Matrix a = s * s.transpose() + llt;
    SymEig es = sym_eig(a, "eval_hyperbolic");
    PotentialEval out;
    out.value = es.values.cwiseMax(0.0).cwiseSqrt().sum();
    const double top = es.values(es.values.size() - 1);
    if (es.values(0) <= pd_tol * std::max(1.0, top))
        throw Singular("eval_hyperbolic: S S^T + L L^T is singular");
    Vector d = es.values.cwiseSqrt().cwiseInverse();
    out.gradient = es.vectors * d.asDiagonal() * es.vectors.transpose() * s;
    return out;
}

/// Stochastic smoothing E ||S + L Z||_* with Z a standard Gaussian matrix.
/// Value and gradient are Monte Carlo averages over family.mc_samples draws;
/// the result is a pure function of (S, lfactor, mc_samples, rng_seed).
inline PotentialEval eval_stochastic(const Matrix& s, const Matrix& lfactor,
                                     const PotentialFamily& family) {
    require_finite(s, "eval_stochastic");
    require_finite(lfactor, "eval_stochastic");
    const Eigen::Index m = s.rows(), n = s.cols();
    if (lfactor.rows() != m) throw Error("eval_stochastic: factor dimension mismatch");
    const int k = family.mc_samples;
    PotentialEval out;
    out.gradient = Matrix::Zero(m, n);
    const bool zero_factor = lfactor.norm() == 0.0;
    for (int i = 0; i < k; ++i) {
        Matrix sample = s;
        if (!zero_factor) {
            Rng rng = Rng::stream(family.rng_seed, static_cast<std::uint64_t>(i));
            sample += lfactor * rng.gaussian_matrix(m, n);
        }
        double nuc;
        Matrix polar;
        if (!detail::nuclear_and_polar(sample, nuc, polar)) {
            // probability-zero tie: one reseeded retry, then give up
            Rng rng = Rng::stream(family.rng_seed ^ 0x5bf03635ULL, static_cast<std::uint64_t>(i));
            sample = s + lfactor * rng.gaussian_matrix(m, n);
            if (!detail::nuclear_and_polar(sample, nuc, polar))
                throw RankDeficient("eval_stochastic: rank-deficient sample after reseed");
        }
        out.value += nuc;
        out.gradient += polar;
    }
    out.value /= k;
    out.gradient /= k;
    return out;
}

/// Regularized smoothing: max over the unit operator-norm ball of
/// <S, X> - (1/2) tr(X^T L X), plus the (1/2) Tr(L) offset. Solved by
/// projected gradient ascent with singular-value clipping.
inline PotentialEval eval_regularized(const Matrix& s, const Matrix& l,
                                      const PotentialFamily& family) {
    require_finite(s, "eval_regularized");
    require_symmetric(l, "eval_regularized", 1e-9);
    SymEig es = sym_eig(l, "eval_regularized");
    const double lam_max = es.values(es.values.size() - 1);
    PotentialEval out;
    if (lam_max <= family.pd_tol) {
        // L = 0 reduces to the linear maximization
        out.gradient = polar_exact(s);
        out.value = nuclear_norm(s) + 0.5 * l.trace();
        return out;
    }
    const double step = 1.0 / lam_max;
    const double stop = family.qp_tol * std::max(1.0, s.norm());
    Matrix x = Matrix::Zero(s.rows(), s.cols());
    double residual = std::numeric_limits<double>::infinity();
    for (int it = 0; it < family.qp_max_iters; ++it) {
        Matrix candidate = clip_operator_norm(x + step * (s - l * x), 1.0);
        residual = (x - candidate).norm();
        x = std::move(candidate);
        if (residual <= stop) {
            out.gradient = std::move(x);
            out.value = (s.array() * out.gradient.array()).sum() -
                        0.5 * (out.gradient.transpose() * l * out.gradient).trace() + 0.5 * l.trace();
            return out;
        }
    }
    throw QpNotConverged(residual);
}

/// Evaluate a family at (S, L) where L is the PSD parameter of the
/// admissibility definition. The hyperbolic family consumes the Gram matrix
/// L L^T = L^2; the stochastic family uses L itself as the factor.
inline PotentialEval eval_potential(const PotentialFamily& family, const Matrix& s,
                                    const Matrix& l) {
    switch (family.kind) {
        case PotentialKind::hyperbolic:
            return eval_hyperbolic(s, l * l);
        case PotentialKind::stochastic:
            return eval_stochastic(s, l, family);
        case PotentialKind::regularized:
            return eval_regularized(s, l, family);
    }
    throw Error("eval_potential: unknown kind");
}

struct AdmissibilityReport {
    double feasibility_max_opnorm = 0.0;
    double dominance_min_gap = std::numeric_limits<double>::infinity();
    double stability_ratio_max = 0.0;   // empirical alpha
    double smoothness_ratio_max = 0.0;  // empirical beta
    int trials = 0;
    std::uint64_t seed = 0;
};

/// Empirical check of the four admissibility conditions over random draws of
/// (S, L1 <= L2) and random Bregman direction pairs.
inline AdmissibilityReport check_admissibility(PotentialFamily family, int m, int n, int trials,
                                               std::uint64_t seed) {
    if (m < 1 || n < 1 || trials < 1) throw Error("check_admissibility: bad arguments");
    AdmissibilityReport report;
    report.trials = trials;
    report.seed = seed;
    for (int trial = 0; trial < trials; ++trial) {
        Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(trial));
        if (family.kind == PotentialKind::stochastic)
            family.rng_seed = seed ^ (0x9d2c5680ULL + trial);

        const double s_scale = std::exp(2.0 * rng.uniform() - 1.0);
        Matrix s = s_scale * rng.gaussian_matrix(m, n);
        Matrix c = rng.gaussian_matrix(m, m);
        Matrix l1 = c * c.transpose() + 0.1 * Matrix::Identity(m, m);
        Matrix p = rng.gaussian_matrix(m, m);
        Matrix l2 = l1 + p * p.transpose();

        PotentialEval e1 = eval_potential(family, s, l1);
        PotentialEval e2 = eval_potential(family, s, l2);

        report.feasibility_max_opnorm = std::max(
            {report.feasibility_max_opnorm, operator_norm(e1.gradient), operator_norm(e2.gradient)});
        report.dominance_min_gap = std::min(report.dominance_min_gap, e1.value - nuclear_norm(s));
        const double dtrace = l2.trace() - l1.trace();
        report.stability_ratio_max =
            std::max(report.stability_ratio_max, (e2.value - e1.value) / dtrace);

        // Bregman smoothness at parameter L1 (strictly PD by construction)
        const double delta = std::exp(2.0 * rng.uniform() - 1.5);
        Matrix y = s + delta * rng.gaussian_matrix(m, n);
        PotentialEval ey = eval_potential(family, y, l1);
        const double breg =
            ey.value - e1.value - (e1.gradient.array() * (y - s).array()).sum();
        Eigen::LLT<Matrix> llt(l1);
        Matrix d = s - y;
        const double denom = 0.5 * (d.array() * llt.solve(d).array()).sum();
        if (denom > 1e-12)
            report.smoothness_ratio_max = std::max(report.smoothness_ratio_max, breg / denom);
    }
    return report;
}

struct WishartCheck {
    double top_eig_mean = 0.0;  // largest eigenvalue of the E[A^{-1}] estimate
    double top_eig_sd = 0.0;    // sample std of the per-sample top eigenvalue
    double bound = 0.0;         // 1/(n - m - 1)
    int samples = 0;
};

/// Monte Carlo estimate of E[((Z+Y)(Z+Y)^T)^{-1}] for Gaussian Z; reports the
/// top eigenvalue of the mean against the 1/(n-m-1) bound.
inline WishartCheck wishart_inverse_check(int m, int n, const Matrix& y, int samples,
                                          std::uint64_t seed) {
    if (n < m + 2) throw DegreesOfFreedom("wishart_inverse_check: requires n >= m+2");
    if (y.rows() != m || y.cols() != n) throw Error("wishart_inverse_check: bad Y shape");
    Matrix mean = Matrix::Zero(m, m);
    double sum_top = 0.0, sum_top2 = 0.0;
    for (int i = 0; i < samples; ++i) {
        Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(i));
        Matrix z = rng.gaussian_matrix(m, n) + y;
        Matrix inv = (z * z.transpose()).inverse();
        mean += inv;
        const double top = sym_eig(0.5 * (inv + inv.transpose()), "wishart").values(m - 1);
        sum_top += top;
        sum_top2 += top * top;
    }
    mean /= samples;
    WishartCheck out;
    out.samples = samples;
    out.bound = 1.0 / (n - m - 1);
    out.top_eig_mean = sym_eig(0.5 * (mean + mean.transpose()), "wishart").values(m - 1);
    const double var = std::max(0.0, sum_top2 / samples - (sum_top / samples) * (sum_top / samples));
    out.top_eig_sd = std::sqrt(var);
    return out;
}

}  // namespace molo
