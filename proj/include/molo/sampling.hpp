#pragma once

// Shared Monte Carlo primitive for the perturbed-leader updates: the average
// of polar factors of S + c L Z over k Gaussian draws. Both the online FTPL
// learner and the Pion optimizer call this, with identical sample streams, so
// the two are bit-identical on shared state.

#include "molo/core.hpp"
#include "molo/potentials.hpp"
#include "molo/rng.hpp"

namespace molo {

/// (1/k) sum_i polar(S + scale * Lchol * Z_i), Z_i i.i.d. standard Gaussian.
/// Deterministic in (seed, k); samples use independent substreams and reduce
/// in index order.
inline Matrix perturbed_polar_mean(const Matrix& s, const Matrix& lchol, double scale, int k,
                                   std::uint64_t seed) {
    const Eigen::Index m = s.rows(), n = s.cols();
    Matrix mean = Matrix::Zero(m, n);
    for (int i = 0; i < k; ++i) {
        Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(i));
        Matrix sample = s + scale * (lchol * rng.gaussian_matrix(m, n));
        double nuc;
        Matrix polar;
        if (!detail::nuclear_and_polar(sample, nuc, polar)) {
            Rng retry = Rng::stream(seed ^ 0x5bf03635ULL, static_cast<std::uint64_t>(i));
            sample = s + scale * (lchol * retry.gaussian_matrix(m, n));
            if (!detail::nuclear_and_polar(sample, nuc, polar))
                throw RankDeficient("perturbed_polar_mean: rank-deficient sample after reseed");
        }
        mean += polar;
    }
    return mean / k;
}

}  // namespace molo
