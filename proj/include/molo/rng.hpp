#pragma once

// Counter-free splittable RNG built on splitmix64. Substreams are derived
// deterministically from (seed, stream index), so Monte Carlo samples can be
// evaluated in any order or in parallel and still reproduce the serial result
// bit-for-bit.

#include "molo/core.hpp"

#include <cstdint>

namespace molo {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {
        // decorrelate nearby seeds
        splitmix64(state_);
        splitmix64(state_);
    }

    /// Substream `index` of the stream seeded with `seed`.
    static Rng stream(std::uint64_t seed, std::uint64_t index) {
        std::uint64_t s = seed;
        std::uint64_t a = splitmix64(s);
        return Rng(a ^ (index * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
    }

    std::uint64_t next_u64() { return splitmix64(state_); }

    /// Uniform double in (0, 1).
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    /// Exp(1) via inverse CDF.
    double exponential() { return -std::log(uniform()); }

    Matrix gaussian_matrix(Eigen::Index m, Eigen::Index n) {
        Matrix z(m, n);
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = 0; j < n; ++j) z(i, j) = gaussian();
        return z;
    }

  private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace molo
