#pragma once

// Online-to-nonconvex conversion harness and the Muon / Pion / Leon matrix
// optimizers, in theory mode (Exp(1) step sizes, EWA output, random index tau)
// and practical mode (constant learning rate).

#include "molo/core.hpp"
#include "molo/kernels.hpp"
#include "molo/rng.hpp"
#include "molo/sampling.hpp"
#include "molo/spectral.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace molo {

enum class OptimizerKind { muon, pion, leon };
enum class OptimizerMode { theory, practical };

inline const char* to_string(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::muon: return "muon";
        case OptimizerKind::pion: return "pion";
        case OptimizerKind::leon: return "leon";
    }
    return "?";
}

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::leon;
    OptimizerMode mode = OptimizerMode::practical;
    double beta1 = 0.9;  // gradient EMA
    double beta2 = 0.9;  // second-moment EMA
    double D = 1.0;      // theory-mode radius
    double lr = 0.1;     // practical-mode constant learning rate
    double G = 1.0;
    double eta = 1.0;
    int mc_samples = 16;  // pion
    std::uint64_t seed = 0;
    int T = 1000;
    // Scale of the seeded Gaussian initialization. The sensing subgradient is
    // exactly zero at W = 0, which makes the origin a fixed point of every
    // deterministic-direction optimizer; a small random start breaks the tie.
    // Set to 0 to start at the origin.
    double init_scale = 0.05;
};

struct OptimizerState {
    Matrix W;      // parameters
    Matrix G_ema;  // hat G_t = beta1 hat G_{t-1} + G_t
    Matrix M_ema;  // hat M_t = beta2 hat M_{t-1} + G_t G_t^T
    int t = 0;
    Matrix ewa_num;       // sum beta^{t-s} W_s, kept as a recurrence
    double ewa_den = 0.0; // sum beta^{t-s} = (1-beta^t)/(1-beta)
};

inline OptimizerState make_optimizer_state(const Matrix& w0) {
    OptimizerState st;
    st.W = w0;
    st.G_ema = Matrix::Zero(w0.rows(), w0.cols());
    st.M_ema = Matrix::Zero(w0.rows(), w0.rows());
    st.ewa_num = Matrix::Zero(w0.rows(), w0.cols());
    return st;
}

namespace detail {

inline double opt_ridge(const Matrix& m_ema) {
    return 1e-8 * (1.0 + m_ema.trace() / m_ema.rows());
}

}  // namespace detail

/// Unit Muon direction: polar(hat G_t) via Newton-Schulz with the SVD route
/// as fallback; zero EMA yields a zero direction.
inline Matrix muon_direction(const OptimizerState& state, const KernelOptions& opt = {}) {
    if (state.G_ema.norm() == 0.0) return Matrix::Zero(state.W.rows(), state.W.cols());
    try {
        KernelOptions o = opt;
        o.tol = std::min(o.tol, 1e-13);
        return polar_ns(state.G_ema, o).value;
    } catch (const Error&) {
        return pseudo_polar(state.G_ema);
    }
}

/// Unit Pion direction: (1/k) sum polar(hat G_t + c L Z_i). Theory mode uses
/// the discounted preconditioner Cholesky factor of G^2 beta1^{-2} I + hat M_t
/// scaled by 1/eta; practical mode factors hat M_t (ridged) with c = 1.
inline Matrix pion_direction(const OptimizerState& state, const OptimizerConfig& config,
                             std::uint64_t seed) {
    const Eigen::Index m = state.W.rows();
    Matrix gram;
    double scale;
    if (config.mode == OptimizerMode::theory) {
        gram = (config.G * config.G) / (config.beta1 * config.beta1) * Matrix::Identity(m, m) +
               state.M_ema;
        scale = 1.0 / config.eta;
    } else {
        gram = state.M_ema + detail::opt_ridge(state.M_ema) * Matrix::Identity(m, m);
        scale = 1.0;
    }
    Matrix lchol = cholesky(gram);
    return perturbed_polar_mean(state.G_ema, lchol, scale, config.mc_samples, seed);
}

enum class LeonRoute { inverse_sqrt, augmented_polar };

/// Unit Leon direction: (hat G hat G^T + P)^{-1/2} hat G where P is the
/// discounted preconditioner Gram (theory) or hat M_t with ridge (practical).
/// Both computation routes are exposed; they agree to kernel tolerance.
inline Matrix leon_direction(const OptimizerState& state, const OptimizerConfig& config,
                             LeonRoute route = LeonRoute::inverse_sqrt,
                             const KernelOptions& opt = {}) {
    const Eigen::Index m = state.W.rows();
    Matrix precond;
    if (config.mode == OptimizerMode::theory) {
        precond = ((config.G * config.G) / (config.beta1 * config.beta1) *
                       Matrix::Identity(m, m) +
                   state.M_ema) /
                  (config.eta * config.eta);
    } else {
        precond = state.M_ema + detail::opt_ridge(state.M_ema) * Matrix::Identity(m, m);
    }
    if (state.G_ema.norm() == 0.0) return Matrix::Zero(state.W.rows(), state.W.cols());
    if (route == LeonRoute::augmented_polar) return polar_augmented_ns(state.G_ema, precond, opt).value;
    Matrix gram = state.G_ema * state.G_ema.transpose() + precond;
    return inv_sqrt_psd(gram) * state.G_ema;
}

/// Unit direction for the configured optimizer; the caller applies the -D or
/// -lr scaling.
inline Matrix optimizer_direction(const OptimizerState& state, const OptimizerConfig& config,
                                  std::uint64_t step_seed) {
    switch (config.kind) {
        case OptimizerKind::muon: return muon_direction(state);
        case OptimizerKind::pion: return pion_direction(state, config, step_seed);
        case OptimizerKind::leon: return leon_direction(state, config);
    }
    throw Error("optimizer_direction: unknown kind");
}

// -- objectives --------------------------------------------------------------

struct Objective {
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    std::function<double(const Matrix&)> loss;
    std::function<Matrix(const Matrix&, std::uint64_t)> grad;  // deterministic in (W, seed)
};

/// Robust matrix sensing with nonconvex ripples:
/// f(X) = (1/m) sum_k (|u_k| (1 - 0.9 cos(3 u_k)) + 0.5), u_k = <A_k, X>,
/// with i.i.d. Gaussian measurement matrices A_k. The subgradient of
/// u -> |u|(1 - 0.9 cos 3u) is sign(u)(1 - 0.9 cos 3u) + 2.7 |u| sin 3u,
/// taken as 0 at u = 0.
inline Objective matrix_sensing_objective(int d, int m_meas, std::uint64_t seed) {
    if (d < 1 || m_meas < 1) throw Error("matrix_sensing_objective: bad dimensions");
    auto measurements = std::make_shared<std::vector<Matrix>>();
    measurements->reserve(m_meas);
    for (int k = 0; k < m_meas; ++k) {
        Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(k));
        measurements->push_back(rng.gaussian_matrix(d, d));
    }
    Objective obj;
    obj.rows = d;
    obj.cols = d;
    obj.loss = [measurements](const Matrix& x) {
        double total = 0.0;
        for (const Matrix& a : *measurements) {
            const double u = (a.array() * x.array()).sum();
            total += std::abs(u) * (1.0 - 0.9 * std::cos(3.0 * u)) + 0.5;
        }
        return total / measurements->size();
    };
    obj.grad = [measurements, d](const Matrix& x, std::uint64_t) {
        Matrix g = Matrix::Zero(d, d);
        for (const Matrix& a : *measurements) {
            const double u = (a.array() * x.array()).sum();
            double h = 0.0;
            if (u != 0.0)
                h = (u > 0 ? 1.0 : -1.0) * (1.0 - 0.9 * std::cos(3.0 * u)) +
                    2.7 * std::abs(u) * std::sin(3.0 * u);
            g += h * a;
        }
        return Matrix(g / measurements->size());
    };
    return obj;
}

namespace detail {

inline Matrix initial_point(const Objective& objective, const OptimizerConfig& config,
                            std::uint64_t seed) {
    if (config.init_scale == 0.0) return Matrix::Zero(objective.rows, objective.cols);
    Rng rng = Rng::stream(seed, 3);
    return config.init_scale * rng.gaussian_matrix(objective.rows, objective.cols);
}

}  // namespace detail

// -- EWA / tau machinery (theory mode) ---------------------------------------

/// Fold W_t into the exponentially weighted average recurrences.
inline void ewa_push(OptimizerState& state, double beta) {
    state.ewa_num = beta * state.ewa_num + state.W;
    state.ewa_den = beta * state.ewa_den + 1.0;
}

inline Matrix ewa_value(const OptimizerState& state) {
    if (state.ewa_den == 0.0) throw Error("ewa_value: empty average");
    return state.ewa_num / state.ewa_den;
}

/// Pr(tau = t) for t = 1..T: (1-beta^t)/T for t < T and (1-beta^T)/((1-beta)T)
/// at t = T. The weights sum to one for any beta in (0,1).
inline std::vector<double> tau_weights(double beta, int T) {
    std::vector<double> w(T);
    for (int t = 1; t < T; ++t) w[t - 1] = (1.0 - std::pow(beta, t)) / T;
    w[T - 1] = (1.0 - std::pow(beta, T)) / ((1.0 - beta) * T);
    return w;
}

inline int sample_tau(double beta, int T, Rng& rng) {
    std::vector<double> w = tau_weights(beta, T);
    double u = rng.uniform();
    for (int t = 0; t < T; ++t) {
        u -= w[t];
        if (u <= 0.0) return t + 1;
    }
    return T;
}

// -- run harnesses -----------------------------------------------------------

struct OptimizerStep {
    int t = 0;
    double loss = 0.0;           // f(W_t) before the step
    double grad_ema_nuc = 0.0;   // ||hat G_t||_*
    double direction_opnorm = 0.0;
    double osc_partial = 0.0;    // running sum of positive loss increments
    double step_size = 0.0;      // s_{t+1} (theory) or lr (practical)
};

struct OptimizerRun {
    std::vector<OptimizerStep> trace;
    Matrix W_final;
    Matrix W_bar_tau;  // theory mode only
    int tau = 0;
    double final_loss = 0.0;
    double osc_total = 0.0;
    // stationarity proxies at the reported point
    double proxy_grad_opnorm = 0.0;
    double proxy_grad_nuclear = 0.0;
};

/// Theory-mode O2NC run: W_{t+1} = W_t + s_{t+1} X_{t+1}, s ~ Exp(1), with
/// incremental EWA and the random output index tau. Fully reproducible from
/// the run seed (fixed stream offsets for Exp(1) draws, tau, and Pion noise).
inline OptimizerRun o2nc_run(const Objective& objective, OptimizerConfig config,
                             std::uint64_t seed) {
    config.mode = OptimizerMode::theory;
    OptimizerState state = make_optimizer_state(detail::initial_point(objective, config, seed));
    Rng exp_rng = Rng::stream(seed, 1);
    OptimizerRun run;
    double prev_loss = objective.loss(state.W);
    for (int t = 1; t <= config.T; ++t) {
        Matrix g = objective.grad(state.W, seed ^ (0x51afde3bULL * t));
        state.G_ema = config.beta1 * state.G_ema + g;
        state.M_ema = config.beta2 * state.M_ema + g * g.transpose();
        state.t = t;
        Matrix dir = optimizer_direction(state, config, seed ^ (0x2545f491ULL * t));
        const double s = exp_rng.exponential();
        Matrix x_next = -config.D * dir;
        state.W += s * x_next;
        ewa_push(state, config.beta1);

        OptimizerStep step;
        step.t = t;
        step.loss = prev_loss;
        step.grad_ema_nuc = nuclear_norm(state.G_ema);
        step.direction_opnorm = operator_norm(x_next);
        const double cur_loss = objective.loss(state.W);
        run.osc_total += std::max(0.0, cur_loss - prev_loss);
        step.osc_partial = run.osc_total;
        step.step_size = s;
        run.trace.push_back(step);
        prev_loss = cur_loss;
    }
    Rng tau_rng = Rng::stream(seed, 2);
    run.tau = sample_tau(config.beta1, config.T, tau_rng);
    // W_bar_tau replayed from the stored recurrence is only available at T;
    // recompute by a second pass over the same deterministic stream
    {
        OptimizerState replay =
            make_optimizer_state(detail::initial_point(objective, config, seed));
        Rng exp_rng2 = Rng::stream(seed, 1);
        for (int t = 1; t <= run.tau; ++t) {
            Matrix g = objective.grad(replay.W, seed ^ (0x51afde3bULL * t));
            replay.G_ema = config.beta1 * replay.G_ema + g;
            replay.M_ema = config.beta2 * replay.M_ema + g * g.transpose();
            replay.t = t;
            Matrix dir = optimizer_direction(replay, config, seed ^ (0x2545f491ULL * t));
            const double s = exp_rng2.exponential();
            replay.W += s * (-config.D * dir);
            ewa_push(replay, config.beta1);
        }
        run.W_bar_tau = ewa_value(replay);
    }
    run.W_final = state.W;
    run.final_loss = prev_loss;
    Matrix g_at_tau = objective.grad(run.W_bar_tau, seed ^ 0x6b43a9b5ULL);
    run.proxy_grad_opnorm = operator_norm(g_at_tau);
    run.proxy_grad_nuclear = nuclear_norm(g_at_tau);
    return run;
}

/// Practical-mode run with a constant learning rate.
inline OptimizerRun run_practical(const Objective& objective, OptimizerConfig config,
                                  std::uint64_t seed) {
    config.mode = OptimizerMode::practical;
    OptimizerState state = make_optimizer_state(detail::initial_point(objective, config, seed));
    OptimizerRun run;
    double prev_loss = objective.loss(state.W);
    for (int t = 1; t <= config.T; ++t) {
        Matrix g = objective.grad(state.W, seed ^ (0x51afde3bULL * t));
        state.G_ema = config.beta1 * state.G_ema + g;
        state.M_ema = config.beta2 * state.M_ema + g * g.transpose();
        state.t = t;
        Matrix dir = optimizer_direction(state, config, seed ^ (0x2545f491ULL * t));
        state.W -= config.lr * dir;

        OptimizerStep step;
        step.t = t;
        step.loss = prev_loss;
        step.grad_ema_nuc = nuclear_norm(state.G_ema);
        step.direction_opnorm = operator_norm(dir);
        const double cur_loss = objective.loss(state.W);
        run.osc_total += std::max(0.0, cur_loss - prev_loss);
        step.osc_partial = run.osc_total;
        step.step_size = config.lr;
        run.trace.push_back(step);
        prev_loss = cur_loss;
    }
    run.W_final = state.W;
    run.final_loss = prev_loss;
    Matrix g_final = objective.grad(state.W, seed ^ 0x6b43a9b5ULL);
    run.proxy_grad_opnorm = operator_norm(g_final);
    run.proxy_grad_nuclear = nuclear_norm(g_final);
    return run;
}

}  // namespace molo
