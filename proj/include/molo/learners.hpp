#pragma once

// Online learners over the operator-norm ball: FTL, FTRL, FTPL, FAML, and the
// Shampoo baselines, with shared discounted preconditioner state, per-round
// regret accounting, and the regret-decomposition identity as a runtime check.

#include "molo/core.hpp"
#include "molo/kernels.hpp"
#include "molo/potentials.hpp"
#include "molo/rng.hpp"
#include "molo/sampling.hpp"
#include "molo/spectral.hpp"

#include <string>
#include <vector>

namespace molo {

enum class LearnerKind { ftl, ftrl, ftpl, faml, shampoo, one_sided_shampoo };

inline const char* to_string(LearnerKind k) {
    switch (k) {
        case LearnerKind::ftl: return "ftl";
        case LearnerKind::ftrl: return "ftrl";
        case LearnerKind::ftpl: return "ftpl";
        case LearnerKind::faml: return "faml";
        case LearnerKind::shampoo: return "shampoo";
        case LearnerKind::one_sided_shampoo: return "one_sided_shampoo";
    }
    return "?";
}

struct LearnerConfig {
    LearnerKind kind = LearnerKind::faml;
    double D = 1.0;        // operator-norm radius of the decision set
    double G = 1.0;        // a-priori bound on ||G_t||_op
    double eta = 0.0;      // 0 = use the per-kind default sqrt(alpha/beta)
    double discount = 1.0; // beta; 1 = undiscounted
    int mc_samples = 256;  // ftpl
    std::uint64_t seed = 0;
    double qp_tol = 1e-8;  // ftrl / shampoo inner solver
    int qp_max_iters = 10000;
};

/// Default eta = sqrt(alpha/beta) of the learner's potential family.
inline double default_eta(LearnerKind kind, int m, int n) {
    switch (kind) {
        case LearnerKind::faml: return 1.0;                      // alpha = beta = 1
        case LearnerKind::ftrl: return 1.0 / std::sqrt(2.0);     // alpha = 1/2, beta = 1
        case LearnerKind::ftpl: {
            // alpha = sqrt(m)+sqrt(n), beta = 1/sqrt(n-m-1); shapes with
            // n < m+2 fall back to eta = 1 (no admissibility guarantee there)
            if (n < m + 2) return 1.0;
            return std::sqrt((std::sqrt(double(m)) + std::sqrt(double(n))) *
                             std::sqrt(double(n - m - 1)));
        }
        case LearnerKind::shampoo:
        case LearnerKind::one_sided_shampoo:
        case LearnerKind::ftl: return 1.0;
    }
    return 1.0;
}

struct LearnerState {
    int t = 0;
    Matrix S;       // discounted cumulative gradient
    Matrix M;       // discounted sum of G G^T
    Matrix N;       // discounted sum of G^T G (full shampoo only)
    Matrix X_next;  // current action, X_1 = 0
    double cum_loss = 0.0;
    double max_grad_opnorm = 0.0;
    bool grad_bound_exceeded = false;
    int last_solver_iters = 0;
    bool transposed = false;  // internal orientation flip when m > n
};

inline LearnerState make_state(int m, int n, LearnerKind kind) {
    LearnerState st;
    st.transposed = m > n;
    if (st.transposed) std::swap(m, n);
    st.S = Matrix::Zero(m, n);
    st.M = Matrix::Zero(m, m);
    if (kind == LearnerKind::shampoo) st.N = Matrix::Zero(n, n);
    st.X_next = Matrix::Zero(m, n);
    return st;
}

/// L_t = sqrt(G^2 discount^{-2} I + M); always positive definite for G > 0.
inline Matrix preconditioner(const LearnerState& state, double G, double discount = 1.0) {
    const Eigen::Index m = state.M.rows();
    return sqrt_psd((G * G) / (discount * discount) * Matrix::Identity(m, m) + state.M);
}

// -- direction operators (all on the internal m <= n orientation) -----------

/// FTL: -D polar(S); rank-deficient S (including S = 0) takes the
/// range-restricted polar, which is still a valid leader.
inline Matrix ftl_direction(const Matrix& s, double D) {
    if (s.norm() == 0.0) return Matrix::Zero(s.rows(), s.cols());
    return -D * pseudo_polar(s);
}

/// FAML: -eta D (eta^2 S S^T + G^2 discount^{-2} I + M)^{-1/2} S.
inline Matrix faml_direction(const Matrix& s, const Matrix& m_mat, double D, double G, double eta,
                             double discount = 1.0) {
    const Eigen::Index m = s.rows();
    Matrix gram = (eta * eta) * (s * s.transpose()) +
                  (G * G) / (discount * discount) * Matrix::Identity(m, m) + m_mat;
    return -eta * D * inv_sqrt_psd(gram) * s;
}

/// FAML via the augmented polar recursion; agrees with faml_direction to
/// kernel tolerance.
inline Matrix faml_direction_augmented(const Matrix& s, const Matrix& m_mat, double D, double G,
                                       double eta, double discount = 1.0,
                                       const KernelOptions& opt = {}) {
    const Eigen::Index m = s.rows();
    Matrix llt = (G * G) / (discount * discount) * Matrix::Identity(m, m) + m_mat;
    return -D * polar_augmented_ns(eta * s, llt, opt).value;
}

/// FTPL: -(D/k) sum_i polar(S + (1/eta) Lchol Z_i) with Lchol the Cholesky
/// factor of G^2 discount^{-2} I + M.
inline Matrix ftpl_direction(const Matrix& s, const Matrix& m_mat, double D, double G, double eta,
                             double discount, int k, std::uint64_t seed) {
    const Eigen::Index m = s.rows();
    Matrix gram = (G * G) / (discount * discount) * Matrix::Identity(m, m) + m_mat;
    Matrix lchol = cholesky(gram);
    return -D * perturbed_polar_mean(s, lchol, 1.0 / eta, k, seed);
}

/// FTRL: D argmin over the unit ball of <S, X> + (1/2 eta) tr(X^T L X),
/// via the regularized-potential projected-gradient solver.
inline Matrix ftrl_direction(const Matrix& s, const Matrix& l, double D, double eta,
                             double qp_tol = 1e-8, int qp_max_iters = 10000) {
    PotentialFamily fam;
    fam.kind = PotentialKind::regularized;
    fam.qp_tol = qp_tol;
    fam.qp_max_iters = qp_max_iters;
    return -D * eval_regularized(s, l / eta, fam).gradient;
}

namespace detail {

inline double ridge_eps(const Matrix& m_mat) {
    return 1e-8 * (1.0 + m_mat.trace() / m_mat.rows());
}

/// Quadratic step subproblem of the OGD/Shampoo update over ||X||_op <= D,
/// solved by projected gradient with singular-value clipping.
inline Matrix shampoo_qp(const Matrix& g, const Matrix& x_t, const Matrix& l, const Matrix& r,
                         double D, double eta, double qp_tol, int qp_max_iters,
                         int* iters_out = nullptr) {
    const double lmax = sym_eig(l, "shampoo_qp").values(l.rows() - 1);
    const double rmax = sym_eig(r, "shampoo_qp").values(r.rows() - 1);
    const double step = eta / std::max(lmax * rmax, 1e-300);
    Matrix x = clip_operator_norm(x_t, D);
    const double stop = qp_tol * std::max(1.0, D);
    double residual = std::numeric_limits<double>::infinity();
    for (int it = 0; it < qp_max_iters; ++it) {
        Matrix grad = g + (1.0 / eta) * (l * (x - x_t) * r);
        Matrix candidate = clip_operator_norm(x - step * grad, D);
        residual = (x - candidate).norm();
        x = std::move(candidate);
        if (residual <= stop) {
            if (iters_out) *iters_out = it + 1;
            return x;
        }
    }
    throw QpNotConverged(residual);
}

}  // namespace detail

/// One round of the OGD/Shampoo baseline after state.M / state.N have been
/// updated with G_t. `variant` full uses L = M^{1/4}, R = N^{1/4}; one-sided
/// uses L = M^{1/2}, R = I.
inline Matrix shampoo_step(bool one_sided, LearnerState& state, const Matrix& g, double D,
                           double eta, double qp_tol = 1e-8, int qp_max_iters = 10000) {
    const Eigen::Index m = state.M.rows();
    const Eigen::Index n = g.cols();
    Matrix l = pow_psd(state.M + detail::ridge_eps(state.M) * Matrix::Identity(m, m),
                       one_sided ? 0.5 : 0.25);
    Matrix r = one_sided
                   ? Matrix(Matrix::Identity(n, n))
                   : pow_psd(state.N + detail::ridge_eps(state.N) * Matrix::Identity(n, n), 0.25);
    return detail::shampoo_qp(g, state.X_next, l, r, D, eta, qp_tol, qp_max_iters,
                              &state.last_solver_iters);
}

/// Feed gradient G_t to the learner: records the loss against the old action,
/// folds G_t into the discounted sums, computes the next action, and returns
/// it (in the caller's orientation).
inline Matrix advance(const LearnerConfig& config, LearnerState& state, const Matrix& g_in) {
    require_finite(g_in, "advance");
    Matrix g = state.transposed ? Matrix(g_in.transpose()) : g_in;
    const Eigen::Index m = g.rows(), n = g.cols();
    if (state.S.rows() != m || state.S.cols() != n) throw Error("advance: dimension mismatch");

    const double gnorm = operator_norm(g);
    state.max_grad_opnorm = std::max(state.max_grad_opnorm, gnorm);
    if (gnorm > config.G * (1.0 + 1e-6)) state.grad_bound_exceeded = true;  // warn, keep going

    state.cum_loss += (g.array() * state.X_next.array()).sum();
    const double beta = config.discount;
    state.S = beta * state.S + g;
    state.M = beta * beta * state.M + g * g.transpose();
    if (config.kind == LearnerKind::shampoo) state.N = beta * beta * state.N + g.transpose() * g;
    state.t += 1;

    const double eta =
        config.eta > 0.0 ? config.eta : default_eta(config.kind, static_cast<int>(m), static_cast<int>(n));
    state.last_solver_iters = 0;
    switch (config.kind) {
        case LearnerKind::ftl:
            state.X_next = ftl_direction(state.S, config.D);
            break;
        case LearnerKind::faml:
            state.X_next = faml_direction(state.S, state.M, config.D, config.G, eta, beta);
            break;
        case LearnerKind::ftpl:
            state.X_next = ftpl_direction(state.S, state.M, config.D, config.G, eta, beta,
                                          config.mc_samples,
                                          config.seed ^ (0x632be59bULL * state.t));
            break;
        case LearnerKind::ftrl: {
            Matrix l = preconditioner(state, config.G, beta);
            state.X_next =
                ftrl_direction(state.S, l, config.D, eta, config.qp_tol, config.qp_max_iters);
            break;
        }
        case LearnerKind::shampoo:
        case LearnerKind::one_sided_shampoo: {
            const double qeta = config.eta > 0.0 ? config.eta : std::sqrt(2.0) * config.D;
            state.X_next = shampoo_step(config.kind == LearnerKind::one_sided_shampoo, state, g,
                                        config.D, qeta, config.qp_tol, config.qp_max_iters);
            break;
        }
    }
    return state.transposed ? Matrix(state.X_next.transpose()) : state.X_next;
}

// -- regret accounting -------------------------------------------------------

struct RegretRecord {
    int t = 0;
    double inst_loss = 0.0;
    double cum_loss = 0.0;
    double nuclear_S = 0.0;
    double regret = 0.0;
    double bound = 0.0;
    double feas_margin = 0.0;  // D - ||X_t||_op
    int solver_iters = 0;
};

/// Reg_T = sum <G_t, X_t> + D ||S_T||_* (undiscounted definition).
inline double regret_of_run(const std::vector<RegretRecord>& records, double D) {
    if (records.empty()) throw Error("regret_of_run: empty run");
    const RegretRecord& last = records.back();
    return last.cum_loss + D * last.nuclear_S;
}

/// Theoretical regret bound for the learner at the current state.
inline double regret_bound(const LearnerConfig& config, const LearnerState& state,
                           double first_grad_nuc) {
    const int m = static_cast<int>(state.M.rows());
    const int n = static_cast<int>(state.S.cols());
    const double D = config.D, G = config.G;
    const double tr_sqrt_M = sqrt_psd(state.M).trace();
    switch (config.kind) {
        case LearnerKind::faml:
            return 2.0 * D * (tr_sqrt_M + m * G);
        case LearnerKind::ftrl:
            return std::sqrt(2.0) * D *
                       sqrt_psd(G * G * Matrix::Identity(m, m) + state.M).trace() +
                   (1.0 - 1.0 / std::sqrt(2.0)) * D * first_grad_nuc;
        case LearnerKind::ftpl: {
            if (n < m + 2) return std::numeric_limits<double>::infinity();
            const double c = std::pow(double(n) / double(n - m - 1), 0.25);
            return 2.0 * std::sqrt(2.0) * D * c * (tr_sqrt_M + m * G);
        }
        case LearnerKind::one_sided_shampoo:
            // ||X||_op of the decision set is 2D
            return 2.0 * (2.0 * D) * tr_sqrt_M;
        case LearnerKind::shampoo: {
            const double trM14 = pow_psd(state.M, 0.25).trace();
            const double trN14 = pow_psd(state.N, 0.25).trace();
            const double trM12 = tr_sqrt_M;
            const double trN12 = sqrt_psd(state.N).trace();
            const double opM14 = std::pow(operator_norm(state.M), 0.25);
            const double opN14 = std::pow(operator_norm(state.N), 0.25);
            const double expr = std::max({std::sqrt(trM12 * trN12), opM14 * trN14, trM14 * opN14});
            return 4.0 * (2.0 * D) * expr;
        }
        case LearnerKind::ftl:
            return std::numeric_limits<double>::infinity();
    }
    return std::numeric_limits<double>::infinity();
}

// -- adversaries -------------------------------------------------------------

enum class AdversaryKind { gaussian, signflip, lowrank_burst };

inline const char* to_string(AdversaryKind k) {
    switch (k) {
        case AdversaryKind::gaussian: return "gaussian";
        case AdversaryKind::signflip: return "signflip";
        case AdversaryKind::lowrank_burst: return "lowrank_burst";
    }
    return "?";
}

/// Gradient stream generator. The sign-flip adversary is adaptive: it plays
/// G * polar(X_t) so the learner's current action always incurs maximal loss.
class Adversary {
  public:
    Adversary(AdversaryKind kind, int m, int n, double G, std::uint64_t seed)
        : kind_(kind), m_(m), n_(n), G_(G), seed_(seed) {}

    Matrix next(int t, const Matrix& x_t) {
        Rng rng = Rng::stream(seed_, static_cast<std::uint64_t>(t));
        switch (kind_) {
            case AdversaryKind::gaussian: {
                Matrix z = rng.gaussian_matrix(m_, n_);
                return G_ * z / operator_norm(z);
            }
            case AdversaryKind::signflip: {
                if (x_t.norm() == 0.0) {
                    Matrix e = Matrix::Zero(m_, n_);
                    e(0, 0) = G_;
                    return e;
                }
                return G_ * pseudo_polar(x_t);
            }
            case AdversaryKind::lowrank_burst: {
                if (t % 10 == 0 || u_.size() == 0) {
                    Rng fresh = Rng::stream(seed_ ^ 0x7f4a7c15ULL, static_cast<std::uint64_t>(t / 10));
                    u_ = fresh.gaussian_matrix(m_, 1);
                    v_ = fresh.gaussian_matrix(n_, 1);
                    u_ /= u_.norm();
                    v_ /= v_.norm();
                }
                return G_ * u_ * v_.transpose();
            }
        }
        throw Error("adversary: unknown kind");
    }

  private:
    AdversaryKind kind_;
    int m_, n_;
    double G_;
    std::uint64_t seed_;
    Matrix u_, v_;
};

inline Matrix state_S_external(const LearnerState& state) {
    return state.transposed ? Matrix(state.S.transpose()) : state.S;
}

struct RunResult {
    std::vector<RegretRecord> records;
    LearnerState state;
    std::vector<Matrix> gradients;  // the realized stream
};

/// Run a learner against an adversary for T rounds.
inline RunResult run_learner(const LearnerConfig& config, AdversaryKind adversary, int m, int n,
                             int T, std::uint64_t adversary_seed) {
    RunResult out;
    out.state = make_state(m, n, config.kind);
    Adversary adv(adversary, m, n, config.G, adversary_seed);
    Matrix x_t = Matrix::Zero(m, n);  // X_1 = 0
    double first_grad_nuc = 0.0;
    out.records.reserve(T);
    for (int t = 1; t <= T; ++t) {
        Matrix g = adv.next(t, x_t);
        if (t == 1) first_grad_nuc = nuclear_norm(g);
        const double inst = (g.array() * x_t.array()).sum();
        Matrix x_next = advance(config, out.state, g);
        RegretRecord rec;
        rec.t = t;
        rec.inst_loss = inst;
        rec.cum_loss = out.state.cum_loss;
        rec.nuclear_S = nuclear_norm(state_S_external(out.state));
        rec.regret = rec.cum_loss + config.D * rec.nuclear_S;
        rec.bound = regret_bound(config, out.state, first_grad_nuc);
        rec.feas_margin = config.D - operator_norm(x_next);
        rec.solver_iters = out.state.last_solver_iters;
        out.records.push_back(rec);
        out.gradients.push_back(g);
        x_t = std::move(x_next);
    }
    return out;
}

/// Replay a fixed gradient sequence through a learner.
inline RunResult run_learner_on(const LearnerConfig& config, const std::vector<Matrix>& gradients) {
    if (gradients.empty()) throw Error("run_learner_on: empty stream");
    const int m = static_cast<int>(gradients[0].rows());
    const int n = static_cast<int>(gradients[0].cols());
    RunResult out;
    out.state = make_state(m, n, config.kind);
    Matrix x_t = Matrix::Zero(m, n);
    double first_grad_nuc = nuclear_norm(gradients[0]);
    int t = 0;
    for (const Matrix& g : gradients) {
        ++t;
        const double inst = (g.array() * x_t.array()).sum();
        Matrix x_next = advance(config, out.state, g);
        RegretRecord rec;
        rec.t = t;
        rec.inst_loss = inst;
        rec.cum_loss = out.state.cum_loss;
        rec.nuclear_S = nuclear_norm(state_S_external(out.state));
        rec.regret = rec.cum_loss + config.D * rec.nuclear_S;
        rec.bound = regret_bound(config, out.state, first_grad_nuc);
        rec.feas_margin = config.D - operator_norm(x_next);
        rec.solver_iters = out.state.last_solver_iters;
        out.records.push_back(rec);
        out.gradients.push_back(g);
        x_t = std::move(x_next);
    }
    return out;
}

// -- identity checks ---------------------------------------------------------

/// Regret-decomposition identity residual for a deterministic-potential run
/// (hyperbolic for faml, regularized for ftrl), undiscounted. Recomputes both
/// sides from the gradient stream and returns |LHS - RHS|.
inline double gbpa_decomposition_check(LearnerKind kind, const std::vector<Matrix>& gradients,
                                       double D, double G, double eta_in = 0.0,
                                       double qp_tol = 1e-10, int qp_max_iters = 200000) {
    if (kind != LearnerKind::faml && kind != LearnerKind::ftrl)
        throw Error("gbpa_decomposition_check: deterministic potentials only");
    const int T = static_cast<int>(gradients.size());
    const Eigen::Index m = gradients[0].rows(), n = gradients[0].cols();
    const double eta = eta_in > 0.0
                           ? eta_in
                           : default_eta(kind, static_cast<int>(m), static_cast<int>(n));

    // potential eval at (S, L_t/eta): value and gradient
    auto eval_at = [&](const Matrix& s, const Matrix& m_t) -> PotentialEval {
        Matrix gram = G * G * Matrix::Identity(m, m) + m_t;  // = L_t L_t^T
        if (kind == LearnerKind::faml) return eval_hyperbolic(s, gram / (eta * eta));
        PotentialFamily fam;
        fam.kind = PotentialKind::regularized;
        fam.qp_tol = qp_tol;
        fam.qp_max_iters = qp_max_iters;
        return eval_regularized(s, sqrt_psd(gram) / eta, fam);
    };

    std::vector<Matrix> s_seq(T), m_seq(T);
    Matrix s = Matrix::Zero(m, n), mm = Matrix::Zero(m, m);
    for (int t = 0; t < T; ++t) {
        s += gradients[t];
        mm += gradients[t] * gradients[t].transpose();
        s_seq[t] = s;
        m_seq[t] = mm;
    }

    std::vector<PotentialEval> at_own(T);   // Phi~_t(S_t)
    for (int t = 0; t < T; ++t) at_own[t] = eval_at(s_seq[t], m_seq[t]);

    // LHS: run the GBPA actions X_{t+1} = -D grad Phi~_t(S_t)
    double lhs = 0.0;
    Matrix x = Matrix::Zero(m, n);
    for (int t = 0; t < T; ++t) {
        lhs += (gradients[t].array() * x.array()).sum();
        x = -D * at_own[t].gradient;
    }
    lhs += D * nuclear_norm(s_seq[T - 1]);

    // RHS: underestimation + Bregman sum + temporal variation + D Phi~_1(G_1)
    double rhs = D * (nuclear_norm(s_seq[T - 1]) - at_own[T - 1].value);
    for (int t = 0; t + 1 < T; ++t) {
        PotentialEval next_at_t = eval_at(s_seq[t + 1], m_seq[t]);  // Phi~_t(S_{t+1})
        const Matrix diff = s_seq[t + 1] - s_seq[t];
        rhs += D * (next_at_t.value - at_own[t].value -
                    (at_own[t].gradient.array() * diff.array()).sum());  // Bregman
        rhs += D * (at_own[t + 1].value - next_at_t.value);              // temporal variation
    }
    rhs += D * at_own[0].value;
    return std::abs(lhs - rhs);
}

/// Trace-potential inequality: sum_t tr(G_t^T M_t^{-1/2} G_t) <= 2 Tr(sqrt(M_T)),
/// evaluated with the range-restricted inverse square root.
inline bool trace_potential_check(const std::vector<Matrix>& gradients, double slack = 1e-8) {
    if (gradients.empty()) return true;
    const Eigen::Index m = gradients[0].rows();
    Matrix mm = Matrix::Zero(m, m);
    double lhs = 0.0;
    for (const Matrix& g : gradients) {
        mm += g * g.transpose();
        SymEig es = sym_eig(mm, "trace_potential_check");
        const double top = es.values(es.values.size() - 1);
        Vector d = Vector::Zero(es.values.size());
        for (Eigen::Index i = 0; i < d.size(); ++i)
            if (es.values(i) > 1e-12 * std::max(1.0, top)) d(i) = 1.0 / std::sqrt(es.values(i));
        Matrix inv_sqrt = es.vectors * d.asDiagonal() * es.vectors.transpose();
        lhs += (g.transpose() * inv_sqrt * g).trace();
    }
    const double rhs = 2.0 * sqrt_psd(mm).trace();
    return lhs <= rhs + slack;
}

}  // namespace molo
