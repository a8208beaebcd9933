#include "doctest.h"

#include "molo/learners.hpp"
#include "molo/optimizers.hpp"

#include <cmath>
#include <numeric>

using namespace molo;

TEST_CASE("sensing objective closed forms") {
    Objective obj = matrix_sensing_objective(3, 25, 1);
    CHECK(obj.rows == 3);
    CHECK(obj.loss(Matrix::Zero(3, 3)) == doctest::Approx(0.5));
    CHECK(obj.grad(Matrix::Zero(3, 3), 0).norm() == 0.0);
    CHECK_THROWS_AS(matrix_sensing_objective(0, 5, 1), Error);
}

TEST_CASE("sensing subgradient matches finite differences away from kinks") {
    Objective obj = matrix_sensing_objective(2, 10, 3);
    Rng rng(700);
    Matrix w = 0.3 * rng.gaussian_matrix(2, 2) + 0.5 * Matrix::Ones(2, 2);
    Matrix g = obj.grad(w, 0);
    const double h = 1e-6;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            Matrix wp = w, wm = w;
            wp(i, j) += h;
            wm(i, j) -= h;
            const double fd = (obj.loss(wp) - obj.loss(wm)) / (2 * h);
            CHECK(g(i, j) == doctest::Approx(fd).epsilon(1e-4));
        }
}

TEST_CASE("sensing objective is even and the single-measurement case is exact") {
    Objective obj = matrix_sensing_objective(3, 7, 4);
    Rng rng(710);
    Matrix w = rng.gaussian_matrix(3, 3);
    CHECK(obj.loss(w) == doctest::Approx(obj.loss(Matrix(-w))).epsilon(1e-14));
    CHECK((obj.grad(w, 0) + obj.grad(Matrix(-w), 0)).norm() < 1e-12);

    // d = 1, one measurement A = a: choose x with u = a x = pi/3, where
    // cos(3u) = -1 so f = (pi/3) * 1.9 + 0.5
    Objective one = matrix_sensing_objective(1, 1, 5);
    Rng meas = Rng::stream(5, 0);  // reproduce the stored measurement
    const double a = meas.gaussian_matrix(1, 1)(0, 0);
    REQUIRE(a != 0.0);
    Matrix x(1, 1);
    x(0, 0) = (M_PI / 3.0) / a;
    CHECK(one.loss(x) == doctest::Approx((M_PI / 3.0) * 1.9 + 0.5).epsilon(1e-12));
}

TEST_CASE("muon direction") {
    OptimizerState st = make_optimizer_state(Matrix::Zero(3, 5));
    CHECK(muon_direction(st).norm() == 0.0);
    Rng rng(701);
    st.G_ema = rng.gaussian_matrix(3, 5);
    CHECK((muon_direction(st) - polar_exact(st.G_ema)).norm() < 1e-9);
}

TEST_CASE("pion direction equals the perturbed-leader learner direction") {
    Rng rng(702);
    Matrix s = rng.gaussian_matrix(2, 5);
    Matrix c = rng.gaussian_matrix(2, 2);
    Matrix m_mat = c * c.transpose();

    OptimizerState st = make_optimizer_state(Matrix::Zero(2, 5));
    st.G_ema = s;
    st.M_ema = m_mat;
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::pion;
    cfg.mode = OptimizerMode::theory;
    cfg.beta1 = 1.0;
    cfg.G = 1.0;
    cfg.eta = 1.7;
    cfg.mc_samples = 32;

    Matrix pion = pion_direction(st, cfg, 55);
    Matrix ftpl = ftpl_direction(s, m_mat, 1.0, cfg.G, cfg.eta, 1.0, cfg.mc_samples, 55);
    CHECK((pion + ftpl).cwiseAbs().maxCoeff() == 0.0);  // bit-identical up to the -D sign
}

TEST_CASE("leon direction: two routes agree and match the smoothed leader") {
    Rng rng(703);
    Matrix s = rng.gaussian_matrix(3, 6);
    Matrix c = rng.gaussian_matrix(3, 3);
    Matrix m_mat = c * c.transpose();

    OptimizerState st = make_optimizer_state(Matrix::Zero(3, 6));
    st.G_ema = s;
    st.M_ema = m_mat;
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::leon;
    cfg.mode = OptimizerMode::theory;
    cfg.beta1 = 1.0;
    cfg.G = 0.8;
    cfg.eta = 1.4;

    KernelOptions opt;
    opt.tol = 1e-12;
    opt.max_iters = 300;
    Matrix eig_route = leon_direction(st, cfg, LeonRoute::inverse_sqrt);
    Matrix ker_route = leon_direction(st, cfg, LeonRoute::augmented_polar, opt);
    CHECK((eig_route - ker_route).norm() < 1e-8);

    // -D * leon(theory, beta1 = 1) is the smoothed-leader action
    Matrix faml = faml_direction(s, m_mat, 1.0, cfg.G, cfg.eta);
    CHECK((eig_route + faml).norm() < 1e-10);
}

TEST_CASE("practical leon handles a zero gradient EMA") {
    OptimizerState st = make_optimizer_state(Matrix::Zero(2, 3));
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::leon;
    cfg.mode = OptimizerMode::practical;
    CHECK(leon_direction(st, cfg).norm() == 0.0);
}

TEST_CASE("ewa recurrence equals the direct weighted sum") {
    const double beta = 0.9;
    OptimizerState st = make_optimizer_state(Matrix::Zero(2, 2));
    Rng rng(704);
    std::vector<Matrix> ws;
    for (int t = 1; t <= 7; ++t) {
        st.W = rng.gaussian_matrix(2, 2);
        ws.push_back(st.W);
        ewa_push(st, beta);
    }
    Matrix num = Matrix::Zero(2, 2);
    double den = 0.0;
    for (int s = 1; s <= 7; ++s) {
        num += std::pow(beta, 7 - s) * ws[s - 1];
        den += std::pow(beta, 7 - s);
    }
    CHECK((ewa_value(st) - num / den).norm() < 1e-12);
    CHECK(st.ewa_den == doctest::Approx((1.0 - std::pow(beta, 7)) / (1.0 - beta)).epsilon(1e-14));
}

TEST_CASE("tau weights normalize and concentrate as beta -> 1") {
    for (double beta : {0.9, 0.99}) {
        for (int T : {10, 100}) {
            auto w = tau_weights(beta, T);
            CHECK(std::accumulate(w.begin(), w.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-13));
            for (double wi : w) CHECK(wi >= 0.0);
        }
    }
    auto w = tau_weights(1.0 - 1e-9, 10);
    CHECK(w.back() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("sample_tau is supported on 1..T and matches the tail weight") {
    const double beta = 0.9;
    const int T = 12;
    Rng rng(705);
    int at_T = 0;
    const int draws = 20000;
    for (int i = 0; i < draws; ++i) {
        int tau = sample_tau(beta, T, rng);
        CHECK(tau >= 1);
        CHECK(tau <= T);
        if (tau == T) ++at_T;
    }
    const double p_T = tau_weights(beta, T).back();
    CHECK(double(at_T) / draws == doctest::Approx(p_T).epsilon(0.1));
}

TEST_CASE("exponential step sizes have unit mean") {
    Rng rng(706);
    double sum = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) sum += rng.exponential();
    CHECK(sum / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("o2nc run is reproducible and consistent") {
    Objective obj = matrix_sensing_objective(4, 20, 10);
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::leon;
    cfg.mode = OptimizerMode::theory;
    cfg.T = 30;
    cfg.D = 0.05;
    OptimizerRun a = o2nc_run(obj, cfg, 77);
    OptimizerRun b = o2nc_run(obj, cfg, 77);
    CHECK((a.W_final - b.W_final).norm() == 0.0);
    CHECK(a.tau == b.tau);
    CHECK((a.W_bar_tau - b.W_bar_tau).norm() == 0.0);
    CHECK(a.trace.size() == 30);
    CHECK(a.osc_total >= 0.0);
    CHECK(a.tau >= 1);
    CHECK(a.tau <= cfg.T);
    for (const OptimizerStep& s : a.trace) CHECK(s.step_size > 0.0);
    // theory-mode actions live in the radius-D ball
    for (const OptimizerStep& s : a.trace) CHECK(s.direction_opnorm <= cfg.D + 1e-10);
}

TEST_CASE("o2nc replay at tau = T matches the full-run average") {
    Objective obj = matrix_sensing_objective(2, 10, 11);
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::muon;
    cfg.mode = OptimizerMode::theory;
    cfg.T = 8;
    cfg.D = 0.05;
    // scan seeds until tau lands on T, then the replayed average must equal
    // the average of the full trajectory
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        Rng tau_rng = Rng::stream(seed, 2);
        if (sample_tau(cfg.beta1, cfg.T, tau_rng) != cfg.T) continue;
        OptimizerRun run = o2nc_run(obj, cfg, seed);
        REQUIRE(run.tau == cfg.T);
        // recompute the full-run EWA independently
        OptimizerState st = make_optimizer_state(detail::initial_point(obj, cfg, seed));
        Rng exp_rng = Rng::stream(seed, 1);
        OptimizerConfig inner = cfg;
        for (int t = 1; t <= cfg.T; ++t) {
            Matrix g = obj.grad(st.W, seed ^ (0x51afde3bULL * t));
            st.G_ema = cfg.beta1 * st.G_ema + g;
            st.M_ema = cfg.beta2 * st.M_ema + g * g.transpose();
            st.t = t;
            Matrix dir = optimizer_direction(st, inner, seed ^ (0x2545f491ULL * t));
            st.W += exp_rng.exponential() * (-cfg.D * dir);
            ewa_push(st, cfg.beta1);
        }
        CHECK((run.W_bar_tau - ewa_value(st)).norm() < 1e-12);
        return;
    }
    FAIL("no seed with tau = T found");
}

TEST_CASE("practical run is deterministic and makes progress on sensing") {
    Objective obj = matrix_sensing_objective(6, 30, 12);
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::muon;
    cfg.lr = 0.01;
    cfg.T = 100;
    OptimizerRun a = run_practical(obj, cfg, 13);
    OptimizerRun b = run_practical(obj, cfg, 13);
    CHECK((a.W_final - b.W_final).norm() == 0.0);
    CHECK(a.final_loss < a.trace.front().loss);
}

TEST_CASE("zero initialization reports loss 0.5 at the sensing origin") {
    Objective obj = matrix_sensing_objective(6, 30, 12);
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::muon;
    cfg.init_scale = 0.0;
    cfg.T = 5;
    OptimizerRun a = run_practical(obj, cfg, 13);
    CHECK(a.trace.front().loss == doctest::Approx(0.5));
    // the origin is a fixed point of the deterministic subgradient dynamics
    CHECK(a.W_final.norm() == 0.0);
}
