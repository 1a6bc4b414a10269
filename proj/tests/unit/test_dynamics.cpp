#include <doctest.h>

#include <climits>
#include <cmath>

#include "minima_drift/errors.hpp"
#include "minima_drift/experiments.hpp"
#include "minima_drift/rng.hpp"

using namespace mdrift;

namespace {

Dataset random_ds(int d, int n, double gamma, std::uint64_t seed) {
    ModelConfig c;
    c.d = d;
    c.n = n;
    c.gamma = gamma;
    return generate_dataset(c, seed, {});
}

Vec fig3_rbar() {
    Vec r(2);
    r << 0.7, 0.15;
    return r.normalized();
}

bool same(const Trajectory& a, const Trajectory& b) {
    if (a.times != b.times || a.train_loss != b.train_loss || a.norm_w != b.norm_w) return false;
    return a.final_state() == b.final_state();
}

}  // namespace

TEST_CASE("effective drift at lambda = 0.3 on figure-3 data") {
    const Dataset ds = figure3_dataset();
    const ManifoldPoint mp = manifold_point_from_lambda(0.3, fig3_rbar(), ds, 2.0);
    const Vec v = effective_drift(mp, ds, 0.1, 0.01, 2.0);
    CHECK(v(0) == doctest::Approx(-2.62079918955778936e-4).epsilon(1e-12));
    CHECK(v(1) == doctest::Approx(1.44682384890009983e-5).epsilon(1e-12));
    // tangent, and zero at w_dagger
    CHECK(normal_project(v, mp.w_m, ds, 2.0).norm() <= 1e-10 * v.norm());
    const ManifoldPoint top = retract(min_norm_solution(ds, 2.0), ds, 2.0);
    CHECK(effective_drift(top, ds, 0.1, 0.01, 2.0).norm() < 1e-15);
    CHECK(effective_drift(mp, ds, 0.1, 0.01, 0.0).norm() == 0.0);
}

TEST_CASE("Monte-Carlo drift is deterministic and close to the closed form") {
    const Dataset ds = random_ds(6, 2, 2.0, 5);
    const ManifoldPoint mp = retract(default_w0(ds, 2.0, 1), ds, 2.0);
    const McEstimate a = expected_drift_montecarlo(mp, ds, 2.0, 0.1, 0.01, 20000, 3);
    const McEstimate b = expected_drift_montecarlo(mp, ds, 2.0, 0.1, 0.01, 20000, 3);
    CHECK(a.mean == b.mean);
    const Vec eff = effective_drift(mp, ds, 0.1, 0.01, 2.0);
    CHECK((a.mean - eff).norm() < 0.05 * eff.norm() + 5 * a.std_error.norm());
}

TEST_CASE("OU stationary covariance") {
    const Dataset ds = random_ds(6, 2, 2.0, 7);
    const ManifoldPoint mp = retract(default_w0(ds, 2.0, 2), ds, 2.0);
    const OuCovariance c = ou_stationary_covariance(mp, ds, 2.0, 0.1, 0.01);
    // Lyapunov equation K S + S K = (sigma^2 eta / n) I for the eps process
    const Mat AX = apply_a(mp.w_m, 2.0, ds.X);
    const Mat K = AX.transpose() * AX / 2.0;
    const Mat lhs = K * c.eps_cov + c.eps_cov * K;
    CHECK((lhs - (0.01 * 0.01 / 2.0) * Mat::Identity(2, 2)).norm() < 1e-15);
    CHECK((c.dw_cov - AX * c.eps_cov * AX.transpose()).norm() < 1e-14);
    SdeConfig cfg;
    cfg.step = 1e-3;
    cfg.horizon = 1.0;
    cfg.seed = 4;
    const auto s1 = ou_simulate(mp, ds, 2.0, 0.1, 0.01, cfg);
    const auto s2 = ou_simulate(mp, ds, 2.0, 0.1, 0.01, cfg);
    CHECK(s1.size() == s2.size());
    CHECK(s1.back() == s2.back());
    CHECK(s1.front().norm() == 0.0);
}

TEST_CASE("trajectories are bit-identical for identical inputs") {
    const Dataset ds = random_ds(10, 3, 2.0, 3);
    const Vec w0 = default_w0(ds, 2.0, 3);
    SdeConfig cfg;
    cfg.step = 1e-2;
    cfg.horizon = 2.0;
    cfg.seed = 12;
    cfg.record_stride = 7;
    CHECK(same(phase1_langevin(w0, ds, 2.0, 0.05, cfg), phase1_langevin(w0, ds, 2.0, 0.05, cfg)));
    CHECK_FALSE(same(phase1_langevin(w0, ds, 2.0, 0.05, cfg), phase1_langevin(w0, ds, 2.0, 0.05, cfg, 1)));
    CHECK(same(label_noise_sde(w0, ds, 2.0, 0.1, 0.05, cfg), label_noise_sde(w0, ds, 2.0, 0.1, 0.05, cfg)));
    CHECK(same(label_noise_sgd(w0, ds, 2.0, 0.01, 0.1, 100, 4), label_noise_sgd(w0, ds, 2.0, 0.01, 0.1, 100, 4)));
}

TEST_CASE("checkpoints are landed on exactly") {
    const Dataset ds = random_ds(10, 3, 2.0, 3);
    SdeConfig cfg;
    cfg.step = 0.013;
    cfg.horizon = 1.0;
    cfg.record_stride = INT_MAX;
    cfg.checkpoints = {0.25, 0.5};
    const Trajectory tr = phase1_langevin(default_w0(ds, 2.0, 1), ds, 2.0, 0.05, cfg);
    REQUIRE(tr.size() == 4);
    CHECK(tr.times[1] == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(tr.times[2] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(tr.times[3] == 1.0);
}

TEST_CASE("schedule with empty phases II and III reproduces phase I") {
    const Dataset ds = random_ds(10, 3, 2.0, 3);
    const Vec w0 = default_w0(ds, 2.0, 3);
    ModelConfig cfg;
    cfg.d = 10;
    cfg.n = 3;
    PhaseSchedule s;
    s.t1 = 2.0;
    ThreePhaseOptions opt;
    const Trajectory full = run_three_phase(w0, ds, cfg, s, 99, opt);
    SdeConfig c = opt.sde;
    c.horizon = 2.0;
    c.seed = derive_key(99, "phase-I", 0, 0);
    CHECK(same(full, phase1_langevin(w0, ds, 2.0, cfg.eta_large, c)));
    for (Phase p : full.phase_tags) CHECK(p == Phase::I);
}

TEST_CASE("three-phase run: continuous time, tags, final train loss") {
    const Dataset ds = random_ds(10, 3, 2.0, 3);
    ModelConfig cfg;
    cfg.d = 10;
    cfg.n = 3;
    PhaseSchedule s;
    s.t1 = 5.0;
    s.t2 = 20.0;
    s.t3_auto = true;
    for (auto mode : {PhaseSchedule::Mode::Sde, PhaseSchedule::Mode::Effective}) {
        s.phase2_mode = mode;
        ThreePhaseOptions opt;
        opt.sde.record_stride = 50;
        opt.flow.record_stride = 50;
        const Trajectory tr = run_three_phase(default_w0(ds, 2.0, 3), ds, cfg, s, 5, opt);
        for (std::size_t i = 1; i < tr.size(); ++i) CHECK(tr.times[i] > tr.times[i - 1]);
        CHECK(tr.phase_tags.front() == Phase::I);
        CHECK(tr.phase_tags.back() == Phase::III);
        CHECK(tr.train_loss.back() <= 1e-6);
    }
}

TEST_CASE("phase III rate") {
    // gamma = 0, X = e_1, n = 1: rate 1
    Mat X = Mat::Zero(3, 1);
    X(0, 0) = 1.0;
    Vec ws(3);
    ws << 1.0, 2.0, 3.0;
    const Dataset lin = make_dataset(X, ws, 0.0);
    CHECK(phase3_rate(retract(ws, lin, 0.0), lin, 0.0) == doctest::Approx(1.0).epsilon(1e-14));

    // rescaling along M with fixed direction: for gamma = 2 and n = 1 the rate is ||w_m||^4 (1 + ...)
    const Dataset ds = random_ds(8, 3, 2.0, 9);
    const ManifoldPoint mp = retract(default_w0(ds, 2.0, 4), ds, 2.0);
    const Mat H = hessian_on_manifold(mp.w_m, ds, 2.0);
    const TangentNormal tn = tangent_normal_bases(mp, ds, 2.0);
    // generalized curvature on the normal space: eigenvalues of H restricted to span(AX)
    Eigen::HouseholderQR<Mat> qr(tn.normal);
    const Mat Q = qr.householderQ() * Mat::Identity(8, 3);
    Eigen::SelfAdjointEigenSolver<Mat> es(Q.transpose() * H * Q);
    CHECK(phase3_rate(mp, ds, 2.0) == doctest::Approx(es.eigenvalues().minCoeff()).epsilon(1e-8));
}

TEST_CASE("gradient flow is constant on M") {
    const Dataset ds = random_ds(8, 3, 2.0, 9);
    const Vec wm = retract(default_w0(ds, 2.0, 4), ds, 2.0).w_m;
    const Trajectory tr = phase3_gradient_flow(wm, ds, 2.0, 0.01, 1.0);
    CHECK((tr.final_state() - wm).norm() < 1e-14);
}

TEST_CASE("effective integrator order") {
    const Dataset ds = figure3_dataset();
    const ManifoldPoint mp = manifold_point_from_lambda(0.3, fig3_rbar(), ds, 2.0);
    auto end = [&](double h, OdeMethod m) {
        return integrate_effective(mp, ds, 1.0, 1.0, 2.0, 0.8, h, m).final_state();
    };
    for (auto [m, order] : {std::pair{OdeMethod::Euler, 1.0}, std::pair{OdeMethod::RK4, 4.0}}) {
        const double hs[3] = {0.04, 0.02, 0.01};
        const Vec e0 = end(hs[0], m), e1 = end(hs[1], m), e2 = end(hs[2], m);
        const double measured = std::log2((e0 - e1).norm() / (e1 - e2).norm());
        CHECK(measured > order - 1.0);
        CHECK(measured < order + 1.0);
    }
}

TEST_CASE("norm decay bound") {
    CHECK(norm_decay_bound(0.0, 0.5, 1, 1, 2.0, 0.1, 2) == 0.5);
    // exponent sigma^2 eta C d gamma (2 gamma - 1) / (2 (gamma + 1)^2) = 0.1 * 2 * 2 * 3 / 18
    CHECK(norm_decay_bound(3.0, 1.0, 1, 1, 2.0, 0.1, 2) == doctest::Approx(std::exp(-0.2)));
    CHECK_THROWS_AS(norm_decay_bound(1.0, 1.0, 1, 1, 0.5, 0.1, 2), DomainError);
    CHECK_THROWS_AS(norm_decay_bound(1.0, 1.0, 1, 1, 2.0, 0.0, 2), DomainError);
}

TEST_CASE("divergence guard and step contracts") {
    const Dataset ds = random_ds(10, 3, 2.0, 3);
    SdeConfig cfg;
    cfg.step = 0.5;
    cfg.horizon = 10.0;
    cfg.control = StepControl::Fixed;
    CHECK_THROWS_AS(phase1_langevin(default_w0(ds, 2.0, 1) * 3, ds, 2.0, 0.05, cfg), ContractError);
    try {
        label_noise_sgd(default_w0(ds, 2.0, 1) * 3, ds, 2.0, 5.0, 0.1, 1000, 1);
        FAIL("expected divergence");
    } catch (const DivergenceError& e) {
        CHECK(e.step_hint == doctest::Approx(2.5));
    }
    cfg.kappa = 2.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("trajectory append drops the duplicated boundary sample") {
    const Dataset ds = random_ds(10, 3, 2.0, 3);
    const Vec w0 = default_w0(ds, 2.0, 1);
    Trajectory a = phase3_gradient_flow(w0, ds, 2.0, 0.01, 0.1);
    const Trajectory b = phase3_gradient_flow(a.final_state(), ds, 2.0, 0.01, 0.1, {}, a.times.back());
    const std::size_t na = a.size();
    a.append(b);
    CHECK(a.size() == na + b.size() - 1);
    CHECK(a.final_state() == b.final_state());
}
