#include "minima_drift/suite.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "minima_drift/errors.hpp"
#include "minima_drift/parallel.hpp"
#include "minima_drift/rng.hpp"

namespace mdrift {

namespace {

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

Mat gaussian_mat(CounterEngine& eng, int rows, int cols) {
    Gaussian g;
    Mat M(rows, cols);
    g.fill(eng, M.data(), static_cast<std::size_t>(rows) * cols);
    return M;
}

Vec gaussian_vec(CounterEngine& eng, int d) {
    Gaussian g;
    Vec v(d);
    g.fill(eng, v.data(), static_cast<std::size_t>(d));
    return v;
}

int uniform_int(CounterEngine& eng, int lo, int hi) {
    return lo + static_cast<int>(uniform01(eng) * (hi - lo + 1)) % (hi - lo + 1);
}

const std::vector<double> kOracleGammas = {0.0, 0.5, 1.0, 2.0, 5.0};

// random point on M: retraction of a Gaussian vector of norm ~ 2 ||w_dagger||
ManifoldPoint random_manifold_point(const Dataset& ds, double gamma, std::uint64_t seed) {
    return retract(default_w0(ds, gamma, seed), ds, gamma);
}

std::vector<CheckEntry> group_oracles(const SuiteSpec& spec) {
    const auto& th = thresholds();
    const auto& o = spec.oracles;
    std::vector<CheckEntry> out;

    double worst = 0.0;
    for (int i = 0; i < o.grad_instances; ++i) {
        auto eng = Stream(o.seed, "oracle-grad", i).at(0);
        const int d = uniform_int(eng, 2, 12);
        const int n = uniform_int(eng, 1, d - 1);
        const double gamma = kOracleGammas[i % kOracleGammas.size()];
        Dataset ds = make_dataset(gaussian_mat(eng, d, n), gaussian_vec(eng, d), gamma);
        const Vec w = gaussian_vec(eng, d);
        const Vec g = grad_empirical(w, ds, gamma);
        Vec fd(d);
        for (int k = 0; k < d; ++k) {
            const double h = th.fd_step * std::max(1.0, std::abs(w(k)));
            Vec wp = w, wm = w;
            wp(k) += h;
            wm(k) -= h;
            fd(k) = (empirical_loss(wp, ds, gamma) - empirical_loss(wm, ds, gamma)) / (2.0 * h);
        }
        worst = std::max(worst, (g - fd).norm() / std::max(g.norm(), 1e-300));
    }
    out.push_back({"grad_finite_difference", worst, 0.0, th.grad_fd_rel, worst <= th.grad_fd_rel,
                   "instances=" + std::to_string(o.grad_instances)});

    worst = 0.0;
    const std::vector<double> rt_gammas = {-0.5, 0.0, 0.5, 1.0, 2.0, 5.0};
    for (int i = 0; i < o.roundtrip_samples; ++i) {
        auto eng = Stream(o.seed, "oracle-roundtrip", i).at(0);
        const int d = uniform_int(eng, 1, 20);
        const double gamma = rt_gammas[i % rt_gammas.size()];
        Vec w = gaussian_vec(eng, d);
        w *= std::pow(10.0, -3.0 + 6.0 * uniform01(eng)) / w.norm();
        const Vec back = w_of_alpha(alpha_of_w(w, gamma), gamma);
        worst = std::max(worst, (back - w).norm() / w.norm());
    }
    out.push_back({"alpha_roundtrip", worst, 0.0, th.roundtrip_rel, worst <= th.roundtrip_rel,
                   "samples=" + std::to_string(o.roundtrip_samples)});

    double worst_sm = 0.0, worst_idem = 0.0;
    for (int i = 0; i < o.matrix_samples; ++i) {
        auto eng = Stream(o.seed, "oracle-matrix", i).at(0);
        const int d = uniform_int(eng, 2, 20);
        const int n = uniform_int(eng, 1, d - 1);
        const double gamma = kOracleGammas[i % kOracleGammas.size()];
        Vec w = gaussian_vec(eng, d);
        w *= std::pow(10.0, -1.0 + 2.0 * uniform01(eng)) / w.norm();
        const Mat prod = a_matrix_inverse(w, gamma) * a_matrix(w, gamma);
        worst_sm = std::max(worst_sm, (prod - Mat::Identity(d, d)).norm());

        Dataset ds = make_dataset(gaussian_mat(eng, d, n), gaussian_vec(eng, d), gamma);
        const ManifoldPoint mp = retract(gaussian_vec(eng, d), ds, gamma);
        const TangentNormal tn = tangent_normal_bases(mp, ds, gamma);
        for (const Mat* Y : {&tn.tangent, &tn.normal}) {
            const Mat P = projector(*Y);
            worst_idem = std::max(worst_idem, (P * P - P).norm());
        }
    }
    out.push_back({"sherman_morrison", worst_sm, 0.0, th.sherman_morrison, worst_sm <= th.sherman_morrison,
                   "samples=" + std::to_string(o.matrix_samples)});
    out.push_back({"projector_idempotence", worst_idem, 0.0, th.idempotence, worst_idem <= th.idempotence,
                   "tangent and normal projectors, samples=" + std::to_string(o.matrix_samples)});
    return out;
}

std::vector<CheckEntry> group_drift(const SuiteSpec& spec) {
    const auto& dr = spec.drift;
    std::vector<CheckEntry> out;
    const Dataset f3 = figure3_dataset();
    const ManifoldPoint mp3 = manifold_point_from_lambda(dr.figure3_lambda, f3.basis.q_perp.col(0), f3, 2.0);
    CheckEntry a = check_drift_agreement(mp3, f3, 2.0, dr.sigma, dr.eta_large, dr.samples, dr.seed);
    a.name += "[figure3]";
    out.push_back(a);

    const Dataset ds = suite_instance(spec);
    const double gamma = spec.instance.gamma;
    const ManifoldPoint mp = random_manifold_point(ds, gamma, spec.instance.seed);
    CheckEntry b = check_drift_agreement(mp, ds, gamma, dr.sigma, dr.eta_large, dr.samples, dr.seed + 1);
    b.name += "[instance]";
    out.push_back(b);
    return out;
}

std::vector<CheckEntry> group_ou(const SuiteSpec& spec) {
    const auto& o = spec.ou;
    const Dataset ds = suite_instance(spec);
    const double gamma = spec.instance.gamma;
    const ManifoldPoint mp = random_manifold_point(ds, gamma, spec.instance.seed);
    const Mat AX = apply_a(mp.w_m, gamma, ds.X);
    Eigen::SelfAdjointEigenSolver<Mat> es(AX.transpose() * AX / ds.n(), Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues().minCoeff(), lmax = es.eigenvalues().maxCoeff();
    SdeConfig cfg;
    cfg.horizon = o.relaxations / lmin;
    cfg.step = o.kappa / lmax;
    cfg.control = StepControl::Fixed;
    cfg.seed = o.seed;
    const double steps = std::ceil(cfg.horizon / cfg.step);
    cfg.record_stride = std::max(1, static_cast<int>(steps / o.samples));
    return {check_ou_covariance(mp, ds, gamma, o.sigma, o.eta_large, cfg)};
}

std::vector<CheckEntry> group_phase2(const SuiteSpec& spec) {
    const auto& p = spec.phase2;
    const auto& th = thresholds();
    const Dataset f3 = figure3_dataset();
    ModelConfig cfg;
    cfg.d = 2;
    cfg.n = 1;
    cfg.gamma = 2.0;
    cfg.sigma = p.sigma;
    cfg.eta_large = p.eta_large;
    cfg.eta_small = 0.5 * p.eta_large;
    const ManifoldPoint mp0 = manifold_point_from_lambda(p.lambda0, f3.basis.q_perp.col(0), f3, 2.0);
    const Trajectory tr = integrate_effective(mp0, f3, p.sigma, p.eta_large, 2.0, p.horizon, p.step);
    const double target = min_norm_solution(f3, 2.0).norm();
    const double gap = std::abs(tr.norm_w.back() - target);
    std::vector<CheckEntry> out;
    out.push_back({"phase2_norm_target[figure3]", gap, 0.0, th.norm_target_abs, gap <= th.norm_target_abs,
                   "final ||w_M||=" + num(tr.norm_w.back()) + " target=" + num(target) +
                       " C(final)=" + num(c_coefficient(tr.final_state(), f3, 2.0))});
    CheckEntry b = check_phase2_bound(tr, f3, cfg);
    b.name += "[figure3]";
    out.push_back(b);
    return out;
}

// same checks on a random instance with C > 0 along the path
std::vector<CheckEntry> group_phase2_companion(const SuiteSpec& spec) {
    const auto& p = spec.phase2;
    const auto& th = thresholds();
    SuiteSpec alt = spec;
    alt.instance.seed = p.companion_data_seed;
    const Dataset ds = suite_instance(alt);
    ModelConfig cfg;
    cfg.d = spec.instance.d;
    cfg.n = spec.instance.n;
    cfg.gamma = spec.instance.gamma;
    cfg.sigma = p.sigma;
    cfg.eta_large = p.eta_large;
    cfg.eta_small = 0.5 * p.eta_large;
    const ManifoldPoint mp0 = random_manifold_point(ds, cfg.gamma, p.companion_seed);
    const Trajectory tr =
        integrate_effective(mp0, ds, p.sigma, p.eta_large, cfg.gamma, p.companion_horizon, p.step);
    const double target = min_norm_solution(ds, cfg.gamma).norm();
    const double gap = std::abs(tr.norm_w.back() - target);
    std::vector<CheckEntry> out;
    out.push_back({"phase2_norm_target[instance]", gap, 0.0, th.norm_target_abs, gap <= th.norm_target_abs,
                   "start ||w_M||=" + num(tr.norm_w.front()) + " final=" + num(tr.norm_w.back()) +
                       " target=" + num(target)});
    CheckEntry b = check_phase2_bound(tr, ds, cfg);
    b.name += "[instance]";
    out.push_back(b);
    return out;
}

Trajectory phase3_run(const Vec& w0, const Dataset& ds, double gamma, double rate, const SuiteSpec::Phase3& p) {
    const double horizon = p.relaxations / rate;
    const double steps = horizon / p.step;
    FlowOptions fo;
    fo.record_stride = std::max(1, static_cast<int>(steps / 2000));
    fo.kappa = 0.5;
    return phase3_gradient_flow(w0, ds, gamma, p.step, horizon, fo);
}

CheckEntry phase3_case(const Dataset& ds, double gamma, const ManifoldPoint& mp, std::uint64_t seed,
                       const SuiteSpec::Phase3& p) {
    auto eng = Stream(seed, "phase3-start").at(0);
    const TangentNormal tn = tangent_normal_bases(mp, ds, gamma);
    Vec dir = tn.normal * gaussian_vec(eng, ds.n());
    dir.normalize();
    const Vec w0 = mp.w_m + p.start_fraction * mp.w_m.norm() * dir;
    const Trajectory tr = phase3_run(w0, ds, gamma, phase3_rate(mp, ds, gamma), p);
    const ManifoldPoint limit = retract(tr.final_state(), ds, gamma);
    return check_phase3_rate(tr, limit, ds, gamma);
}

std::vector<CheckEntry> group_phase3(const SuiteSpec& spec) {
    const auto& p = spec.phase3;
    const auto& th = thresholds();
    std::vector<CheckEntry> out;

    const Dataset f3 = figure3_dataset();
    CheckEntry a = phase3_case(f3, 2.0, manifold_point_from_lambda(0.5, f3.basis.q_perp.col(0), f3, 2.0), p.seed, p);
    a.name += "[figure3]";
    out.push_back(a);

    const Dataset ds = suite_instance(spec);
    const double gamma = spec.instance.gamma;
    CheckEntry b = phase3_case(ds, gamma, random_manifold_point(ds, gamma, p.seed), p.seed + 1, p);
    b.name += "[instance]";
    out.push_back(b);

    // gamma = 0: linear flow, the slowest normal mode decays at exactly lambda_min(X^T X) / n
    ModelConfig c0;
    c0.d = spec.instance.d;
    c0.n = spec.instance.n;
    c0.gamma = 0.0;
    const Dataset d0 = generate_dataset(c0, spec.instance.seed, WStarSpec{std::nullopt, spec.instance.w_star_scale});
    const ManifoldPoint mp0 = random_manifold_point(d0, 0.0, p.seed + 2);
    Eigen::SelfAdjointEigenSolver<Mat> es(d0.X.transpose() * d0.X / d0.n());
    const double rate = es.eigenvalues()(0);
    Vec dir = d0.X * es.eigenvectors().col(0);
    dir.normalize();
    const Vec w0 = mp0.w_m + p.start_fraction * mp0.w_m.norm() * dir;
    const Trajectory tr = phase3_run(w0, d0, 0.0, rate, p);
    std::vector<double> ts, rs;
    const double floor = 1e3 * th.phase3_floor_rel * mp0.w_m.norm();
    for (std::size_t k = 0; k < tr.size(); ++k) {
        const double r = normal_project(tr.states[k] - mp0.w_m, mp0.w_m, d0, 0.0).norm();
        if (r <= floor) break;
        ts.push_back(tr.times[k]);
        rs.push_back(r);
    }
    const double slope = fit_log_slope(ts, rs);
    const double rel = std::abs(-slope - rate) / rate;
    out.push_back({"phase3_linear_rate[gamma0]", rel, 0.0, th.phase3_linear_rate_rel,
                   rel <= th.phase3_linear_rate_rel,
                   "fitted=" + num(-slope) + " exact=" + num(rate) + " points=" + std::to_string(ts.size())});
    return out;
}

std::vector<CheckEntry> group_c_positivity(const SuiteSpec& spec) {
    const auto& c = spec.c_positivity;
    std::vector<CheckEntry> out;
    out.push_back(check_c_positivity(c.d, c.n, c.gamma, c.trials, c.directions, c.seed));
    const CPositivity r = c_positivity(2, 1, c.gamma, c.counter_trials, 0, c.seed + 1);
    out.push_back({"c_counterexample[d2n1]", r.fraction_positive, 0.0, 1.0, r.fraction_positive < 1.0,
                   "trials with a negative direction: " +
                       std::to_string(static_cast<int>(std::lround((1.0 - r.fraction_positive) * r.trials))) +
                       "/" + std::to_string(r.trials)});
    return out;
}

std::vector<CheckEntry> group_kkt(const SuiteSpec& spec) {
    const auto& k = spec.kkt;
    if (k.gammas.empty()) throw ConfigError("validate.kkt.gammas", "must not be empty");
    double worst = 0.0;
    bool all_on = true;
    for (int i = 0; i < k.datasets; ++i) {
        ModelConfig cfg;
        cfg.d = k.d;
        cfg.n = k.n;
        cfg.gamma = k.gammas[static_cast<std::size_t>(i) % k.gammas.size()];
        const Dataset ds = generate_dataset(cfg, derive_key(k.seed, "kkt", static_cast<std::uint64_t>(i), 0), {});
        const CheckEntry e = check_min_norm_kkt(ds, cfg.gamma);
        worst = std::max(worst, e.measured);
        all_on = all_on && e.detail == "on manifold";
    }
    const double tol = thresholds().kkt_residual;
    return {{"min_norm_kkt", worst, 0.0, tol, worst <= tol && all_on,
             "datasets=" + std::to_string(k.datasets) + (all_on ? "" : " some w_dagger off manifold")}};
}

std::vector<CheckEntry> group_sweep(const SuiteSpec& spec, int jobs) {
    const auto& th = thresholds();
    const SweepResult r = suite_sweep(spec, jobs);
    const std::vector<double> mean_test = seed_mean(r.final_test_loss);
    const double rho = spearman(r.decay_times, mean_test);
    const double max_train = r.final_train_loss.maxCoeff();
    std::string curve;
    for (std::size_t i = 0; i < mean_test.size(); ++i)
        curve += num(r.decay_times[i]) + ":" + num(mean_test[i]) + " ";
    std::vector<CheckEntry> out;
    out.push_back({"sweep_spearman", rho, -1.0, th.spearman_max, rho <= th.spearman_max, curve});
    out.push_back({"sweep_train_loss", max_train, 0.0, th.sweep_train_loss, max_train <= th.sweep_train_loss,
                   "max over " + std::to_string(r.final_train_loss.size()) + " runs"});
    return out;
}

std::vector<CheckEntry> group_mixing(const SuiteSpec& spec, int jobs) {
    const auto& m = spec.mixing;
    const Dataset ds = suite_instance(spec);
    const double gamma = spec.instance.gamma;
    // the two starts share w_dagger and differ only along X-perp, the slow direction
    const Vec wd = min_norm_solution(ds, gamma);
    const Vec r = ds.basis.q_perp.col(0);
    MixingOptions opt;
    opt.kappa = m.kappa;
    opt.jobs = jobs;
    return {check_mixing(ds, gamma, m.eta_large, wd + m.norm_a * r, wd + m.norm_b * r, m.horizon, m.replicas,
                         m.seed, opt)};
}

std::vector<CheckEntry> group_lyapunov(const SuiteSpec& spec) {
    const auto& l = spec.lyapunov;
    const Dataset ds = suite_instance(spec);
    return {check_lyapunov_drift(ds, spec.instance.gamma, l.eta_large, l.alpha, l.radii, l.samples, l.seed)};
}

}  // namespace

const std::vector<std::string>& suite_groups() {
    static const std::vector<std::string> g = {"oracles", "drift",        "ou",    "phase2", "phase3",
                                               "c_positivity", "kkt", "sweep", "mixing", "lyapunov",
                                               "phase2_companion"};
    return g;
}

Dataset suite_instance(const SuiteSpec& spec) {
    ModelConfig cfg;
    cfg.d = spec.instance.d;
    cfg.n = spec.instance.n;
    cfg.gamma = spec.instance.gamma;
    return generate_dataset(cfg, spec.instance.seed, WStarSpec{std::nullopt, spec.instance.w_star_scale});
}

SweepResult suite_sweep(const SuiteSpec& spec, int jobs) {
    const auto& s = spec.sweep;
    const Dataset ds = generate_dataset(s.model, s.data_seed, {});
    const Vec w0 = default_w0(ds, s.model.gamma, s.data_seed, s.w0_factor);
    SweepOptions opt;
    opt.t1 = s.t1;
    opt.phase2_mode = parse_mode(s.phase2_mode);
    opt.run.sde.step = s.step;
    opt.run.sde.kappa = s.kappa;
    opt.run.sde.record_stride = 1000000;
    opt.run.flow.record_stride = 1000000;
    opt.jobs = jobs;
    return decay_sweep(s.model, ds, w0, s.t2_values, s.seeds, opt);
}

std::vector<double> seed_mean(const Mat& per_seed) {
    std::vector<double> m(static_cast<std::size_t>(per_seed.rows()));
    for (Eigen::Index i = 0; i < per_seed.rows(); ++i) m[i] = per_seed.row(i).mean();
    return m;
}

std::vector<CheckEntry> run_group(const std::string& name, const SuiteSpec& spec, int jobs) {
    if (name == "oracles") return group_oracles(spec);
    if (name == "drift") return group_drift(spec);
    if (name == "ou") return group_ou(spec);
    if (name == "phase2") return group_phase2(spec);
    if (name == "phase2_companion") return group_phase2_companion(spec);
    if (name == "phase3") return group_phase3(spec);
    if (name == "c_positivity") return group_c_positivity(spec);
    if (name == "kkt") return group_kkt(spec);
    if (name == "sweep") return group_sweep(spec, jobs);
    if (name == "mixing") return group_mixing(spec, jobs);
    if (name == "lyapunov") return group_lyapunov(spec);
    throw ConfigError("validate.checks", "unknown check group '" + name + "'");
}

ValidationReport run_suite(const SuiteSpec& spec, const std::vector<std::string>& groups, int jobs) {
    ValidationReport rep;
    for (const auto& g : groups)
        for (auto& e : run_group(g, spec, jobs)) rep.add(std::move(e));
    return rep;
}

}  // namespace mdrift
