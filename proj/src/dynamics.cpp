#include "minima_drift/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "minima_drift/errors.hpp"
#include "minima_drift/kernels.hpp"
#include "minima_drift/rng.hpp"

namespace mdrift {

namespace {

constexpr double kDivergenceNorm = 1e6;

std::uint64_t sub_seed(std::uint64_t seed, std::string_view label) { return derive_key(seed, label, 0, 0); }

bool reached(double t, double end) { return end - t <= 1e-12 * std::max(1.0, std::abs(end)); }

void guard(const double* w, std::size_t d, double t, double h) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += w[i] * w[i];
    if (!std::isfinite(s) || s > kDivergenceNorm * kDivergenceNorm)
        throw DivergenceError("trajectory diverged (||w|| > 1e6); retry with step <= " + std::to_string(0.5 * h), t,
                              0.5 * h);
}

Mat stiffness_matrix(const Vec& w_m, const Dataset& ds, double gamma) {
    Mat AX = apply_a(w_m, gamma, ds.X);
    return AX.transpose() * AX / ds.n();  // (1/n) X^T A^2 X
}

// Euler-Maruyama driver shared by the stochastic phases. add_noise(k, h, w_k, w_next)
// adds the diffusion increment of step k to w_next.
template <class NoiseFn>
Trajectory em_drive(const Vec& w0, const Dataset& ds, double gamma, const SdeConfig& cfg, double t0, Phase tag,
                    NoiseFn&& add_noise) {
    cfg.validate();
    if (w0.size() != ds.d()) throw ContractError("initial point has wrong dimension");
    const std::size_t d = ds.d();
    Monitor mon(ds, gamma, cfg.keep_states);
    GradEval ge(ds, gamma);
    Trajectory tr;
    Vec w = w0, next(d), g(d);
    double t = t0;
    const double end = t0 + cfg.horizon;
    mon.record(tr, t, w, tag);

    if (cfg.control == StepControl::Fixed && cfg.step * curvature_top(w, ds, gamma) >= 2.0)
        throw ContractError("step exceeds the stability bound 2 / curvature at the initial point");

    std::vector<double> cps;
    for (double c : cfg.checkpoints)
        if (c > 0.0 && c < cfg.horizon) cps.push_back(t0 + c);
    std::sort(cps.begin(), cps.end());
    std::size_t next_cp = 0;

    std::uint64_t k = 0;
    while (!reached(t, end)) {
        ge(w.data(), g.data());
        double h = cfg.step;
        if (cfg.control == StepControl::Adaptive) {
            const double st = ge.stiffness();
            if (st > 0.0) h = std::min(h, cfg.kappa / st);
        }
        const double target = next_cp < cps.size() ? cps[next_cp] : end;
        bool landed = false;
        if (t + h >= target || reached(t + h, target)) {
            h = target - t;
            landed = true;
        }
        for (std::size_t i = 0; i < d; ++i) next[i] = w[i] - h * g[i];
        add_noise(k, h, w, next);
        w.swap(next);
        t = landed ? target : t + h;
        ++k;
        guard(w.data(), d, t, h);
        if (landed && next_cp < cps.size() && target == cps[next_cp]) ++next_cp;
        if (landed || k % static_cast<std::uint64_t>(cfg.record_stride) == 0 || reached(t, end))
            mon.record(tr, t, w, tag);
    }
    tr.steps = k;
    return tr;
}

template <class F>
Vec rk_step(const Vec& w, double h, OdeMethod m, F&& f) {
    if (m == OdeMethod::Euler) return w + h * f(w);
    Vec k1 = f(w);
    Vec k2 = f(Vec(w + 0.5 * h * k1));
    Vec k3 = f(Vec(w + 0.5 * h * k2));
    Vec k4 = f(Vec(w + h * k3));
    return w + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

const char* phase_name(Phase p) {
    switch (p) {
        case Phase::I: return "I";
        case Phase::II: return "II";
        case Phase::IIEffective: return "II-effective";
        case Phase::III: return "III";
    }
    return "?";
}

const char* mode_name(PhaseSchedule::Mode m) {
    switch (m) {
        case PhaseSchedule::Mode::Sgd: return "sgd";
        case PhaseSchedule::Mode::Sde: return "sde";
        case PhaseSchedule::Mode::Effective: return "effective";
    }
    return "?";
}

PhaseSchedule::Mode parse_mode(const std::string& s) {
    if (s == "sgd") return PhaseSchedule::Mode::Sgd;
    if (s == "sde") return PhaseSchedule::Mode::Sde;
    if (s == "effective") return PhaseSchedule::Mode::Effective;
    throw ConfigError("schedule.phase2_mode", "expected one of sgd, sde, effective; got '" + s + "'");
}

void SdeConfig::validate() const {
    if (!(step > 0.0) || !std::isfinite(step)) throw ConfigError("sde.step", "must be > 0");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("sde.horizon", "must be > 0");
    if (step > horizon) throw ConfigError("sde.step", "must not exceed the horizon");
    if (record_stride < 1) throw ConfigError("sde.record_stride", "must be >= 1");
    if (!(kappa > 0.0) || kappa >= 2.0) throw ConfigError("sde.kappa", "must lie in (0, 2)");
}

void PhaseSchedule::validate() const {
    if (!(t1 >= 0.0) || !std::isfinite(t1)) throw ConfigError("schedule.t1", "must be >= 0");
    if (!(t2 >= 0.0) || !std::isfinite(t2)) throw ConfigError("schedule.t2", "must be >= 0");
    if (!(t3 >= 0.0) || !std::isfinite(t3)) throw ConfigError("schedule.t3", "must be >= 0");
    if (t1 + t2 + t3 <= 0.0 && !t3_auto) throw ConfigError("schedule", "at least one phase duration must be positive");
}

void Trajectory::append(const Trajectory& nx) {
    std::size_t start = 0;
    if (!times.empty() && !nx.times.empty() && nx.times.front() == times.back()) start = 1;
    for (std::size_t i = start; i < nx.size(); ++i) {
        times.push_back(nx.times[i]);
        train_loss.push_back(nx.train_loss[i]);
        test_loss.push_back(nx.test_loss[i]);
        norm_w.push_back(nx.norm_w[i]);
        dist_to_wdagger.push_back(nx.dist_to_wdagger[i]);
        phase_tags.push_back(nx.phase_tags[i]);
        if (i < nx.states.size()) states.push_back(nx.states[i]);
    }
    if (nx.last_state.size() > 0) last_state = nx.last_state;
    steps += nx.steps;
}

Monitor::Monitor(const Dataset& ds, double gamma, bool keep_states)
    : ds_(ds), gamma_(gamma), has_dag_(ds.alpha_star_x.norm() > 0.0 && gamma > -1.0), keep_(keep_states) {
    if (has_dag_) w_dag_ = min_norm_solution(ds, gamma);
}

void Monitor::record(Trajectory& tr, double t, const Vec& w, Phase p) const {
    tr.times.push_back(t);
    tr.train_loss.push_back(empirical_loss(w, ds_, gamma_));
    tr.test_loss.push_back(test_loss(w, ds_, gamma_));
    tr.norm_w.push_back(w.norm());
    tr.dist_to_wdagger.push_back(has_dag_ ? (w - w_dag_).norm() : std::numeric_limits<double>::quiet_NaN());
    tr.phase_tags.push_back(p);
    if (keep_) tr.states.push_back(w);
    tr.last_state = w;
}

double curvature_top(const Vec& w, const Dataset& ds, double gamma) {
    Eigen::SelfAdjointEigenSolver<Mat> es(stiffness_matrix(w, ds, gamma), Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

Trajectory phase1_langevin(const Vec& w0, const Dataset& ds, double gamma, double eta_large, const SdeConfig& cfg,
                           std::uint64_t replica, double t0) {
    if (eta_large < 0.0) throw DomainError("phase1_langevin: eta must be >= 0");
    const Stream stream(cfg.seed, "phase1", replica);
    const std::size_t d = ds.d();
    std::vector<double> z(d);
    return em_drive(w0, ds, gamma, cfg, t0, Phase::I, [&](std::uint64_t k, double h, const Vec&, Vec& next) {
        if (eta_large == 0.0) return;
        auto eng = stream.at(k);
        Gaussian gauss;
        gauss.fill(eng, z.data(), d);
        const double amp = std::sqrt(eta_large * h);
        for (std::size_t i = 0; i < d; ++i) next[i] += amp * z[i];
    });
}

Trajectory label_noise_sde(const Vec& w0, const Dataset& ds, double gamma, double sigma, double eta_large,
                           const SdeConfig& cfg, double t0) {
    const Stream stream(cfg.seed, "phase2-sde", 0);
    const std::size_t d = ds.d(), n = ds.n();
    std::vector<double> z(n);
    Vec u(d);
    return em_drive(w0, ds, gamma, cfg, t0, Phase::II, [&](std::uint64_t k, double h, const Vec& w, Vec& next) {
        if (sigma == 0.0) return;
        const Vec wm = retract(w, ds, gamma).w_m;
        auto eng = stream.at(k);
        Gaussian gauss;
        gauss.fill(eng, z.data(), n);
        kern::gemv(ds.X.data(), d, n, z.data(), u.data());
        const double nrm = wm.norm();
        const double s = norm_pow(nrm, gamma);
        const double proj = gamma != 0.0 ? gamma * wm.dot(u) / (nrm * nrm) : 0.0;
        const double amp = std::sqrt(eta_large * h) * sigma / std::sqrt(static_cast<double>(n)) * s;
        for (std::size_t i = 0; i < d; ++i) next[i] += amp * (u[i] + proj * wm[i]);
    });
}

Trajectory label_noise_sgd(const Vec& w0, const Dataset& ds, double gamma, double eta, double sigma,
                           std::int64_t steps, std::uint64_t seed, int record_stride, double t0, Phase tag,
                           bool keep_states) {
    if (steps < 1) throw DomainError("label_noise_sgd: steps must be >= 1");
    if (record_stride < 1) throw DomainError("label_noise_sgd: record_stride must be >= 1");
    const std::size_t d = ds.d(), n = ds.n();
    const Stream stream(seed, "label-noise", 0);
    Monitor mon(ds, gamma, keep_states);
    GradEval ge(ds, gamma);
    Trajectory tr;
    Vec w = w0, g(d);
    std::vector<double> shift(n);
    const double root_n = std::sqrt(static_cast<double>(n));
    mon.record(tr, t0, w, tag);
    for (std::int64_t k = 0; k < steps; ++k) {
        auto eng = stream.at(static_cast<std::uint64_t>(k));
        for (std::size_t j = 0; j < n; ++j) shift[j] = root_n * sigma * rademacher(eng);
        ge(w.data(), g.data(), sigma != 0.0 ? shift.data() : nullptr);
        w -= eta * g;
        const double t = t0 + static_cast<double>(k + 1) * eta;
        guard(w.data(), d, t, eta);
        if ((k + 1) % record_stride == 0 || k + 1 == steps) mon.record(tr, t, w, tag);
    }
    tr.steps = static_cast<std::size_t>(steps);
    return tr;
}

std::vector<Vec> ou_simulate(const ManifoldPoint& mp, const Dataset& ds, double gamma, double sigma,
                             double eta_large, const SdeConfig& cfg, const Vec* eps0) {
    cfg.validate();
    const int n = ds.n();
    const Mat K = stiffness_matrix(mp.w_m, ds, gamma);
    double h = cfg.step;
    if (cfg.control == StepControl::Adaptive) {
        Eigen::SelfAdjointEigenSolver<Mat> es(K, Eigen::EigenvaluesOnly);
        h = std::min(h, cfg.kappa / es.eigenvalues().maxCoeff());
    }
    const auto steps = static_cast<std::int64_t>(std::ceil(cfg.horizon / h - 1e-9));
    h = cfg.horizon / static_cast<double>(steps);
    const Mat step_mat = Mat::Identity(n, n) - h * K;
    const double amp = std::sqrt(sigma * sigma * eta_large * h / n);
    const Stream stream(cfg.seed, "ou", 0);
    Vec eps = eps0 ? *eps0 : Vec::Zero(n);
    Vec z(n), tmp(n);
    std::vector<Vec> out;
    out.reserve(static_cast<std::size_t>(steps / cfg.record_stride + 2));
    out.push_back(eps);
    for (std::int64_t k = 0; k < steps; ++k) {
        auto eng = stream.at(static_cast<std::uint64_t>(k));
        Gaussian gauss;
        gauss.fill(eng, z.data(), n);
        tmp.noalias() = step_mat * eps;
        eps = tmp + amp * z;
        if ((k + 1) % cfg.record_stride == 0) out.push_back(eps);
    }
    return out;
}

OuCovariance ou_stationary_covariance(const ManifoldPoint& mp, const Dataset& ds, double gamma, double sigma,
                                      double eta_large) {
    Mat AX = apply_a(mp.w_m, gamma, ds.X);
    Mat M = AX.transpose() * AX;
    const double c = 0.5 * sigma * sigma * eta_large;
    Mat eps = c * M.ldlt().solve(Mat::Identity(ds.n(), ds.n()));
    eps = 0.5 * (eps + eps.transpose()).eval();
    Mat dw = AX * eps * AX.transpose();
    dw = 0.5 * (dw + dw.transpose()).eval();
    return {eps, dw};
}

Vec effective_drift(const ManifoldPoint& mp, const Dataset& ds, double sigma, double eta_large, double gamma) {
    if (gamma == 0.0 || sigma == 0.0) return Vec::Zero(ds.d());
    const double nrm = mp.w_m.norm();
    const Vec wb = mp.w_m / nrm;
    const double C = c_coefficient(mp.w_m, ds, gamma);
    const double coef = -0.5 * eta_large * sigma * sigma * gamma * std::pow(nrm, 2.0 * gamma - 1.0) * C;
    return coef * tangent_project(wb, mp.w_m, ds, gamma);
}

McEstimate expected_drift_montecarlo(const ManifoldPoint& mp, const Dataset& ds, double gamma, double sigma,
                                     double eta_large, std::int64_t samples, std::uint64_t seed) {
    if (samples < 2) throw DomainError("expected_drift_montecarlo: need at least 2 samples");
    const int d = ds.d(), n = ds.n();
    McEstimate est;
    est.samples = samples;
    if (sigma == 0.0 || eta_large == 0.0) {
        est.mean = Vec::Zero(d);
        est.std_error = Vec::Zero(d);
        return est;
    }
    const OuCovariance cov = ou_stationary_covariance(mp, ds, gamma, sigma, eta_large);
    const Mat L = cov.eps_cov.llt().matrixL();
    const Mat N = apply_a(mp.w_m, gamma, ds.X);
    const Mat B = N * L;  // dw = B z
    const Mat PT = Mat::Identity(d, d) - N * (N.transpose() * N).ldlt().solve(N.transpose());

    const std::int64_t pairs = (samples + 1) / 2;
    const Stream stream(seed, "mc-drift", 0);
    GradEval ge(ds, gamma);
    Vec z(n), dw(d), wp(d), wn(d), gp(d), gn(d), s(d);
    Vec sum = Vec::Zero(d), sumsq = Vec::Zero(d);
    for (std::int64_t i = 0; i < pairs; ++i) {
        auto eng = stream.at(static_cast<std::uint64_t>(i));
        Gaussian gauss;
        gauss.fill(eng, z.data(), n);
        dw.noalias() = B * z;
        wp = mp.w_m + dw;
        wn = mp.w_m - dw;
        ge(wp.data(), gp.data());
        ge(wn.data(), gn.data());
        s.noalias() = -0.5 * (PT * (gp + gn));
        sum += s;
        sumsq += s.cwiseProduct(s);
    }
    const double m = static_cast<double>(pairs);
    est.mean = sum / m;
    Vec var = (sumsq / m - est.mean.cwiseProduct(est.mean)).cwiseMax(0.0) * (m / (m - 1.0));
    est.std_error = (var / m).cwiseSqrt();
    return est;
}

Trajectory integrate_effective(const ManifoldPoint& mp0, const Dataset& ds, double sigma, double eta_large,
                               double gamma, double horizon, double step, OdeMethod method, int record_stride,
                               double t0) {
    if (gamma < 0.0) throw DomainError("integrate_effective: gamma must be >= 0");
    if (!(step > 0.0) || !(horizon > 0.0)) throw DomainError("integrate_effective: step and horizon must be > 0");
    if (record_stride < 1) throw DomainError("integrate_effective: record_stride must be >= 1");
    Monitor mon(ds, gamma, true);
    Trajectory tr;
    Vec w = mp0.w_m;
    mon.record(tr, t0, w, Phase::IIEffective);
    const auto steps = static_cast<std::int64_t>(std::ceil(horizon / step - 1e-9));
    const double h = horizon / static_cast<double>(steps);
    auto f = [&](const Vec& x) { return effective_drift(retract(x, ds, gamma), ds, sigma, eta_large, gamma); };
    for (std::int64_t k = 0; k < steps; ++k) {
        w = retract(rk_step(w, h, method, f), ds, gamma).w_m;
        if ((k + 1) % record_stride == 0 || k + 1 == steps) {
            if (!is_on_manifold(w, ds, gamma, 1e-6)) throw ContractError("effective trajectory left the manifold");
            mon.record(tr, t0 + static_cast<double>(k + 1) * h, w, Phase::IIEffective);
        }
    }
    tr.steps = static_cast<std::size_t>(steps);
    return tr;
}

double norm_decay_bound(double t, double delta0, double sigma, double eta_large, double gamma, double c_lower,
                        int d) {
    if (!(gamma > 0.5)) throw DomainError("norm_decay_bound: needs gamma > 1/2");
    if (!(c_lower > 0.0)) throw DomainError("norm_decay_bound: needs c_lower > 0");
    const double rate =
        sigma * sigma * eta_large * c_lower * d * gamma * (2.0 * gamma - 1.0) / (2.0 * (gamma + 1.0) * (gamma + 1.0));
    return delta0 * std::exp(-rate * t);
}

Trajectory phase3_gradient_flow(const Vec& w0, const Dataset& ds, double gamma, double step, double horizon,
                                const FlowOptions& opt, double t0) {
    if (!(step > 0.0) || !(horizon > 0.0)) throw DomainError("phase3_gradient_flow: step and horizon must be > 0");
    if (opt.record_stride < 1) throw DomainError("phase3_gradient_flow: record_stride must be >= 1");
    const std::size_t d = ds.d();
    Monitor mon(ds, gamma, opt.keep_states);
    GradEval ge(ds, gamma);
    Trajectory tr;
    Vec w = w0;
    if (!opt.adaptive && step * curvature_top(w, ds, gamma) >= 2.0)
        throw ContractError("step exceeds the stability bound 2 / curvature at the initial point");
    mon.record(tr, t0, w, Phase::III);
    double t = t0;
    const double end = t0 + horizon;
    double last_stiff = 0.0;
    auto f = [&](const Vec& x) {
        Vec g(d);
        ge(x.data(), g.data());
        return Vec(-g);
    };
    std::uint64_t k = 0;
    while (!reached(t, end)) {
        double h = step;
        if (opt.adaptive) {
            Vec g(d);
            ge(w.data(), g.data());
            last_stiff = ge.stiffness();
            if (last_stiff > 0.0) h = std::min(h, opt.kappa / last_stiff);
        }
        bool landed = false;
        if (t + h >= end || reached(t + h, end)) {
            h = end - t;
            landed = true;
        }
        w = rk_step(w, h, opt.method, f);
        t = landed ? end : t + h;
        ++k;
        guard(w.data(), d, t, h);
        if (landed || k % static_cast<std::uint64_t>(opt.record_stride) == 0) mon.record(tr, t, w, Phase::III);
    }
    tr.steps = k;
    return tr;
}

double phase3_rate(const ManifoldPoint& mp, const Dataset& ds, double gamma) {
    Eigen::SelfAdjointEigenSolver<Mat> es(stiffness_matrix(mp.w_m, ds, gamma), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

Trajectory run_three_phase(const Vec& w0, const Dataset& ds, const ModelConfig& cfg, const PhaseSchedule& sched,
                           std::uint64_t seed, const ThreePhaseOptions& opt) {
    cfg.validate();
    sched.validate();
    const double gamma = cfg.gamma;
    Trajectory tr;
    Vec w = w0;
    double t = 0.0;

    auto sde_for = [&](double horizon, std::string_view label) {
        SdeConfig c = opt.sde;
        c.horizon = horizon;
        c.step = std::min(c.step, horizon);
        c.seed = sub_seed(seed, label);
        c.keep_states = opt.keep_states;
        c.checkpoints.clear();
        return c;
    };

    if (sched.t1 > 0.0) {
        tr = phase1_langevin(w, ds, gamma, cfg.eta_large, sde_for(sched.t1, "phase-I"), 0, t);
        w = tr.final_state();
        t += sched.t1;
    } else {
        Monitor(ds, gamma, opt.keep_states).record(tr, t, w, Phase::I);
    }

    if (sched.t2 > 0.0) {
        Trajectory p2;
        switch (sched.phase2_mode) {
            case PhaseSchedule::Mode::Sgd: {
                const auto steps = std::max<std::int64_t>(1, std::llround(sched.t2 / cfg.eta_large));
                p2 = label_noise_sgd(w, ds, gamma, cfg.eta_large, cfg.sigma, steps, sub_seed(seed, "phase-II"),
                                     opt.sde.record_stride, t, Phase::II, opt.keep_states);
                break;
            }
            case PhaseSchedule::Mode::Sde:
                p2 = label_noise_sde(w, ds, gamma, cfg.sigma, cfg.eta_large, sde_for(sched.t2, "phase-II"), t);
                break;
            case PhaseSchedule::Mode::Effective:
                p2 = integrate_effective(retract(w, ds, gamma), ds, cfg.sigma, cfg.eta_large, gamma, sched.t2,
                                         std::min(opt.effective_step, sched.t2), OdeMethod::RK4,
                                         opt.sde.record_stride, t);
                if (!opt.keep_states) p2.states.clear();
                break;
        }
        tr.append(p2);
        w = p2.final_state();
        t += sched.t2;
    }

    const double t3 = sched.t3_auto ? 10.0 / phase3_rate(retract(w, ds, gamma), ds, gamma) : sched.t3;
    if (t3 > 0.0) {
        Trajectory p3;
        if (sched.phase2_mode == PhaseSchedule::Mode::Sgd) {
            const auto steps = std::max<std::int64_t>(1, std::llround(t3 / cfg.eta_small));
            p3 = label_noise_sgd(w, ds, gamma, cfg.eta_small, cfg.sigma, steps, sub_seed(seed, "phase-III"),
                                 opt.sde.record_stride, t, Phase::III, opt.keep_states);
        } else {
            FlowOptions fo = opt.flow;
            fo.keep_states = opt.keep_states;
            p3 = phase3_gradient_flow(w, ds, gamma, std::min(cfg.eta_small, t3), t3, fo, t);
        }
        tr.append(p3);
    }
    return tr;
}

}  // namespace mdrift
