#include "minima_drift/validation.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "minima_drift/errors.hpp"
#include "minima_drift/kernels.hpp"
#include "minima_drift/parallel.hpp"
#include "minima_drift/rng.hpp"

namespace mdrift {

namespace {

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

Vec unit_in(const Mat& Q, CounterEngine& eng) {
    Gaussian g;
    Vec z(Q.cols());
    g.fill(eng, z.data(), static_cast<std::size_t>(z.size()));
    Vec v = Q * z;
    return v / v.norm();
}

}  // namespace

const Thresholds& thresholds() {
    static const Thresholds t{};
    return t;
}

bool ValidationReport::all_passed() const {
    return std::all_of(entries.begin(), entries.end(), [](const CheckEntry& e) { return e.passed; });
}

double lyapunov_ratio(const Vec& w, const Dataset& ds, double gamma, double eta_large, double alpha_lyap) {
    const Vec wx = ds.project_x(w);
    const double r = wx.norm();
    if (r == 0.0) throw DomainError("lyapunov_ratio: w_X = 0");
    const Vec b = -ds.project_x(grad_empirical(w, ds, gamma));
    const double n = ds.n();
    return alpha_lyap * wx.dot(b) / r + 0.5 * eta_large * (alpha_lyap * alpha_lyap + alpha_lyap * (n - 1.0) / r);
}

CheckEntry check_lyapunov_drift(const Dataset& ds, double gamma, double eta_large, double alpha_lyap,
                                const std::vector<double>& radii, int samples_per_radius, std::uint64_t seed) {
    if (radii.empty() || !(alpha_lyap > 0.0)) throw DomainError("check_lyapunov_drift: bad radii or alpha");
    for (std::size_t i = 0; i < radii.size(); ++i)
        if (!(radii[i] > 0.0) || (i > 0 && radii[i] <= radii[i - 1]))
            throw DomainError("check_lyapunov_drift: radii must be positive and increasing");
    std::string detail;
    double last_max = 0.0;
    for (std::size_t ri = 0; ri < radii.size(); ++ri) {
        double mx = -INFINITY;
        const Stream stream(seed, "lyapunov", ri);
        for (int s = 0; s < samples_per_radius; ++s) {
            auto eng = stream.at(static_cast<std::uint64_t>(s));
            Vec ux = unit_in(ds.basis.q_x, eng);
            Gaussian g;
            Vec zp(ds.basis.q_perp.cols());
            g.fill(eng, zp.data(), static_cast<std::size_t>(zp.size()));
            Vec w = radii[ri] * ux + ds.basis.q_perp * zp;
            mx = std::max(mx, lyapunov_ratio(w, ds, gamma, eta_large, alpha_lyap));
        }
        detail += "r=" + num(radii[ri]) + ":max=" + num(mx) + " ";
        last_max = mx;
    }
    const auto& th = thresholds();
    return {"lyapunov_drift", last_max, th.lyapunov_max, 0.0, last_max < th.lyapunov_max, detail};
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw DomainError("ks_statistic: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = a.size(), nb = b.size();
    std::size_t i = 0, j = 0;
    double best = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        best = std::max(best, std::abs(i / na - j / nb));
    }
    return best;
}

MixingResult mixing_statistics(const Dataset& ds, double gamma, double eta_large, const Vec& init_a,
                               const Vec& init_b, double horizon, int replicas, std::uint64_t seed,
                               const MixingOptions& opt) {
    if (replicas < 1) throw DomainError("mixing: replicas must be >= 1");
    const Mat& Qx = ds.basis.q_x;
    MixingResult res;
    if (horizon <= 0.0) {
        res.a_final.assign(replicas, (Qx.transpose() * init_a).norm());
        res.b_final.assign(replicas, (Qx.transpose() * init_b).norm());
        res.ks_quarter = res.ks_final = ks_statistic(res.a_final, res.b_final);
        return res;
    }
    std::vector<double> quarter(2 * replicas), fin(2 * replicas);
    SdeConfig cfg;
    cfg.step = std::min(opt.step, horizon / 4.0);
    cfg.horizon = horizon;
    cfg.seed = seed;
    cfg.record_stride = INT_MAX;
    cfg.control = StepControl::Adaptive;
    cfg.kappa = opt.kappa;
    cfg.checkpoints = {horizon / 4.0};
    cfg.keep_states = true;
    parallel_for(2 * replicas, opt.jobs, [&](int i) {
        const Vec& w0 = i < replicas ? init_a : init_b;
        Trajectory tr = phase1_langevin(w0, ds, gamma, eta_large, cfg, static_cast<std::uint64_t>(i));
        const double tq = horizon / 4.0;
        std::size_t qi = 0;
        while (qi + 1 < tr.size() && tr.times[qi] < tq) ++qi;
        quarter[i] = (Qx.transpose() * tr.states[qi]).norm();
        fin[i] = (Qx.transpose() * tr.final_state()).norm();
    });
    std::vector<double> qa(quarter.begin(), quarter.begin() + replicas), qb(quarter.begin() + replicas, quarter.end());
    res.a_final.assign(fin.begin(), fin.begin() + replicas);
    res.b_final.assign(fin.begin() + replicas, fin.end());
    res.ks_quarter = ks_statistic(qa, qb);
    res.ks_final = ks_statistic(res.a_final, res.b_final);
    return res;
}

CheckEntry check_mixing(const Dataset& ds, double gamma, double eta_large, const Vec& init_a, const Vec& init_b,
                        double horizon, int replicas, std::uint64_t seed, const MixingOptions& opt) {
    const MixingResult r = mixing_statistics(ds, gamma, eta_large, init_a, init_b, horizon, replicas, seed, opt);
    const double thr = thresholds().mixing_ks;
    const bool ok = r.ks_final <= thr && r.ks_final < r.ks_quarter;
    return {"mixing_ks", r.ks_final, 0.0, thr, ok,
            "KS(T/4)=" + num(r.ks_quarter) + " KS(T)=" + num(r.ks_final) + " replicas=" + std::to_string(replicas)};
}

CheckEntry check_ou_covariance(const ManifoldPoint& mp, const Dataset& ds, double gamma, double sigma,
                               double eta_large, const SdeConfig& cfg, double burn_in) {
    Mat AX = apply_a(mp.w_m, gamma, ds.X);
    Mat K = AX.transpose() * AX / ds.n();
    Eigen::SelfAdjointEigenSolver<Mat> es(K, Eigen::EigenvaluesOnly);
    const double relax = 1.0 / es.eigenvalues().minCoeff();
    const auto& th = thresholds();
    if (cfg.horizon < th.ou_min_relaxations * relax)
        throw ContractError("check_ou_covariance: horizon shorter than " + num(th.ou_min_relaxations) +
                            " relaxation times (" + num(th.ou_min_relaxations * relax) + ")");
    const OuCovariance ref = ou_stationary_covariance(mp, ds, gamma, sigma, eta_large);
    const auto samples = ou_simulate(mp, ds, gamma, sigma, eta_large, cfg);
    const auto skip = static_cast<std::size_t>(burn_in * samples.size());
    const int n = ds.n();
    Vec mean = Vec::Zero(n);
    Mat second = Mat::Zero(n, n);
    std::size_t m = 0;
    for (std::size_t i = skip; i < samples.size(); ++i, ++m) {
        mean += samples[i];
        second.noalias() += samples[i] * samples[i].transpose();
    }
    if (m < 2) throw ContractError("check_ou_covariance: not enough samples after burn-in");
    mean /= static_cast<double>(m);
    Mat emp = (second - static_cast<double>(m) * mean * mean.transpose()) / static_cast<double>(m - 1);
    double err = 0.0;
    if (ref.eps_cov.norm() == 0.0)
        err = emp.norm();
    else
        err = (emp - ref.eps_cov).norm() / ref.eps_cov.norm();
    return {"ou_covariance", err, 0.0, th.ou_frobenius_rel, err <= th.ou_frobenius_rel,
            "samples=" + std::to_string(m) + " relaxation=" + num(relax) + " horizon=" + num(cfg.horizon)};
}

CPositivity c_positivity(int d, int n, double gamma, int trials, int directions_per_trial, std::uint64_t seed) {
    if (d <= 0 || n <= 0 || n > d || trials < 1 || directions_per_trial < 0)
        throw DomainError("c_positivity: bad dimensions or counts");
    CPositivity out;
    out.trials = trials;
    out.min_c_over_d = INFINITY;
    int positive = 0;
    Mat X(d, n);
    Vec g(d), xg(n);
    for (int t = 0; t < trials; ++t) {
        auto eng = Stream(seed, "c-positivity", static_cast<std::uint64_t>(t)).at(0);
        Gaussian gauss;
        gauss.fill(eng, X.data(), static_cast<std::size_t>(d) * n);
        const double tr = X.squaredNorm();
        Eigen::SelfAdjointEigenSolver<Mat> es(X.transpose() * X);
        // top left singular vector maximizes ||X^T u||, hence minimizes C
        Vec u = X * es.eigenvectors().col(n - 1);
        u.normalize();
        double max_proj = (X.transpose() * u).squaredNorm();
        for (int k = 0; k < directions_per_trial; ++k) {
            gauss.fill(eng, g.data(), static_cast<std::size_t>(d));
            const double nrm2 = kern::dot(g.data(), g.data(), d);
            kern::gemv_t(X.data(), d, n, g.data(), xg.data());
            max_proj = std::max(max_proj, kern::dot(xg.data(), xg.data(), n) / nrm2);
        }
        const double cmin = (tr - (gamma + 2.0) * max_proj) / n;
        if (cmin > 0.0) ++positive;
        out.min_c_over_d = std::min(out.min_c_over_d, cmin / d);
    }
    out.fraction_positive = static_cast<double>(positive) / trials;
    return out;
}

CheckEntry check_c_positivity(int d, int n, double gamma, int trials, int directions_per_trial, std::uint64_t seed) {
    const CPositivity r = c_positivity(d, n, gamma, trials, directions_per_trial, seed);
    const auto& th = thresholds();
    const bool ok = r.fraction_positive >= th.c_positive_fraction && r.min_c_over_d >= th.c_min_over_d;
    return {"c_positivity", r.fraction_positive, 1.0, 1.0 - th.c_positive_fraction, ok,
            "d=" + std::to_string(d) + " n=" + std::to_string(n) + " trials=" + std::to_string(trials) +
                " min C/d=" + num(r.min_c_over_d)};
}

double kkt_residual(const Dataset& ds, double gamma) {
    const Vec wd = min_norm_solution(ds, gamma);
    const Mat AX = apply_a(wd, gamma, ds.X);
    const Vec mu = AX.colPivHouseholderQr().solve(Vec(-wd));
    return (wd + AX * mu).norm() / std::max(1.0, wd.norm());
}

CheckEntry check_min_norm_kkt(const Dataset& ds, double gamma) {
    const double res = kkt_residual(ds, gamma);
    const bool on = is_on_manifold(min_norm_solution(ds, gamma), ds, gamma, 1e-8);
    const double tol = thresholds().kkt_residual;
    return {"min_norm_kkt", res, 0.0, tol, res <= tol && on, on ? "on manifold" : "w_dagger off manifold"};
}

CheckEntry check_phase2_bound(const Trajectory& traj, const Dataset& ds, const ModelConfig& cfg) {
    if (traj.size() < 2) throw ContractError("check_phase2_bound: trajectory too short");
    if (traj.states.size() != traj.size()) throw ContractError("check_phase2_bound: states were not kept");
    for (Phase p : traj.phase_tags)
        if (p != Phase::IIEffective) throw ContractError("check_phase2_bound: expects an effective-dynamics trajectory");
    const double gamma = cfg.gamma;
    if (!(gamma > 0.5)) throw ContractError("check_phase2_bound: needs gamma > 1/2");
    const auto& th = thresholds();
    const double s_dag = min_norm_solution(ds, gamma).norm();
    const double a = ds.alpha_star_x.norm();
    const int d = ds.d();
    double c_low = INFINITY;
    for (const Vec& w : traj.states) c_low = std::min(c_low, c_coefficient(w, ds, gamma) / d);
    const double delta0 = traj.norm_w.front() - s_dag;
    if (std::abs(delta0) <= 1e-14 * s_dag) return {"phase2_bound", 0.0, 1.0, th.phase2_bound_slack, true, "starts at w_dagger"};
    if (!(c_low > 0.0))
        return {"phase2_bound", c_low, 0.0, 0.0, false, "measured C lower bound is not positive; bound not claimed"};

    double worst_ratio = 0.0;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const double bound = norm_decay_bound(traj.times[k] - traj.times[0], delta0, cfg.sigma, cfg.eta_large, gamma,
                                              c_low, d);
        const double delta = traj.norm_w[k] - s_dag;
        if (bound > 0.0) worst_ratio = std::max(worst_ratio, delta / bound);
    }
    const double B = cfg.sigma * cfg.sigma * cfg.eta_large * gamma * c_low * d / (2.0 * (1.0 + gamma) * (1.0 + gamma));
    double max_violation = 0.0, max_rate = 0.0;
    for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
        const double dt = traj.times[k + 1] - traj.times[k];
        const double D = (traj.norm_w[k + 1] - traj.norm_w[k]) / dt;
        const double s = 0.5 * (traj.norm_w[k + 1] + traj.norm_w[k]);
        const double rhs = -B * (std::pow(s, 2.0 * gamma - 1.0) - std::pow(s, -3.0) * a * a);
        max_violation = std::max(max_violation, D - rhs);
        max_rate = std::max(max_rate, std::abs(D));
    }
    const double rel_violation = max_rate > 0.0 ? max_violation / max_rate : 0.0;
    const bool ok = worst_ratio <= 1.0 + th.phase2_bound_slack && rel_violation <= th.phase2_derivative_rel;
    return {"phase2_bound", worst_ratio, 1.0, th.phase2_bound_slack, ok,
            "C_lower=" + num(c_low) + " derivative_violation_rel=" + num(rel_violation) +
                " final_delta=" + num(traj.norm_w.back() - s_dag)};
}

CheckEntry check_phase3_rate(const Trajectory& traj, const ManifoldPoint& w_m, const Dataset& ds, double gamma) {
    if (traj.size() < 2 || traj.states.size() != traj.size())
        throw ContractError("check_phase3_rate: need a trajectory with states");
    for (Phase p : traj.phase_tags)
        if (p != Phase::III) throw ContractError("check_phase3_rate: expects a phase III trajectory");
    const auto& th = thresholds();
    const double scale = w_m.w_m.norm();
    const double r0 = normal_project(traj.states[0] - w_m.w_m, w_m.w_m, ds, gamma).norm();
    if ((traj.states[0] - w_m.w_m).norm() > th.phase3_quadratic_radius * scale * (1.0 + 1e-9))
        throw ContractError("check_phase3_rate: start outside the quadratic radius");
    const double rate = phase3_rate(w_m, ds, gamma);
    const double floor = th.phase3_floor_rel * scale;
    double worst = 0.0;
    std::size_t audited = 0;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const double ideal = r0 * std::exp(-rate * (traj.times[k] - traj.times[0]));
        if (ideal <= floor) break;
        const double r = normal_project(traj.states[k] - w_m.w_m, w_m.w_m, ds, gamma).norm();
        worst = std::max(worst, r / ideal);
        ++audited;
    }
    const bool ok = worst <= 1.0 + th.phase3_slack;
    return {"phase3_rate", worst, 1.0, th.phase3_slack, ok,
            "rate=" + num(rate) + " audited=" + std::to_string(audited) + " r0=" + num(r0)};
}

CheckEntry check_drift_agreement(const ManifoldPoint& mp, const Dataset& ds, double gamma, double sigma,
                                 double eta_large, std::int64_t samples, std::uint64_t seed) {
    const Vec eff = effective_drift(mp, ds, sigma, eta_large, gamma);
    const McEstimate mc = expected_drift_montecarlo(mp, ds, gamma, sigma, eta_large, samples, seed);
    const double rel = (eff - mc.mean).norm() / eff.norm();
    const double tol = thresholds().drift_rel;
    return {"drift_agreement", rel, 0.0, tol, rel <= tol,
            "|drift|=" + num(eff.norm()) + " mc_stderr_rel=" + num(mc.std_error.norm() / eff.norm()) +
                " samples=" + std::to_string(samples)};
}

double fit_log_slope(const std::vector<double>& times, const std::vector<double>& values) {
    if (times.size() != values.size() || times.size() < 2) throw DomainError("fit_log_slope: need >= 2 points");
    double st = 0, sy = 0, stt = 0, sty = 0;
    const double m = times.size();
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double y = std::log(values[i]);
        st += times[i];
        sy += y;
        stt += times[i] * times[i];
        sty += times[i] * y;
    }
    return (m * sty - st * sy) / (m * stt - st * st);
}

namespace {

std::vector<double> ranks(const std::vector<double>& x) {
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
        const double avg = 0.5 * (i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw DomainError("spearman: need two equal-length samples");
    const auto rx = ranks(x), ry = ranks(y);
    const double m = rx.size();
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / m;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / m;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace mdrift
