#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "minima_drift/manifold.hpp"
#include "minima_drift/model.hpp"

namespace mdrift {

enum class Phase { I, II, IIEffective, III };
const char* phase_name(Phase p);

enum class StepControl {
    Fixed,     // h = step
    Adaptive,  // h = min(step, kappa / stiffness(w))
};

struct SdeConfig {
    double step = 1e-3;
    double horizon = 1.0;
    std::uint64_t seed = 0;
    int record_stride = 1;
    StepControl control = StepControl::Adaptive;
    double kappa = 0.2;
    // landed on exactly and always recorded
    std::vector<double> checkpoints;
    bool keep_states = true;

    void validate() const;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Vec> states;  // empty when states are not kept
    std::vector<double> train_loss, test_loss, norm_w, dist_to_wdagger;
    std::vector<Phase> phase_tags;
    Vec last_state;         // kept even when states are not
    std::size_t steps = 0;  // integrator steps taken

    std::size_t size() const { return times.size(); }
    bool empty() const { return times.empty(); }
    // continues the time axis; a leading sample equal in time to our last one is dropped
    void append(const Trajectory& next);
    const Vec& final_state() const { return last_state; }
};

// Computes the monitored quantities for each recorded state.
class Monitor {
public:
    Monitor(const Dataset& ds, double gamma, bool keep_states = true);
    void record(Trajectory& tr, double t, const Vec& w, Phase p) const;
    const Vec& w_dagger() const { return w_dag_; }

private:
    const Dataset& ds_;
    double gamma_;
    Vec w_dag_;
    bool has_dag_;
    bool keep_;
};

enum class OdeMethod { Euler, RK4 };

struct PhaseSchedule {
    double t1 = 20.0;
    double t2 = 0.0;
    double t3 = 0.0;
    bool t3_auto = false;  // t3 = 10 / phase3_rate at the start of phase III
    enum class Mode { Sgd, Sde, Effective } phase2_mode = Mode::Sde;

    void validate() const;
};
const char* mode_name(PhaseSchedule::Mode m);
PhaseSchedule::Mode parse_mode(const std::string& s);

// dw = -grad L dt + sqrt(eta_large) dB, Euler-Maruyama
Trajectory phase1_langevin(const Vec& w0, const Dataset& ds, double gamma, double eta_large, const SdeConfig& cfg,
                           std::uint64_t replica = 0, double t0 = 0.0);

// Discrete label-noise SGD: labels perturbed by sqrt(n) xi, xi_i uniform on {-sigma, sigma}, so the
// gradient noise covariance at M is sigma^2 times the Hessian. Time advances by eta per step.
Trajectory label_noise_sgd(const Vec& w0, const Dataset& ds, double gamma, double eta, double sigma,
                           std::int64_t steps, std::uint64_t seed, int record_stride = 1, double t0 = 0.0,
                           Phase tag = Phase::II, bool keep_states = true);

// dw = -grad L dt + sqrt(eta_large) (sigma / sqrt n) A_M X dB_n, A_M at retract(w)
Trajectory label_noise_sde(const Vec& w0, const Dataset& ds, double gamma, double sigma, double eta_large,
                           const SdeConfig& cfg, double t0 = 0.0);

// Normal-space OU process, returns the samples at every record_stride-th step (including tau = 0).
std::vector<Vec> ou_simulate(const ManifoldPoint& mp, const Dataset& ds, double gamma, double sigma,
                             double eta_large, const SdeConfig& cfg, const Vec* eps0 = nullptr);

struct OuCovariance {
    Mat eps_cov;  // n x n
    Mat dw_cov;   // d x d
};
OuCovariance ou_stationary_covariance(const ManifoldPoint& mp, const Dataset& ds, double gamma, double sigma,
                                      double eta_large);

Vec effective_drift(const ManifoldPoint& mp, const Dataset& ds, double sigma, double eta_large, double gamma);

struct McEstimate {
    Vec mean;
    Vec std_error;
    std::int64_t samples = 0;
};
// -E[P_T grad L(w_m + dw)] with dw from the stationary normal Gaussian; antithetic pairs.
McEstimate expected_drift_montecarlo(const ManifoldPoint& mp, const Dataset& ds, double gamma, double sigma,
                                     double eta_large, std::int64_t samples, std::uint64_t seed);

Trajectory integrate_effective(const ManifoldPoint& mp0, const Dataset& ds, double sigma, double eta_large,
                               double gamma, double horizon, double step, OdeMethod method = OdeMethod::RK4,
                               int record_stride = 1, double t0 = 0.0);

double norm_decay_bound(double t, double delta0, double sigma, double eta_large, double gamma, double c_lower,
                        int d);

struct FlowOptions {
    OdeMethod method = OdeMethod::RK4;
    int record_stride = 1;
    // cap the step at kappa / stiffness; off reproduces a plain fixed-step scheme
    bool adaptive = true;
    double kappa = 1.0;
    bool keep_states = true;
};
Trajectory phase3_gradient_flow(const Vec& w0, const Dataset& ds, double gamma, double step, double horizon,
                                const FlowOptions& opt = {}, double t0 = 0.0);

double phase3_rate(const ManifoldPoint& mp, const Dataset& ds, double gamma);

// largest eigenvalue of (1/n) A X X^T A at w
double curvature_top(const Vec& w, const Dataset& ds, double gamma);

struct ThreePhaseOptions {
    SdeConfig sde;  // step, stride, control, kappa for the stochastic phases; horizon/seed ignored
    double effective_step = 1e-2;
    FlowOptions flow;
    bool keep_states = true;
};
Trajectory run_three_phase(const Vec& w0, const Dataset& ds, const ModelConfig& cfg, const PhaseSchedule& sched,
                           std::uint64_t seed, const ThreePhaseOptions& opt = {});

}  // namespace mdrift
