#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "minima_drift/dynamics.hpp"

namespace mdrift {

// Every pass/fail tolerance in one place. Acceptance runs, the CLI suite and
// pilot calibration all read this table.
struct Thresholds {
    double grad_fd_rel = 1e-6;
    double fd_step = 1e-5;
    double roundtrip_rel = 1e-10;
    double sherman_morrison = 1e-10;
    double idempotence = 1e-10;
    double drift_rel = 0.05;
    double ou_frobenius_rel = 0.10;
    double ou_min_relaxations = 50.0;
    double norm_target_abs = 1e-4;
    double phase2_bound_slack = 1e-6;
    double phase2_derivative_rel = 2e-2;  // derivative violation / max |d||w||/dt|
    double phase3_slack = 0.05;
    double phase3_quadratic_radius = 0.01;  // start distance / ||w_m||
    double phase3_floor_rel = 1e-10;        // residuals below floor * ||w_m|| are not audited
    double phase3_linear_rate_rel = 1e-3;
    double c_positive_fraction = 0.999;
    double c_min_over_d = 0.25;
    double kkt_residual = 1e-8;
    double mixing_ks = 0.12;
    double lyapunov_max = 0.0;
    double spearman_max = -0.9;
    double sweep_train_loss = 1e-6;
};
const Thresholds& thresholds();

struct CheckEntry {
    std::string name;
    double measured = 0.0;
    double target = 0.0;
    double tolerance = 0.0;
    bool passed = false;
    std::string detail;
};

struct ValidationReport {
    std::vector<CheckEntry> entries;
    bool all_passed() const;
    void add(CheckEntry e) { entries.push_back(std::move(e)); }
};

CheckEntry check_lyapunov_drift(const Dataset& ds, double gamma, double eta_large, double alpha_lyap,
                                const std::vector<double>& radii, int samples_per_radius, std::uint64_t seed);

// generator ratio A_s W / W at w for W = exp(alpha ||w_X||)
double lyapunov_ratio(const Vec& w, const Dataset& ds, double gamma, double eta_large, double alpha_lyap);

struct MixingOptions {
    double kappa = 0.5;
    double step = 1e-2;
    int jobs = 1;
};
struct MixingResult {
    double ks_quarter = 1.0;
    double ks_final = 1.0;
    std::vector<double> a_final, b_final;  // ||w_X(T)|| samples
};
MixingResult mixing_statistics(const Dataset& ds, double gamma, double eta_large, const Vec& init_a,
                               const Vec& init_b, double horizon, int replicas, std::uint64_t seed,
                               const MixingOptions& opt = {});
CheckEntry check_mixing(const Dataset& ds, double gamma, double eta_large, const Vec& init_a, const Vec& init_b,
                        double horizon, int replicas, std::uint64_t seed, const MixingOptions& opt = {});

// two-sample Kolmogorov-Smirnov statistic
double ks_statistic(std::vector<double> a, std::vector<double> b);

// Empirical vs analytic eps-covariance. The first burn_in fraction of samples is dropped.
CheckEntry check_ou_covariance(const ManifoldPoint& mp, const Dataset& ds, double gamma, double sigma,
                               double eta_large, const SdeConfig& cfg, double burn_in = 0.1);

struct CPositivity {
    double fraction_positive = 0.0;
    double min_c_over_d = 0.0;
    int trials = 0;
};
CPositivity c_positivity(int d, int n, double gamma, int trials, int directions_per_trial, std::uint64_t seed);
CheckEntry check_c_positivity(int d, int n, double gamma, int trials, int directions_per_trial, std::uint64_t seed);

// ||w_dag + A(w_dag) X mu|| at the least-squares mu
double kkt_residual(const Dataset& ds, double gamma);
CheckEntry check_min_norm_kkt(const Dataset& ds, double gamma);

CheckEntry check_phase2_bound(const Trajectory& traj, const Dataset& ds, const ModelConfig& cfg);

// w_m: the manifold point the flow settles at. Residuals are normal-space components of w(t) - w_m.
CheckEntry check_phase3_rate(const Trajectory& traj, const ManifoldPoint& w_m, const Dataset& ds, double gamma);

CheckEntry check_drift_agreement(const ManifoldPoint& mp, const Dataset& ds, double gamma, double sigma,
                                 double eta_large, std::int64_t samples, std::uint64_t seed);

// least-squares slope of log(values) against times
double fit_log_slope(const std::vector<double>& times, const std::vector<double>& values);

double spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace mdrift
