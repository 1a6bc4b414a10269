#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "minima_drift/experiments.hpp"
#include "minima_drift/validation.hpp"

namespace mdrift {

// Parameters of the named check groups. Defaults mirror configs/default.json.
struct SuiteSpec {
    // small random instance shared by several groups
    struct Instance {
        int d = 10;
        int n = 3;
        double gamma = 2.0;
        std::uint64_t seed = 3;
        double w_star_scale = 1.0;
    } instance;

    struct Oracles {
        int grad_instances = 100;
        int roundtrip_samples = 1000;
        int matrix_samples = 200;
        std::uint64_t seed = 101;
    } oracles;

    struct Drift {
        double sigma = 0.1;
        double eta_large = 0.01;
        std::int64_t samples = 1000000;
        double figure3_lambda = 0.3;
        std::uint64_t seed = 202;
    } drift;

    struct Ou {
        double sigma = 0.1;
        double eta_large = 0.01;
        double relaxations = 4000.0;  // horizon in units of 1 / lambda_min
        double kappa = 0.02;          // step = kappa / lambda_max
        int samples = 100000;         // recorded samples
        std::uint64_t seed = 303;
    } ou;

    struct Phase2 {
        double lambda0 = 0.3;
        double sigma = 1.0;
        double eta_large = 1.0;
        double horizon = 400.0;
        double step = 0.01;
        // companion run on a random instance where C > 0 along the whole path
        double companion_horizon = 400.0;
        std::uint64_t companion_data_seed = 29;
        std::uint64_t companion_seed = 404;
    } phase2;

    struct Phase3 {
        double start_fraction = 0.005;  // start distance / ||w_m||
        double relaxations = 30.0;
        double step = 0.01;
        std::uint64_t seed = 505;
    } phase3;

    struct CPos {
        int d = 200;
        int n = 20;
        double gamma = 2.0;
        int trials = 1000;
        int directions = 64;
        int counter_trials = 100;
        std::uint64_t seed = 606;
    } c_positivity;

    struct Kkt {
        int datasets = 100;
        int d = 20;
        int n = 5;
        std::vector<double> gammas = {0.0, 0.5, 1.0, 2.0, 5.0};
        std::uint64_t seed = 707;
    } kkt;

    struct Sweep {
        ModelConfig model;  // d=30, n=8, gamma=2, sigma=0.1, eta_L=0.05, eta_S=0.005
        std::vector<double> t2_values = {0, 50, 100, 200, 400, 800};
        std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
        double t1 = 20.0;
        std::uint64_t data_seed = 11;
        double w0_factor = 2.0;
        std::string phase2_mode = "sde";
        double step = 0.01;
        double kappa = 0.2;
    } sweep;

    struct Mixing {
        double eta_large = 0.05;
        double horizon = 200.0;
        int replicas = 500;
        double kappa = 1.0;
        double norm_a = 2.2;  // X-perp offsets of the two starts from w_dagger
        double norm_b = 0.22;
        std::uint64_t seed = 909;
    } mixing;

    struct Lyapunov {
        double alpha = 1.0;
        double eta_large = 0.05;
        std::vector<double> radii = {10.0, 100.0, 1000.0};
        int samples = 1000;
        std::uint64_t seed = 1010;
    } lyapunov;
};

// group names in report order
const std::vector<std::string>& suite_groups();

// One or more entries per group. Throws ConfigError for an unknown name.
std::vector<CheckEntry> run_group(const std::string& name, const SuiteSpec& spec, int jobs = 1);

ValidationReport run_suite(const SuiteSpec& spec, const std::vector<std::string>& groups, int jobs = 1);

// helpers shared with tests
Dataset suite_instance(const SuiteSpec& spec);
SweepResult suite_sweep(const SuiteSpec& spec, int jobs = 1);
std::vector<double> seed_mean(const Mat& per_seed);

}  // namespace mdrift
