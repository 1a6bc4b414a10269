#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "minima_drift/suite.hpp"

namespace mdrift {

struct DatasetSpec {
    std::string kind = "random";  // random | figure3 | explicit | file
    std::optional<std::uint64_t> seed;  // defaults to the root seed
    double w_star_scale = 1.0;
    std::optional<Vec> w_star;
    std::optional<Mat> X;  // explicit: d x n, given as a list of n columns
    bool label_noise = false;
    std::string path;
};

struct InitSpec {
    std::string kind = "random";  // random (norm factor * ||w_dagger||) | explicit
    double norm_factor = 2.0;
    std::optional<std::uint64_t> seed;
    std::optional<Vec> w0;
};

struct ScheduleSpec {
    double t1 = 20.0;
    std::optional<double> t2;  // nullopt: 5 / (sigma^2 eta_large d)
    std::optional<double> t3;  // nullopt: 10 / phase3_rate at the start of phase III
    std::string phase2_mode = "sde";
};

struct IntegratorSpec {
    double step = 1e-2;
    std::string control = "adaptive";
    double kappa = 0.2;
    int record_stride = 100;
    double effective_step = 1e-2;
    double flow_kappa = 1.0;
};

struct LandscapeSpec {
    std::string family = "reparam";
    std::string basis = "pca";      // pca (of a three-phase run) | axes
    std::string center = "wdagger";  // wdagger | pca_mean | origin
    std::array<double, 4> range = {-1.5, 1.5, -1.5, 1.5};
    int resolution = 81;
};

struct RunConfig {
    std::uint64_t seed = 0;
    ModelConfig model;
    DatasetSpec dataset;
    InitSpec init;
    ScheduleSpec schedule;
    IntegratorSpec integrator;
    SuiteSpec::Sweep sweep;  // sweep.model is ignored; the top-level model applies
    LandscapeSpec landscape;
    SuiteSpec validate;
    std::vector<std::string> checks;  // validate.checks; empty means all groups

    void validate_all() const;
};

nlohmann::json load_json(const std::string& path);

// "a.b.c=value": value parsed as JSON, falling back to a plain string
void apply_override(nlohmann::json& j, const std::string& assignment);

// Throws ConfigError naming the offending key path. Unknown keys are rejected.
RunConfig parse_config(const nlohmann::json& j);

// seed from MINIMA_DRIFT_SEED when set
void apply_env(RunConfig& cfg);

Dataset build_dataset(const RunConfig& cfg);
Vec build_w0(const RunConfig& cfg, const Dataset& ds);
PhaseSchedule build_schedule(const RunConfig& cfg);
ThreePhaseOptions build_run_options(const RunConfig& cfg);

}  // namespace mdrift
