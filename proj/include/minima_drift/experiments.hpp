#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "minima_drift/dynamics.hpp"

namespace mdrift {

struct WStarSpec {
    std::optional<Vec> explicit_w;  // used as given when set
    double scale = 1.0;             // otherwise uniform on the sphere of this radius
};

// Gaussian columns, labels from alpha*; optional label noise in {-sigma, +sigma}.
Dataset generate_dataset(const ModelConfig& cfg, std::uint64_t seed, const WStarSpec& spec,
                         bool label_noise = false);

// d=2, n=1, gamma=2, w*=(-1, 0.5), X=(0.15, -0.7)
Dataset figure3_dataset();

// random Gaussian direction scaled to factor * ||w_dagger||
Vec default_w0(const Dataset& ds, double gamma, std::uint64_t seed, double factor = 2.0);

struct SweepResult {
    std::vector<double> decay_times;
    std::vector<std::uint64_t> seeds;
    Mat final_train_loss;  // |decay_times| x |seeds|
    Mat final_test_loss;
    Mat final_dist_to_wdagger;
};

struct SweepOptions {
    double t1 = 20.0;
    std::optional<double> t3;  // nullopt: 10 / phase3_rate at the start of phase III
    PhaseSchedule::Mode phase2_mode = PhaseSchedule::Mode::Sde;
    ThreePhaseOptions run;
    int jobs = 1;
};

SweepResult decay_sweep(const ModelConfig& cfg, const Dataset& ds, const Vec& w0, const std::vector<double>& t2_values,
                        const std::vector<std::uint64_t>& seeds, const SweepOptions& opt);

struct PcaResult {
    Vec mean;
    std::vector<Vec> components;
    std::vector<double> explained_variance;  // absolute variances, non-increasing
    double total_variance = 0.0;
    bool degenerate = false;
};
PcaResult pca_trajectory(const std::vector<Vec>& states, int k);

enum class Family { Reparam, Diagonal, Linear };
Family parse_family(const std::string& s);
const char* family_name(Family f);

// alpha* computed from w* for the given family (diagonal depth L = gamma + 1)
Dataset family_dataset(const Dataset& base, Family f, double gamma);

struct GridRange {
    double u_min = -1.0, u_max = 1.0, v_min = -1.0, v_max = 1.0;
};

struct LandscapeGrid {
    Vec center, basis_u, basis_v;
    GridRange range;
    int resolution = 0;
    Mat train, test;  // train(i, j) at u_i, v_j
    std::vector<double> explained_variance;
    Family family = Family::Reparam;
    double gamma = 0.0;

    double u(int i) const;
    double v(int j) const;
};

LandscapeGrid landscape_grid(const Vec& center, const Vec& basis_u, const Vec& basis_v, const GridRange& range,
                             int res, const Dataset& ds, double gamma, Family family, int jobs = 1);

// loss pair for one parameter vector under a family
LossPair family_losses(const Vec& w, const Dataset& ds, double gamma, Family family);

}  // namespace mdrift
