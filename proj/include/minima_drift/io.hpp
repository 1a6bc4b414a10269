#pragma once

#include <string>
#include <vector>

#include "minima_drift/experiments.hpp"
#include "minima_drift/validation.hpp"

namespace mdrift {

// shortest representation that reads back to the same double
std::string format_double(double v);

void write_trajectory_csv(const Trajectory& tr, const std::string& path, bool full_state);
Trajectory read_trajectory_csv(const std::string& path);

void write_sweep_csv(const SweepResult& r, const std::string& path);
SweepResult read_sweep_csv(const std::string& path);

// '#' lines carry center, bases, family and gamma
void write_grid_csv(const LandscapeGrid& g, const std::string& path);
struct GridRows {
    std::vector<std::string> metadata;
    std::vector<double> u, v, train, test;
};
GridRows read_grid_csv(const std::string& path);

void write_pca_json(const PcaResult& p, const std::string& path);
void write_report_json(const ValidationReport& r, const std::string& path);
ValidationReport read_report_json(const std::string& path);

void write_dataset_json(const Dataset& ds, double gamma, const std::string& path);
// returns the dataset and the gamma it was written with
Dataset read_dataset_json(const std::string& path, double* gamma = nullptr);

}  // namespace mdrift
