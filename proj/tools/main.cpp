#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "minima_drift/config.hpp"
#include "minima_drift/errors.hpp"
#include "minima_drift/experiments.hpp"
#include "minima_drift/io.hpp"
#include "minima_drift/suite.hpp"

namespace fs = std::filesystem;
using namespace mdrift;

namespace {

struct Common {
    std::string config;
    std::vector<std::string> sets;
    std::string out = ".";
    int jobs = 1;
    bool full_state = false;
};

void add_common(CLI::App* sub, Common& c, bool writes = true) {
    sub->add_option("--config", c.config, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--set", c.sets, "override a config value, key.path=value (repeatable)");
    if (writes) sub->add_option("--out", c.out, "output directory");
    sub->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
}

RunConfig load(const Common& c) {
    nlohmann::json j = c.config.empty() ? nlohmann::json::object() : load_json(c.config);
    for (const auto& s : c.sets) apply_override(j, s);
    RunConfig cfg = parse_config(j);
    apply_env(cfg);
    return cfg;
}

std::string out_path(const Common& c, const std::string& name) {
    std::error_code ec;
    fs::create_directories(c.out, ec);
    if (ec) throw IoError(c.out, "cannot create output directory: " + ec.message());
    return (fs::path(c.out) / name).string();
}

void note(const std::string& msg) { std::fprintf(stderr, "%s\n", msg.c_str()); }

int cmd_gen_data(const Common& c) {
    const RunConfig cfg = load(c);
    const Dataset ds = build_dataset(cfg);
    const std::string p = out_path(c, "dataset.json");
    write_dataset_json(ds, cfg.model.gamma, p);
    note("wrote " + p);
    return 0;
}

int cmd_run(const Common& c) {
    const RunConfig cfg = load(c);
    const Dataset ds = build_dataset(cfg);
    const Vec w0 = build_w0(cfg, ds);
    const PhaseSchedule sched = build_schedule(cfg);
    ThreePhaseOptions opt = build_run_options(cfg);
    opt.keep_states = c.full_state;
    note("run: t1=" + format_double(sched.t1) + " t2=" + format_double(sched.t2) + " t3=" +
         (sched.t3_auto ? std::string("auto") : format_double(sched.t3)) + " mode=" + mode_name(sched.phase2_mode));
    const Trajectory tr = run_three_phase(w0, ds, cfg.model, sched, cfg.seed, opt);
    const std::string p = out_path(c, "trajectory.csv");
    write_trajectory_csv(tr, p, c.full_state);
    note("wrote " + p + " (" + std::to_string(tr.size()) + " rows)");
    return 0;
}

int cmd_sweep(const Common& c) {
    const RunConfig cfg = load(c);
    const Dataset ds = build_dataset(cfg);
    const Vec w0 = build_w0(cfg, ds);
    SweepOptions opt;
    opt.t1 = cfg.sweep.t1;
    opt.t3 = cfg.schedule.t3;
    opt.phase2_mode = parse_mode(cfg.sweep.phase2_mode);
    opt.run.sde.step = cfg.sweep.step;
    opt.run.sde.kappa = cfg.sweep.kappa;
    opt.run.sde.record_stride = 1000000;
    opt.run.flow.record_stride = 1000000;
    opt.jobs = c.jobs;
    const SweepResult r = decay_sweep(cfg.model, ds, w0, cfg.sweep.t2_values, cfg.sweep.seeds, opt);
    const std::string p = out_path(c, "sweep.csv");
    write_sweep_csv(r, p);
    note("wrote " + p);
    return 0;
}

int cmd_landscape(const Common& c) {
    const RunConfig cfg = load(c);
    const auto& ls = cfg.landscape;
    const double gamma = cfg.model.gamma;
    const Family fam = parse_family(ls.family);
    const Dataset base = build_dataset(cfg);
    const Dataset ds = family_dataset(base, fam, gamma);
    const int d = ds.d();

    Vec center = Vec::Zero(d), bu = Vec::Unit(d, 0), bv = Vec::Unit(d, 1);
    std::vector<double> explained;
    if (ls.basis == "pca") {
        ThreePhaseOptions opt = build_run_options(cfg);
        opt.keep_states = true;
        const Trajectory tr = run_three_phase(build_w0(cfg, base), base, cfg.model, build_schedule(cfg), cfg.seed, opt);
        const PcaResult pca = pca_trajectory(tr.states, 2);
        if (pca.degenerate) note("landscape: trajectory has zero variance; PCA basis is arbitrary");
        bu = pca.components[0];
        bv = pca.components[1];
        explained = pca.explained_variance;
        if (ls.center == "pca_mean") center = pca.mean;
        const std::string pj = out_path(c, "pca.json");
        write_pca_json(pca, pj);
        const std::string pt = out_path(c, "trajectory.csv");
        write_trajectory_csv(tr, pt, true);
        note("wrote " + pj + ", " + pt);
    }
    if (ls.center == "wdagger") center = min_norm_solution(base, gamma);
    const GridRange range{ls.range[0], ls.range[1], ls.range[2], ls.range[3]};
    LandscapeGrid g = landscape_grid(center, bu, bv, range, ls.resolution, ds, gamma, fam, c.jobs);
    g.explained_variance = explained;
    const std::string p = out_path(c, "grid.csv");
    write_grid_csv(g, p);
    note("wrote " + p);
    return 0;
}

int cmd_validate(const Common& c) {
    const RunConfig cfg = load(c);
    const std::vector<std::string> groups = cfg.checks.empty() ? suite_groups() : cfg.checks;
    ValidationReport rep;
    for (const auto& g : groups) {
        for (auto& e : run_group(g, cfg.validate, c.jobs)) {
            std::printf("%s %s measured=%s tolerance=%s %s\n", e.passed ? "PASS" : "FAIL", e.name.c_str(),
                        format_double(e.measured).c_str(), format_double(e.tolerance).c_str(), e.detail.c_str());
            std::fflush(stdout);
            rep.add(std::move(e));
        }
    }
    const std::string p = out_path(c, "report.json");
    write_report_json(rep, p);
    note("wrote " + p);
    return rep.all_passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulation and audit harness for noise-driven drift along minima manifolds", "minima-drift"};
    app.require_subcommand(1);
    Common common;

    auto* gen = app.add_subcommand("gen-data", "generate a dataset and write dataset.json");
    auto* run = app.add_subcommand("run", "run the three-phase schedule and write trajectory.csv");
    auto* sweep = app.add_subcommand("sweep", "sweep the decay time and write sweep.csv");
    auto* land = app.add_subcommand("landscape", "evaluate losses on a 2-D grid and write grid.csv");
    auto* val = app.add_subcommand("validate", "run the audit suite and write report.json");
    auto* ver = app.add_subcommand("version", "print the version");
    for (auto* s : {gen, run, sweep, land, val}) add_common(s, common);
    run->add_flag("--full-state", common.full_state, "include w_0..w_{d-1} columns");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (ver->parsed()) {
            std::printf("%s\n", MD_VERSION);
            return 0;
        }
        if (gen->parsed()) return cmd_gen_data(common);
        if (run->parsed()) return cmd_run(common);
        if (sweep->parsed()) return cmd_sweep(common);
        if (land->parsed()) return cmd_landscape(common);
        if (val->parsed()) return cmd_validate(common);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
