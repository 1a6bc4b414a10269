#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>

#include <unistd.h>

#include "minima_drift/errors.hpp"
#include "minima_drift/io.hpp"

namespace fs = std::filesystem;
using namespace mdrift;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("md-io-" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

int count_lines(const std::string& p) {
    std::ifstream in(p);
    std::string line;
    int n = 0;
    while (std::getline(in, line)) ++n;
    return n;
}

Dataset small_ds() {
    ModelConfig c;
    c.d = 5;
    c.n = 2;
    return generate_dataset(c, 4, {});
}

}  // namespace

TEST_CASE("format_double round-trips") {
    for (double v : {0.0, 1.0, -0.1, 1.0 / 3.0, 6.02214076e23, 5e-324, 1.7976931348623157e308})
        CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
    CHECK(format_double(0.5) == "0.5");
    CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
}

TEST_CASE("trajectory csv round trip") {
    TempDir tmp;
    const Dataset ds = small_ds();
    SdeConfig cfg;
    cfg.step = 0.01;
    cfg.horizon = 0.2;
    cfg.record_stride = 3;
    const Trajectory tr = phase1_langevin(default_w0(ds, 2.0, 1), ds, 2.0, 0.05, cfg);
    write_trajectory_csv(tr, tmp.file("t.csv"), true);
    const Trajectory back = read_trajectory_csv(tmp.file("t.csv"));
    CHECK(back.times == tr.times);
    CHECK(back.train_loss == tr.train_loss);
    CHECK(back.test_loss == tr.test_loss);
    CHECK(back.norm_w == tr.norm_w);
    CHECK(back.dist_to_wdagger == tr.dist_to_wdagger);
    CHECK(back.phase_tags == tr.phase_tags);
    REQUIRE(back.states.size() == tr.states.size());
    CHECK(back.states.back() == tr.states.back());

    write_trajectory_csv(tr, tmp.file("short.csv"), false);
    CHECK(read_trajectory_csv(tmp.file("short.csv")).states.empty());
    CHECK(count_lines(tmp.file("short.csv")) == static_cast<int>(tr.size()) + 1);

    write_trajectory_csv(Trajectory{}, tmp.file("empty.csv"), false);
    CHECK(count_lines(tmp.file("empty.csv")) == 1);
    CHECK(read_trajectory_csv(tmp.file("empty.csv")).empty());
}

TEST_CASE("sweep csv round trip") {
    TempDir tmp;
    SweepResult r;
    r.decay_times = {0.0, 10.0};
    r.seeds = {1, 2, 3};
    r.final_train_loss = Mat::Random(2, 3).cwiseAbs();
    r.final_test_loss = Mat::Random(2, 3).cwiseAbs();
    r.final_dist_to_wdagger = Mat::Random(2, 3).cwiseAbs();
    write_sweep_csv(r, tmp.file("s.csv"));
    CHECK(count_lines(tmp.file("s.csv")) == 7);
    const SweepResult b = read_sweep_csv(tmp.file("s.csv"));
    CHECK(b.decay_times == r.decay_times);
    CHECK(b.seeds == r.seeds);
    CHECK(b.final_train_loss == r.final_train_loss);
    CHECK(b.final_test_loss == r.final_test_loss);
    CHECK(b.final_dist_to_wdagger == r.final_dist_to_wdagger);
}

TEST_CASE("report json round trip") {
    TempDir tmp;
    ValidationReport rep;
    rep.add({"alpha", 1e-12, 0.0, 1e-10, true, "ok"});
    rep.add({"beta", 0.3, 0.0, 0.12, false, "ks"});
    write_report_json(rep, tmp.file("r.json"));
    const ValidationReport b = read_report_json(tmp.file("r.json"));
    REQUIRE(b.entries.size() == 2);
    CHECK(b.entries[0].name == "alpha");
    CHECK(b.entries[0].measured == 1e-12);
    CHECK(b.entries[1].passed == false);
    CHECK(b.entries[1].detail == "ks");
    CHECK_FALSE(b.all_passed());
}

TEST_CASE("dataset json round trip") {
    TempDir tmp;
    const Dataset ds = small_ds();
    write_dataset_json(ds, 2.0, tmp.file("d.json"));
    double gamma = 0;
    const Dataset b = read_dataset_json(tmp.file("d.json"), &gamma);
    CHECK(gamma == 2.0);
    CHECK(b.X == ds.X);
    CHECK(b.y == ds.y);
    CHECK(b.w_star == ds.w_star);
    CHECK((b.alpha_star_x - ds.alpha_star_x).norm() < 1e-15);
}

TEST_CASE("grid csv has one row per node") {
    TempDir tmp;
    const Dataset ds = figure3_dataset();
    const LandscapeGrid g =
        landscape_grid(Vec::Zero(2), Vec::Unit(2, 0), Vec::Unit(2, 1), {-1, 1, -1, 1}, 5, ds, 2.0, Family::Reparam);
    write_grid_csv(g, tmp.file("g.csv"));
    const GridRows rows = read_grid_csv(tmp.file("g.csv"));
    CHECK(rows.u.size() == 25);
    CHECK(rows.train.size() == 25);
    CHECK_FALSE(rows.metadata.empty());
    CHECK(rows.train[0] == g.train(0, 0));
}

TEST_CASE("io errors name the path") {
    try {
        read_trajectory_csv("/nonexistent/dir/t.csv");
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("/nonexistent/dir/t.csv") != std::string::npos);
    }
    CHECK_THROWS_AS(write_sweep_csv(SweepResult{}, "/nonexistent/dir/s.csv"), IoError);
}
