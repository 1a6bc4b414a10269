// One PASS/FAIL line per acceptance criterion. Tolerances live in thresholds();
// time budgets are pinned here.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "minima_drift/config.hpp"
#include "minima_drift/errors.hpp"
#include "minima_drift/io.hpp"
#include "minima_drift/suite.hpp"

using namespace mdrift;

namespace {

struct Criterion {
    std::vector<std::string> groups;
    double budget_s;
    bool per_entry_budget = false;  // budget applies to each check rather than the whole criterion
};

const std::map<int, Criterion>& criteria() {
    static const std::map<int, Criterion> m = {
        {1, {{"oracles"}, 5.0, true}},
        {2, {{"drift"}, 60.0}},
        {3, {{"ou"}, 60.0}},
        {4, {{"phase2", "phase2_companion"}, 10.0, true}},
        {5, {{"phase3"}, 10.0, true}},
        {6, {{"c_positivity"}, 60.0}},
        {7, {{"kkt"}, 5.0}},
        {8, {{"sweep"}, 120.0}},
        {9, {{"mixing"}, 120.0}},
        {10, {{"lyapunov"}, 5.0}},
    };
    return m;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance checks", "acceptance"};
    int id = 0;
    std::string config;
    int jobs = 1;
    app.add_option("--criterion", id, "criterion number")->required()->check(CLI::Range(1, 10));
    app.add_option("--config", config, "suite configuration")->required()->check(CLI::ExistingFile);
    app.add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    CLI11_PARSE(app, argc, argv);

    const Criterion& cr = criteria().at(id);
    SuiteSpec spec;
    try {
        spec = parse_config(load_json(config)).validate;
    } catch (const std::exception& e) {
        std::printf("FAIL criterion %d: %s\n", id, e.what());
        return 1;
    }

    using clock = std::chrono::steady_clock;
    bool ok = true;
    double total = 0.0, worst = 0.0;
    std::string failed;
    for (const auto& g : cr.groups) {
        const auto t0 = clock::now();
        std::vector<CheckEntry> entries;
        try {
            entries = run_group(g, spec, jobs);
        } catch (const std::exception& e) {
            entries.push_back({g, 0.0, 0.0, 0.0, false, std::string("error: ") + e.what()});
        }
        const double dt = std::chrono::duration<double>(clock::now() - t0).count();
        total += dt;
        worst = std::max(worst, dt / static_cast<double>(std::max<std::size_t>(entries.size(), 1)));
        for (const auto& e : entries) {
            std::printf("  %s %s measured=%s tolerance=%s %s\n", e.passed ? "ok  " : "FAIL", e.name.c_str(),
                        format_double(e.measured).c_str(), format_double(e.tolerance).c_str(), e.detail.c_str());
            if (!e.passed) {
                ok = false;
                failed += (failed.empty() ? "" : ",") + e.name;
            }
        }
        if (cr.per_entry_budget && dt > cr.budget_s * static_cast<double>(entries.size())) ok = false;
    }
    const double timed = cr.per_entry_budget ? worst : total;
    const bool in_budget = timed <= cr.budget_s;
    ok = ok && in_budget;
    std::printf("%s criterion %d time=%.2fs budget=%.0fs%s%s\n", ok ? "PASS" : "FAIL", id, timed, cr.budget_s,
                in_budget ? "" : " (over budget)", failed.empty() ? "" : (" failed=" + failed).c_str());
    return ok ? 0 : 1;
}
