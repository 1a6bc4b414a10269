#include "minima_drift/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>

#include "minima_drift/errors.hpp"
#include "minima_drift/experiments.hpp"
#include "minima_drift/io.hpp"

namespace mdrift {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

// Walks one JSON object, remembering which keys were consumed so leftovers can be rejected.
class Section {
public:
    Section(const json* j, std::string path) : j_(j), path_(std::move(path)) {
        if (j_ && !j_->is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
    }

    Section sub(const std::string& key) {
        const json* v = find(key);
        return Section(v, join(path_, key));
    }

    bool has(const std::string& key) const { return j_ && j_->contains(key); }

    void get(const std::string& key, double& out) {
        if (const json* v = find(key)) out = number(*v, join(path_, key));
    }

    void get(const std::string& key, int& out) {
        if (const json* v = find(key)) {
            if (!v->is_number_integer()) throw ConfigError(join(path_, key), "expected an integer");
            out = v->get<int>();
        }
    }

    void get(const std::string& key, std::int64_t& out) {
        if (const json* v = find(key)) {
            if (!v->is_number_integer()) throw ConfigError(join(path_, key), "expected an integer");
            out = v->get<std::int64_t>();
        }
    }

    void get(const std::string& key, std::uint64_t& out) {
        if (const json* v = find(key)) out = unsigned_int(*v, join(path_, key));
    }

    void get(const std::string& key, std::optional<std::uint64_t>& out) {
        if (const json* v = find(key)) {
            if (v->is_null()) out.reset();
            else out = unsigned_int(*v, join(path_, key));
        }
    }

    void get(const std::string& key, bool& out) {
        if (const json* v = find(key)) {
            if (!v->is_boolean()) throw ConfigError(join(path_, key), "expected true or false");
            out = v->get<bool>();
        }
    }

    void get(const std::string& key, std::string& out) {
        if (const json* v = find(key)) {
            if (!v->is_string()) throw ConfigError(join(path_, key), "expected a string");
            out = v->get<std::string>();
        }
    }

    // number or "auto"
    void get_auto(const std::string& key, std::optional<double>& out) {
        if (const json* v = find(key)) {
            if (v->is_string() && v->get<std::string>() == "auto") out.reset();
            else out = number(*v, join(path_, key));
        }
    }

    void get(const std::string& key, std::vector<double>& out) {
        if (const json* v = find(key)) out = numbers(*v, join(path_, key));
    }

    void get(const std::string& key, std::vector<std::uint64_t>& out) {
        if (const json* v = find(key)) {
            if (!v->is_array()) throw ConfigError(join(path_, key), "expected an array of integers");
            out.clear();
            for (std::size_t i = 0; i < v->size(); ++i)
                out.push_back(unsigned_int((*v)[i], join(path_, key) + "[" + std::to_string(i) + "]"));
        }
    }

    void get(const std::string& key, std::vector<std::string>& out) {
        if (const json* v = find(key)) {
            if (!v->is_array()) throw ConfigError(join(path_, key), "expected an array of strings");
            out.clear();
            for (std::size_t i = 0; i < v->size(); ++i) {
                if (!(*v)[i].is_string())
                    throw ConfigError(join(path_, key) + "[" + std::to_string(i) + "]", "expected a string");
                out.push_back((*v)[i].get<std::string>());
            }
        }
    }

    void get(const std::string& key, std::optional<Vec>& out) {
        if (const json* v = find(key)) {
            if (v->is_null()) {
                out.reset();
                return;
            }
            const auto xs = numbers(*v, join(path_, key));
            out = Eigen::Map<const Vec>(xs.data(), static_cast<Eigen::Index>(xs.size()));
        }
    }

    void get_columns(const std::string& key, std::optional<Mat>& out) {
        const json* v = find(key);
        if (!v) return;
        const std::string p = join(path_, key);
        if (v->is_null()) {
            out.reset();
            return;
        }
        if (!v->is_array() || v->empty()) throw ConfigError(p, "expected a non-empty list of columns");
        std::vector<std::vector<double>> cols;
        for (std::size_t c = 0; c < v->size(); ++c) cols.push_back(numbers((*v)[c], p + "[" + std::to_string(c) + "]"));
        const std::size_t d = cols.front().size();
        Mat X(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(cols.size()));
        for (std::size_t c = 0; c < cols.size(); ++c) {
            if (cols[c].size() != d) throw ConfigError(p + "[" + std::to_string(c) + "]", "columns differ in length");
            for (std::size_t r = 0; r < d; ++r) X(r, c) = cols[c][r];
        }
        out = X;
    }

    void finish() const {
        if (!j_) return;
        for (auto it = j_->begin(); it != j_->end(); ++it)
            if (!used_.count(it.key())) throw ConfigError(join(path_, it.key()), "unknown key");
    }

    const std::string& path() const { return path_; }

private:
    const json* find(const std::string& key) {
        if (!j_) return nullptr;
        auto it = j_->find(key);
        if (it == j_->end()) return nullptr;
        used_.insert(key);
        return &*it;
    }

    static double number(const json& v, const std::string& p) {
        if (!v.is_number()) throw ConfigError(p, "expected a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw ConfigError(p, "must be finite");
        return x;
    }

    static std::uint64_t unsigned_int(const json& v, const std::string& p) {
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
            throw ConfigError(p, "expected a non-negative integer");
        return v.get<std::uint64_t>();
    }

    static std::vector<double> numbers(const json& v, const std::string& p) {
        if (!v.is_array()) throw ConfigError(p, "expected an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], p + "[" + std::to_string(i) + "]"));
        return out;
    }

    const json* j_;
    std::string path_;
    std::set<std::string> used_;
};

void read_model(Section s, ModelConfig& m) {
    s.get("d", m.d);
    s.get("n", m.n);
    s.get("gamma", m.gamma);
    s.get("sigma", m.sigma);
    s.get("eta_large", m.eta_large);
    s.get("eta_small", m.eta_small);
    s.finish();
}

void read_validate(Section v, SuiteSpec& s, std::vector<std::string>& checks) {
    v.get("checks", checks);
    {
        auto x = v.sub("instance");
        x.get("d", s.instance.d);
        x.get("n", s.instance.n);
        x.get("gamma", s.instance.gamma);
        x.get("seed", s.instance.seed);
        x.get("w_star_scale", s.instance.w_star_scale);
        x.finish();
    }
    {
        auto x = v.sub("oracles");
        x.get("grad_instances", s.oracles.grad_instances);
        x.get("roundtrip_samples", s.oracles.roundtrip_samples);
        x.get("matrix_samples", s.oracles.matrix_samples);
        x.get("seed", s.oracles.seed);
        x.finish();
    }
    {
        auto x = v.sub("drift");
        x.get("sigma", s.drift.sigma);
        x.get("eta_large", s.drift.eta_large);
        x.get("samples", s.drift.samples);
        x.get("figure3_lambda", s.drift.figure3_lambda);
        x.get("seed", s.drift.seed);
        x.finish();
    }
    {
        auto x = v.sub("ou");
        x.get("sigma", s.ou.sigma);
        x.get("eta_large", s.ou.eta_large);
        x.get("relaxations", s.ou.relaxations);
        x.get("kappa", s.ou.kappa);
        x.get("samples", s.ou.samples);
        x.get("seed", s.ou.seed);
        x.finish();
    }
    {
        auto x = v.sub("phase2");
        x.get("lambda0", s.phase2.lambda0);
        x.get("sigma", s.phase2.sigma);
        x.get("eta_large", s.phase2.eta_large);
        x.get("horizon", s.phase2.horizon);
        x.get("step", s.phase2.step);
        x.get("companion_horizon", s.phase2.companion_horizon);
        x.get("companion_data_seed", s.phase2.companion_data_seed);
        x.get("companion_seed", s.phase2.companion_seed);
        x.finish();
    }
    {
        auto x = v.sub("phase3");
        x.get("start_fraction", s.phase3.start_fraction);
        x.get("relaxations", s.phase3.relaxations);
        x.get("step", s.phase3.step);
        x.get("seed", s.phase3.seed);
        x.finish();
    }
    {
        auto x = v.sub("c_positivity");
        x.get("d", s.c_positivity.d);
        x.get("n", s.c_positivity.n);
        x.get("gamma", s.c_positivity.gamma);
        x.get("trials", s.c_positivity.trials);
        x.get("directions", s.c_positivity.directions);
        x.get("counter_trials", s.c_positivity.counter_trials);
        x.get("seed", s.c_positivity.seed);
        x.finish();
    }
    {
        auto x = v.sub("kkt");
        x.get("datasets", s.kkt.datasets);
        x.get("d", s.kkt.d);
        x.get("n", s.kkt.n);
        x.get("gammas", s.kkt.gammas);
        x.get("seed", s.kkt.seed);
        x.finish();
    }
    {
        auto x = v.sub("mixing");
        x.get("eta_large", s.mixing.eta_large);
        x.get("horizon", s.mixing.horizon);
        x.get("replicas", s.mixing.replicas);
        x.get("kappa", s.mixing.kappa);
        x.get("norm_a", s.mixing.norm_a);
        x.get("norm_b", s.mixing.norm_b);
        x.get("seed", s.mixing.seed);
        x.finish();
    }
    {
        auto x = v.sub("lyapunov");
        x.get("alpha", s.lyapunov.alpha);
        x.get("eta_large", s.lyapunov.eta_large);
        x.get("radii", s.lyapunov.radii);
        x.get("samples", s.lyapunov.samples);
        x.get("seed", s.lyapunov.seed);
        x.finish();
    }
    v.finish();
}

void require(bool ok, const std::string& key, const std::string& msg) {
    if (!ok) throw ConfigError(key, msg);
}

}  // namespace

json load_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("--config", "cannot open '" + path + "'");
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError("--config", path + ": " + e.what());
    }
}

void apply_override(json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set", "expected key=value, got '" + assignment + "'");
    const std::string key = assignment.substr(0, eq), raw = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw;
    }
    json* node = &j;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("--set", "empty path segment in '" + key + "'");
        if (!node->is_object()) throw ConfigError(key, "parent is not an object");
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        if (node->is_null()) *node = json::object();
        start = dot + 1;
    }
}

RunConfig parse_config(const json& j) {
    RunConfig c;
    Section root(&j, "");
    root.get("seed", c.seed);
    read_model(root.sub("model"), c.model);
    {
        auto s = root.sub("dataset");
        s.get("kind", c.dataset.kind);
        s.get("seed", c.dataset.seed);
        s.get("w_star_scale", c.dataset.w_star_scale);
        s.get("w_star", c.dataset.w_star);
        s.get_columns("X", c.dataset.X);
        s.get("label_noise", c.dataset.label_noise);
        s.get("path", c.dataset.path);
        s.finish();
    }
    {
        auto s = root.sub("init");
        s.get("kind", c.init.kind);
        s.get("norm_factor", c.init.norm_factor);
        s.get("seed", c.init.seed);
        s.get("w0", c.init.w0);
        s.finish();
    }
    {
        auto s = root.sub("schedule");
        s.get("t1", c.schedule.t1);
        s.get_auto("t2", c.schedule.t2);
        s.get_auto("t3", c.schedule.t3);
        s.get("phase2_mode", c.schedule.phase2_mode);
        s.finish();
    }
    {
        auto s = root.sub("integrator");
        s.get("step", c.integrator.step);
        s.get("control", c.integrator.control);
        s.get("kappa", c.integrator.kappa);
        s.get("record_stride", c.integrator.record_stride);
        s.get("effective_step", c.integrator.effective_step);
        s.get("flow_kappa", c.integrator.flow_kappa);
        s.finish();
    }
    {
        auto s = root.sub("sweep");
        s.get("t2_values", c.sweep.t2_values);
        s.get("seeds", c.sweep.seeds);
        s.get("t1", c.sweep.t1);
        s.get("data_seed", c.sweep.data_seed);
        s.get("w0_factor", c.sweep.w0_factor);
        s.get("phase2_mode", c.sweep.phase2_mode);
        s.get("step", c.sweep.step);
        s.get("kappa", c.sweep.kappa);
        s.finish();
    }
    {
        auto s = root.sub("landscape");
        s.get("family", c.landscape.family);
        s.get("basis", c.landscape.basis);
        s.get("center", c.landscape.center);
        std::vector<double> r(c.landscape.range.begin(), c.landscape.range.end());
        s.get("range", r);
        if (r.size() != 4) throw ConfigError("landscape.range", "expected [u_min, u_max, v_min, v_max]");
        std::copy(r.begin(), r.end(), c.landscape.range.begin());
        s.get("resolution", c.landscape.resolution);
        s.finish();
    }
    read_validate(root.sub("validate"), c.validate, c.checks);
    root.finish();
    c.sweep.model = c.model;
    c.validate.sweep = c.sweep;
    c.validate_all();
    return c;
}

void RunConfig::validate_all() const {
    model.validate();
    const auto& ds = dataset;
    require(ds.kind == "random" || ds.kind == "figure3" || ds.kind == "explicit" || ds.kind == "file", "dataset.kind",
            "expected random, figure3, explicit or file");
    require(ds.w_star_scale > 0.0, "dataset.w_star_scale", "must be > 0");
    if (ds.kind == "figure3") {
        require(model.d == 2 && model.n == 1 && model.gamma == 2.0, "dataset.kind",
                "figure3 data needs model.d=2, model.n=1, model.gamma=2");
    }
    if (ds.kind == "explicit") {
        require(ds.X.has_value(), "dataset.X", "required for explicit data");
        require(ds.w_star.has_value(), "dataset.w_star", "required for explicit data");
        require(ds.X->rows() == model.d && ds.X->cols() == model.n, "dataset.X", "must hold model.n columns of length model.d");
    }
    if (ds.w_star) require(ds.w_star->size() == model.d, "dataset.w_star", "length must equal model.d");
    if (ds.kind == "file") require(!ds.path.empty(), "dataset.path", "required for file data");

    require(init.kind == "random" || init.kind == "explicit", "init.kind", "expected random or explicit");
    require(init.norm_factor > 0.0, "init.norm_factor", "must be > 0");
    if (init.kind == "explicit") {
        require(init.w0.has_value(), "init.w0", "required for an explicit start");
        require(init.w0->size() == model.d, "init.w0", "length must equal model.d");
    }

    require(schedule.t1 >= 0.0, "schedule.t1", "must be >= 0");
    if (schedule.t2) require(*schedule.t2 >= 0.0, "schedule.t2", "must be >= 0 or \"auto\"");
    if (schedule.t3) require(*schedule.t3 >= 0.0, "schedule.t3", "must be >= 0 or \"auto\"");
    try {
        parse_mode(schedule.phase2_mode);
    } catch (const ConfigError& e) {
        throw ConfigError("schedule.phase2_mode", e.what());
    }

    const auto& in = integrator;
    require(in.step > 0.0, "integrator.step", "must be > 0");
    require(in.control == "adaptive" || in.control == "fixed", "integrator.control", "expected adaptive or fixed");
    require(in.kappa > 0.0 && in.kappa < 2.0, "integrator.kappa", "must lie in (0, 2)");
    require(in.record_stride >= 1, "integrator.record_stride", "must be >= 1");
    require(in.effective_step > 0.0, "integrator.effective_step", "must be > 0");
    require(in.flow_kappa > 0.0 && in.flow_kappa < 2.0, "integrator.flow_kappa", "must lie in (0, 2)");

    require(!sweep.t2_values.empty(), "sweep.t2_values", "must not be empty");
    for (double t : sweep.t2_values) require(t >= 0.0, "sweep.t2_values", "entries must be >= 0");
    require(!sweep.seeds.empty(), "sweep.seeds", "must not be empty");
    require(sweep.t1 >= 0.0, "sweep.t1", "must be >= 0");
    require(sweep.w0_factor > 0.0, "sweep.w0_factor", "must be > 0");
    require(sweep.step > 0.0, "sweep.step", "must be > 0");
    require(sweep.kappa > 0.0 && sweep.kappa < 2.0, "sweep.kappa", "must lie in (0, 2)");
    try {
        parse_mode(sweep.phase2_mode);
    } catch (const ConfigError& e) {
        throw ConfigError("sweep.phase2_mode", e.what());
    }

    const auto& l = landscape;
    parse_family(l.family);
    require(l.basis == "pca" || l.basis == "axes", "landscape.basis", "expected pca or axes");
    require(l.center == "wdagger" || l.center == "pca_mean" || l.center == "origin", "landscape.center",
            "expected wdagger, pca_mean or origin");
    require(l.center != "pca_mean" || l.basis == "pca", "landscape.center", "pca_mean needs landscape.basis = pca");
    require(l.range[0] < l.range[1] && l.range[2] < l.range[3], "landscape.range", "min must be below max");
    require(l.resolution >= 2, "landscape.resolution", "must be >= 2");

    const auto& v = validate;
    ModelConfig inst;
    inst.d = v.instance.d;
    inst.n = v.instance.n;
    inst.gamma = v.instance.gamma;
    try {
        inst.validate();
    } catch (const ConfigError& e) {
        throw ConfigError("validate.instance." + e.key_path.substr(e.key_path.find('.') + 1), e.what());
    }
    require(v.instance.gamma > 0.5, "validate.instance.gamma", "must be > 1/2");
    require(v.oracles.grad_instances >= 1 && v.oracles.roundtrip_samples >= 1 && v.oracles.matrix_samples >= 1,
            "validate.oracles", "sample counts must be >= 1");
    require(v.drift.samples >= 2, "validate.drift.samples", "must be >= 2");
    require(v.drift.figure3_lambda > 0.0, "validate.drift.figure3_lambda", "must be > 0");
    require(v.ou.relaxations > 0.0, "validate.ou.relaxations", "must be > 0");
    require(v.ou.kappa > 0.0 && v.ou.kappa < 2.0, "validate.ou.kappa", "must lie in (0, 2)");
    require(v.ou.samples >= 2, "validate.ou.samples", "must be >= 2");
    require(v.phase2.lambda0 > 0.0, "validate.phase2.lambda0", "must be > 0");
    require(v.phase2.horizon > 0.0 && v.phase2.companion_horizon > 0.0, "validate.phase2", "horizons must be > 0");
    require(v.phase2.step > 0.0, "validate.phase2.step", "must be > 0");
    require(v.phase3.start_fraction > 0.0, "validate.phase3.start_fraction", "must be > 0");
    require(v.phase3.relaxations > 0.0, "validate.phase3.relaxations", "must be > 0");
    require(v.phase3.step > 0.0, "validate.phase3.step", "must be > 0");
    require(v.c_positivity.n >= 1 && v.c_positivity.n <= v.c_positivity.d, "validate.c_positivity",
            "need 1 <= n <= d");
    require(v.c_positivity.trials >= 1 && v.c_positivity.counter_trials >= 1, "validate.c_positivity",
            "trial counts must be >= 1");
    require(v.kkt.n >= 1 && v.kkt.n < v.kkt.d, "validate.kkt", "need 1 <= n < d");
    require(!v.kkt.gammas.empty(), "validate.kkt.gammas", "must not be empty");
    require(v.mixing.replicas >= 1, "validate.mixing.replicas", "must be >= 1");
    require(v.mixing.horizon > 0.0, "validate.mixing.horizon", "must be > 0");
    require(v.mixing.kappa > 0.0 && v.mixing.kappa < 2.0, "validate.mixing.kappa", "must lie in (0, 2)");
    require(!v.lyapunov.radii.empty(), "validate.lyapunov.radii", "must not be empty");
    require(v.lyapunov.samples >= 1, "validate.lyapunov.samples", "must be >= 1");
    const auto& groups = suite_groups();
    for (const auto& c : checks)
        require(std::find(groups.begin(), groups.end(), c) != groups.end(), "validate.checks",
                "unknown check group '" + c + "'");
}

void apply_env(RunConfig& cfg) {
    const char* s = std::getenv("MINIMA_DRIFT_SEED");
    if (!s || !*s) return;
    errno = 0;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s, &end, 10);
    if (errno != 0 || *end != '\0' || *s == '-')
        throw ConfigError("MINIMA_DRIFT_SEED", "expected a non-negative integer, got '" + std::string(s) + "'");
    cfg.seed = v;
}

Dataset build_dataset(const RunConfig& cfg) {
    const auto& s = cfg.dataset;
    if (s.kind == "figure3") return figure3_dataset();
    if (s.kind == "file") {
        double gamma = 0.0;
        Dataset ds = read_dataset_json(s.path, &gamma);
        if (ds.d() != cfg.model.d || ds.n() != cfg.model.n)
            throw ConfigError("dataset.path", "data shape does not match model.d / model.n");
        if (gamma != cfg.model.gamma) throw ConfigError("dataset.path", "data was generated for a different gamma");
        return ds;
    }
    if (s.kind == "explicit") {
        std::optional<Vec> noise;
        return make_dataset(*s.X, *s.w_star, cfg.model.gamma, noise);
    }
    return generate_dataset(cfg.model, s.seed.value_or(cfg.seed), WStarSpec{s.w_star, s.w_star_scale}, s.label_noise);
}

Vec build_w0(const RunConfig& cfg, const Dataset& ds) {
    if (cfg.init.kind == "explicit") return *cfg.init.w0;
    return default_w0(ds, cfg.model.gamma, cfg.init.seed.value_or(cfg.seed), cfg.init.norm_factor);
}

PhaseSchedule build_schedule(const RunConfig& cfg) {
    PhaseSchedule s;
    s.t1 = cfg.schedule.t1;
    const auto& m = cfg.model;
    s.t2 = cfg.schedule.t2.value_or(m.sigma > 0.0 ? 5.0 / (m.sigma * m.sigma * m.eta_large * m.d) : 0.0);
    s.t3 = cfg.schedule.t3.value_or(0.0);
    s.t3_auto = !cfg.schedule.t3.has_value();
    s.phase2_mode = parse_mode(cfg.schedule.phase2_mode);
    s.validate();
    return s;
}

ThreePhaseOptions build_run_options(const RunConfig& cfg) {
    ThreePhaseOptions o;
    o.sde.step = cfg.integrator.step;
    o.sde.control = cfg.integrator.control == "fixed" ? StepControl::Fixed : StepControl::Adaptive;
    o.sde.kappa = cfg.integrator.kappa;
    o.sde.record_stride = cfg.integrator.record_stride;
    o.effective_step = cfg.integrator.effective_step;
    o.flow.record_stride = cfg.integrator.record_stride;
    o.flow.kappa = cfg.integrator.flow_kappa;
    return o;
}

}  // namespace mdrift
