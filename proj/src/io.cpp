#include "minima_drift/io.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "minima_drift/errors.hpp"

namespace mdrift {

using json = nlohmann::json;

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError(path, std::string("cannot open for writing: ") + std::strerror(errno));
    return os;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError(path, std::string("cannot open for reading: ") + std::strerror(errno));
    return is;
}

void finish(std::ofstream& os, const std::string& path) {
    os.flush();
    if (!os) throw IoError(path, "write failed");
}

std::vector<std::string> split(const std::string& line, char sep = ',') {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, sep)) out.push_back(cur);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

double parse_double(const std::string& s, const std::string& path) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw IoError(path, "bad number '" + s + "'");
    return v;
}

Phase parse_phase(const std::string& s, const std::string& path) {
    if (s == "I") return Phase::I;
    if (s == "II") return Phase::II;
    if (s == "II-effective") return Phase::IIEffective;
    if (s == "III") return Phase::III;
    throw IoError(path, "unknown phase tag '" + s + "'");
}

json vec_json(const Vec& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vec json_vec(const json& j) {
    auto xs = j.get<std::vector<double>>();
    return Eigen::Map<Vec>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

void write_json(const json& j, const std::string& path) {
    auto os = open_out(path);
    os << j.dump(2) << '\n';
    finish(os, path);
}

}  // namespace

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

void write_trajectory_csv(const Trajectory& tr, const std::string& path, bool full_state) {
    if (full_state && tr.states.size() != tr.size())
        throw IoError(path, "full state requested but the trajectory kept no states");
    auto os = open_out(path);
    os << "t,phase,train_loss,test_loss,norm_w,dist_to_wdagger";
    const Eigen::Index d = full_state && !tr.states.empty() ? tr.states.front().size() : 0;
    for (Eigen::Index i = 0; i < d; ++i) os << ",w_" << i;
    os << '\n';
    for (std::size_t k = 0; k < tr.size(); ++k) {
        os << format_double(tr.times[k]) << ',' << phase_name(tr.phase_tags[k]) << ','
           << format_double(tr.train_loss[k]) << ',' << format_double(tr.test_loss[k]) << ','
           << format_double(tr.norm_w[k]) << ',' << format_double(tr.dist_to_wdagger[k]);
        for (Eigen::Index i = 0; i < d; ++i) os << ',' << format_double(tr.states[k](i));
        os << '\n';
    }
    finish(os, path);
}

Trajectory read_trajectory_csv(const std::string& path) {
    auto is = open_in(path);
    std::string line;
    if (!std::getline(is, line)) throw IoError(path, "missing header");
    const auto header = split(line);
    if (header.size() < 6 || header[0] != "t" || header[1] != "phase") throw IoError(path, "unexpected header");
    const std::size_t d = header.size() - 6;
    Trajectory tr;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto f = split(line);
        if (f.size() != header.size()) throw IoError(path, "row has wrong column count");
        tr.times.push_back(parse_double(f[0], path));
        tr.phase_tags.push_back(parse_phase(f[1], path));
        tr.train_loss.push_back(parse_double(f[2], path));
        tr.test_loss.push_back(parse_double(f[3], path));
        tr.norm_w.push_back(parse_double(f[4], path));
        tr.dist_to_wdagger.push_back(parse_double(f[5], path));
        if (d > 0) {
            Vec w(static_cast<Eigen::Index>(d));
            for (std::size_t i = 0; i < d; ++i) w(static_cast<Eigen::Index>(i)) = parse_double(f[6 + i], path);
            tr.states.push_back(w);
            tr.last_state = w;
        }
    }
    return tr;
}

void write_sweep_csv(const SweepResult& r, const std::string& path) {
    auto os = open_out(path);
    os << "t2,seed,final_train_loss,final_test_loss,final_dist_to_wdagger\n";
    for (std::size_t i = 0; i < r.decay_times.size(); ++i)
        for (std::size_t j = 0; j < r.seeds.size(); ++j) {
            const auto a = static_cast<Eigen::Index>(i), b = static_cast<Eigen::Index>(j);
            os << format_double(r.decay_times[i]) << ',' << r.seeds[j] << ','
               << format_double(r.final_train_loss(a, b)) << ',' << format_double(r.final_test_loss(a, b)) << ','
               << format_double(r.final_dist_to_wdagger(a, b)) << '\n';
        }
    finish(os, path);
}

SweepResult read_sweep_csv(const std::string& path) {
    auto is = open_in(path);
    std::string line;
    if (!std::getline(is, line) || line != "t2,seed,final_train_loss,final_test_loss,final_dist_to_wdagger")
        throw IoError(path, "unexpected header");
    struct Row {
        double t2;
        std::uint64_t seed;
        double tr, te, di;
    };
    std::vector<Row> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto f = split(line);
        if (f.size() != 5) throw IoError(path, "row has wrong column count");
        rows.push_back({parse_double(f[0], path), std::stoull(f[1]), parse_double(f[2], path),
                        parse_double(f[3], path), parse_double(f[4], path)});
    }
    SweepResult r;
    if (rows.empty()) return r;
    // rows are t2-major; the seed block repeats for every decay time
    std::size_t S = 1;
    while (S < rows.size() && rows[S].seed != rows[0].seed) ++S;
    if (S == 0 || rows.size() % S != 0) throw IoError(path, "rows do not form a t2 x seed table");
    const std::size_t T = rows.size() / S;
    for (std::size_t j = 0; j < S; ++j) r.seeds.push_back(rows[j].seed);
    r.final_train_loss.resize(T, S);
    r.final_test_loss.resize(T, S);
    r.final_dist_to_wdagger.resize(T, S);
    for (std::size_t i = 0; i < T; ++i) {
        r.decay_times.push_back(rows[i * S].t2);
        for (std::size_t j = 0; j < S; ++j) {
            const Row& row = rows[i * S + j];
            const auto a = static_cast<Eigen::Index>(i), b = static_cast<Eigen::Index>(j);
            r.final_train_loss(a, b) = row.tr;
            r.final_test_loss(a, b) = row.te;
            r.final_dist_to_wdagger(a, b) = row.di;
        }
    }
    return r;
}

void write_grid_csv(const LandscapeGrid& g, const std::string& path) {
    auto os = open_out(path);
    auto vecline = [&](const char* name, const Vec& v) {
        os << "# " << name << '=';
        for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? " " : "") << format_double(v(i));
        os << '\n';
    };
    os << "# family=" << family_name(g.family) << '\n';
    os << "# gamma=" << format_double(g.gamma) << '\n';
    os << "# resolution=" << g.resolution << '\n';
    vecline("center", g.center);
    vecline("basis_u", g.basis_u);
    vecline("basis_v", g.basis_v);
    if (!g.explained_variance.empty()) {
        os << "# explained_variance=";
        for (std::size_t i = 0; i < g.explained_variance.size(); ++i)
            os << (i ? " " : "") << format_double(g.explained_variance[i]);
        os << '\n';
    }
    os << "u,v,train_loss,test_loss\n";
    for (int i = 0; i < g.resolution; ++i)
        for (int j = 0; j < g.resolution; ++j)
            os << format_double(g.u(i)) << ',' << format_double(g.v(j)) << ',' << format_double(g.train(i, j)) << ','
               << format_double(g.test(i, j)) << '\n';
    finish(os, path);
}

GridRows read_grid_csv(const std::string& path) {
    auto is = open_in(path);
    GridRows out;
    std::string line;
    bool header = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            out.metadata.push_back(line.substr(line.find_first_not_of("# ")));
            continue;
        }
        if (!header) {
            if (line != "u,v,train_loss,test_loss") throw IoError(path, "unexpected header");
            header = true;
            continue;
        }
        const auto f = split(line);
        if (f.size() != 4) throw IoError(path, "row has wrong column count");
        out.u.push_back(parse_double(f[0], path));
        out.v.push_back(parse_double(f[1], path));
        out.train.push_back(parse_double(f[2], path));
        out.test.push_back(parse_double(f[3], path));
    }
    if (!header) throw IoError(path, "missing header");
    return out;
}

void write_pca_json(const PcaResult& p, const std::string& path) {
    json j;
    j["mean"] = vec_json(p.mean);
    j["components"] = json::array();
    for (const Vec& c : p.components) j["components"].push_back(vec_json(c));
    j["explained_variance"] = p.explained_variance;
    write_json(j, path);
}

void write_report_json(const ValidationReport& r, const std::string& path) {
    json j;
    j["checks"] = json::array();
    for (const auto& e : r.entries)
        j["checks"].push_back({{"name", e.name},
                               {"measured", e.measured},
                               {"target", e.target},
                               {"tolerance", e.tolerance},
                               {"passed", e.passed},
                               {"detail", e.detail}});
    write_json(j, path);
}

ValidationReport read_report_json(const std::string& path) {
    auto is = open_in(path);
    ValidationReport r;
    try {
        json j = json::parse(is);
        for (const auto& c : j.at("checks")) {
            CheckEntry e;
            e.name = c.at("name").get<std::string>();
            e.measured = c.at("measured").is_null() ? NAN : c.at("measured").get<double>();
            e.target = c.at("target").get<double>();
            e.tolerance = c.at("tolerance").get<double>();
            e.passed = c.at("passed").get<bool>();
            e.detail = c.at("detail").get<std::string>();
            r.add(std::move(e));
        }
    } catch (const json::exception& ex) {
        throw IoError(path, ex.what());
    }
    return r;
}

void write_dataset_json(const Dataset& ds, double gamma, const std::string& path) {
    json j;
    j["d"] = ds.d();
    j["n"] = ds.n();
    j["gamma"] = gamma;
    j["X"] = json::array();
    for (int c = 0; c < ds.n(); ++c) j["X"].push_back(vec_json(ds.X.col(c)));
    j["w_star"] = vec_json(ds.w_star);
    j["alpha_star"] = vec_json(ds.alpha_star);
    j["y"] = vec_json(ds.y);
    j["noise"] = ds.noise ? vec_json(*ds.noise) : json(nullptr);
    write_json(j, path);
}

Dataset read_dataset_json(const std::string& path, double* gamma) {
    auto is = open_in(path);
    try {
        json j = json::parse(is);
        const int d = j.at("d").get<int>(), n = j.at("n").get<int>();
        Mat X(d, n);
        const auto& cols = j.at("X");
        if (static_cast<int>(cols.size()) != n) throw IoError(path, "X has wrong column count");
        for (int c = 0; c < n; ++c) {
            Vec col = json_vec(cols[c]);
            if (col.size() != d) throw IoError(path, "X column has wrong length");
            X.col(c) = col;
        }
        std::optional<Vec> noise;
        if (!j.at("noise").is_null()) noise = json_vec(j.at("noise"));
        if (gamma) *gamma = j.at("gamma").get<double>();
        return make_dataset_alpha(X, json_vec(j.at("w_star")), json_vec(j.at("alpha_star")), noise);
    } catch (const json::exception& ex) {
        throw IoError(path, ex.what());
    }
}

}  // namespace mdrift
