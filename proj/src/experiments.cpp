#include "minima_drift/experiments.hpp"

#include <cmath>

#include "minima_drift/errors.hpp"
#include "minima_drift/parallel.hpp"
#include "minima_drift/rng.hpp"

namespace mdrift {

Dataset generate_dataset(const ModelConfig& cfg, std::uint64_t seed, const WStarSpec& spec, bool label_noise) {
    cfg.validate();
    const int d = cfg.d, n = cfg.n;
    Vec w_star;
    if (spec.explicit_w) {
        if (spec.explicit_w->size() != d) throw ConfigError("dataset.w_star", "length must equal model.d");
        w_star = *spec.explicit_w;
    } else {
        auto eng = Stream(seed, "w-star").at(0);
        Gaussian g;
        w_star.resize(d);
        g.fill(eng, w_star.data(), static_cast<std::size_t>(d));
        w_star *= spec.scale / w_star.norm();
    }
    std::optional<Vec> noise;
    if (label_noise) {
        auto eng = Stream(seed, "data-noise").at(0);
        noise = Vec(n);
        for (int j = 0; j < n; ++j) (*noise)(j) = cfg.sigma * rademacher(eng);
    }
    for (std::uint64_t attempt = 0; attempt < 3; ++attempt) {
        Mat X(d, n);
        auto eng = Stream(seed, "data", attempt).at(0);
        Gaussian g;
        g.fill(eng, X.data(), static_cast<std::size_t>(d) * n);
        try {
            return make_dataset(std::move(X), w_star, cfg.gamma, noise);
        } catch (const RankError&) {
        }
    }
    throw RankError("generate_dataset: no full-rank data matrix after 3 attempts");
}

Dataset figure3_dataset() {
    Mat X(2, 1);
    X << 0.15, -0.7;
    Vec ws(2);
    ws << -1.0, 0.5;
    return make_dataset(X, ws, 2.0);
}

Vec default_w0(const Dataset& ds, double gamma, std::uint64_t seed, double factor) {
    auto eng = Stream(seed, "w0").at(0);
    Gaussian g;
    Vec w(ds.d());
    g.fill(eng, w.data(), static_cast<std::size_t>(ds.d()));
    return factor * min_norm_solution(ds, gamma).norm() * w / w.norm();
}

SweepResult decay_sweep(const ModelConfig& cfg, const Dataset& ds, const Vec& w0, const std::vector<double>& t2_values,
                        const std::vector<std::uint64_t>& seeds, const SweepOptions& opt) {
    if (t2_values.empty() || seeds.empty()) throw ContractError("decay_sweep: need decay times and seeds");
    cfg.validate();
    const int T = static_cast<int>(t2_values.size()), S = static_cast<int>(seeds.size());
    SweepResult res;
    res.decay_times = t2_values;
    res.seeds = seeds;
    res.final_train_loss.resize(T, S);
    res.final_test_loss.resize(T, S);
    res.final_dist_to_wdagger.resize(T, S);
    ThreePhaseOptions run = opt.run;
    run.keep_states = false;
    parallel_for(T * S, opt.jobs, [&](int cell) {
        const int i = cell / S, j = cell % S;
        PhaseSchedule sched;
        sched.t1 = opt.t1;
        sched.t2 = t2_values[i];
        sched.t3 = opt.t3.value_or(0.0);
        sched.t3_auto = !opt.t3.has_value();
        sched.phase2_mode = opt.phase2_mode;
        Trajectory tr = run_three_phase(w0, ds, cfg, sched, seeds[j], run);
        res.final_train_loss(i, j) = tr.train_loss.back();
        res.final_test_loss(i, j) = tr.test_loss.back();
        res.final_dist_to_wdagger(i, j) = tr.dist_to_wdagger.back();
    });
    return res;
}

PcaResult pca_trajectory(const std::vector<Vec>& states, int k) {
    if (k < 1) throw DomainError("pca_trajectory: k must be >= 1");
    if (states.size() < static_cast<std::size_t>(k) + 1) throw DomainError("pca_trajectory: need at least k+1 states");
    const Eigen::Index d = states.front().size();
    if (k > d) throw DomainError("pca_trajectory: k exceeds the dimension");
    const Eigen::Index m = static_cast<Eigen::Index>(states.size());
    Mat Y(m, d);
    for (Eigen::Index i = 0; i < m; ++i) Y.row(i) = states[i].transpose();
    PcaResult out;
    out.mean = Y.colwise().mean().transpose();
    Y.rowwise() -= out.mean.transpose();
    const double denom = static_cast<double>(m - 1);
    out.total_variance = Y.squaredNorm() / denom;

    Vec evals;
    Mat dirs;  // d x r candidate directions, ordered by decreasing variance
    if (m < d) {
        // Gram trick: eigenvectors of Y Y^T lift to Y^T u
        Eigen::SelfAdjointEigenSolver<Mat> es(Y * Y.transpose() / denom);
        evals = es.eigenvalues().reverse();
        dirs = (Y.transpose() * es.eigenvectors()).rowwise().reverse();
    } else {
        Eigen::SelfAdjointEigenSolver<Mat> es(Y.transpose() * Y / denom);
        evals = es.eigenvalues().reverse();
        dirs = es.eigenvectors().rowwise().reverse();
    }
    const double top = std::max(evals(0), 0.0);
    out.degenerate = top <= 1e-300;
    // keep directions with meaningful variance, complete the rest with Gram-Schmidt
    std::vector<Vec> basis;
    for (Eigen::Index c = 0; c < dirs.cols() && static_cast<int>(basis.size()) < k; ++c) {
        if (evals(c) <= 1e-12 * top || out.degenerate) break;
        Vec v = dirs.col(c);
        for (const Vec& b : basis) v -= b.dot(v) * b;
        const double nv = v.norm();
        if (nv <= 1e-12) break;
        basis.push_back(v / nv);
        out.explained_variance.push_back(evals(c));
    }
    for (Eigen::Index e = 0; e < d && static_cast<int>(basis.size()) < k; ++e) {
        Vec v = Vec::Unit(d, e);
        for (const Vec& b : basis) v -= b.dot(v) * b;
        const double nv = v.norm();
        if (nv <= 1e-8) continue;
        basis.push_back(v / nv);
        out.explained_variance.push_back(0.0);
    }
    out.components = std::move(basis);
    return out;
}

Family parse_family(const std::string& s) {
    if (s == "reparam") return Family::Reparam;
    if (s == "diagonal") return Family::Diagonal;
    if (s == "linear") return Family::Linear;
    throw ConfigError("landscape.family", "expected reparam, diagonal or linear; got '" + s + "'");
}

const char* family_name(Family f) {
    switch (f) {
        case Family::Reparam: return "reparam";
        case Family::Diagonal: return "diagonal";
        case Family::Linear: return "linear";
    }
    return "?";
}

namespace {

int diagonal_depth(double gamma) {
    const double L = gamma + 1.0;
    if (std::abs(L - std::round(L)) > 1e-12 || L < 1.0)
        throw DomainError("diagonal family needs integer depth gamma + 1 >= 1");
    return static_cast<int>(std::lround(L));
}

}  // namespace

Dataset family_dataset(const Dataset& base, Family f, double gamma) {
    Vec a;
    switch (f) {
        case Family::Reparam: a = alpha_of_w(base.w_star, gamma); break;
        case Family::Linear: a = base.w_star; break;
        case Family::Diagonal: a = base.w_star.array().pow(static_cast<double>(diagonal_depth(gamma))).matrix(); break;
    }
    return make_dataset_alpha(base.X, base.w_star, a, base.noise);
}

LossPair family_losses(const Vec& w, const Dataset& ds, double gamma, Family family) {
    switch (family) {
        case Family::Reparam: return {empirical_loss(w, ds, gamma), test_loss(w, ds, gamma)};
        case Family::Linear: return {empirical_loss(w, ds, 0.0), test_loss(w, ds, 0.0)};
        case Family::Diagonal: return diagonal_network_loss(w, diagonal_depth(gamma), ds);
    }
    return {0.0, 0.0};
}

double LandscapeGrid::u(int i) const {
    return resolution == 1 ? range.u_min : range.u_min + (range.u_max - range.u_min) * i / (resolution - 1);
}

double LandscapeGrid::v(int j) const {
    return resolution == 1 ? range.v_min : range.v_min + (range.v_max - range.v_min) * j / (resolution - 1);
}

LandscapeGrid landscape_grid(const Vec& center, const Vec& basis_u, const Vec& basis_v, const GridRange& range,
                             int res, const Dataset& ds, double gamma, Family family, int jobs) {
    if (res < 2) throw DomainError("landscape_grid: resolution must be >= 2");
    if (center.size() != ds.d() || basis_u.size() != ds.d() || basis_v.size() != ds.d())
        throw ContractError("landscape_grid: vector lengths must equal d");
    LandscapeGrid g;
    g.center = center;
    g.basis_u = basis_u / basis_u.norm();
    Vec v = basis_v - g.basis_u.dot(basis_v) * g.basis_u;
    if (v.norm() <= 1e-12) throw DomainError("landscape_grid: basis vectors are collinear");
    g.basis_v = v / v.norm();
    g.range = range;
    g.resolution = res;
    g.family = family;
    g.gamma = gamma;
    g.train.resize(res, res);
    g.test.resize(res, res);
    parallel_for(res, jobs, [&](int i) {
        for (int j = 0; j < res; ++j) {
            const Vec w = g.center + g.u(i) * g.basis_u + g.v(j) * g.basis_v;
            const LossPair lp = family_losses(w, ds, gamma, family);
            g.train(i, j) = lp.train;
            g.test(i, j) = lp.test;
        }
    });
    return g;
}

}  // namespace mdrift
