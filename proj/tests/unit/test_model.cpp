#include <doctest.h>

#include <cmath>

#include "minima_drift/errors.hpp"
#include "minima_drift/experiments.hpp"
#include "minima_drift/rng.hpp"

using namespace mdrift;

namespace {

Vec vec2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

Dataset random_ds(int d, int n, double gamma, std::uint64_t seed) {
    ModelConfig c;
    c.d = d;
    c.n = n;
    c.gamma = gamma;
    return generate_dataset(c, seed, {});
}

}  // namespace

// frozen values below come from a 30-digit mpmath evaluation of the closed forms
TEST_CASE("figure-3 data: labels and target") {
    const Dataset ds = figure3_dataset();
    CHECK(ds.alpha_star(0) == doctest::Approx(-1.25).epsilon(1e-15));
    CHECK(ds.alpha_star(1) == doctest::Approx(0.625).epsilon(1e-15));
    CHECK(ds.y(0) == doctest::Approx(-0.625).epsilon(1e-15));
    CHECK(ds.alpha_star_x(0) == doctest::Approx(-0.182926829268292683).epsilon(1e-14));
    CHECK(ds.alpha_star_x(1) == doctest::Approx(0.853658536585365854).epsilon(1e-14));
    CHECK(ds.alpha_star_x.norm() == doctest::Approx(0.873037869711972753).epsilon(1e-14));
}

TEST_CASE("alpha map and inverse") {
    const Vec w = vec2(3.0, 4.0);
    const Vec a = alpha_of_w(w, 2.0);
    CHECK(a(0) == doctest::Approx(75.0));
    CHECK(a(1) == doctest::Approx(100.0));
    const Vec back = w_of_alpha(a, 2.0);
    CHECK((back - w).norm() < 1e-13);
    CHECK(alpha_of_w(w, 0.0) == w);
    CHECK(alpha_of_w(Vec::Zero(2), 2.0).norm() == 0.0);
    CHECK(w_of_alpha(Vec::Zero(2), 2.0).norm() == 0.0);
    CHECK_THROWS_AS(alpha_of_w(Vec::Zero(2), -0.5), SingularityError);
    CHECK_THROWS_AS(w_of_alpha(w, -1.0), DomainError);
}

TEST_CASE("A matrix and its Sherman-Morrison inverse") {
    for (double gamma : {0.0, 0.5, 1.0, 2.0, 5.0}) {
        auto eng = Stream(1, "sm", static_cast<std::uint64_t>(gamma * 10)).at(0);
        Gaussian g;
        Vec w(7);
        g.fill(eng, w.data(), 7);
        const Mat A = a_matrix(w, gamma);
        const Mat Ai = a_matrix_inverse(w, gamma);
        CHECK((A * Ai - Mat::Identity(7, 7)).norm() < 1e-12);
        // direct formula: ||w||^gamma (I + gamma wbar wbar^T)
        const Vec wb = w / w.norm();
        const Mat ref = std::pow(w.norm(), gamma) * (Mat::Identity(7, 7) + gamma * wb * wb.transpose());
        CHECK((A - ref).norm() < 1e-12 * ref.norm());
        const Mat V = Mat::Random(7, 3);
        CHECK((apply_a(w, gamma, V) - A * V).norm() < 1e-12 * (A * V).norm());
        CHECK((apply_a_inverse(w, gamma, V) - Ai * V).norm() < 1e-12 * (Ai * V).norm());
    }
    CHECK(a_matrix(Vec::Zero(3), 2.0).norm() == 0.0);
    CHECK_THROWS_AS(a_matrix(Vec::Zero(3), -0.5), SingularityError);
}

TEST_CASE("gradient against central differences") {
    for (double gamma : {0.0, 0.5, 2.0, 5.0}) {
        const Dataset ds = random_ds(9, 4, gamma, 17);
        auto eng = Stream(2, "grad").at(static_cast<std::uint64_t>(gamma * 10));
        Gaussian g;
        Vec w(9);
        g.fill(eng, w.data(), 9);
        const Vec grad = grad_empirical(w, ds, gamma);
        Vec fd(9);
        for (int k = 0; k < 9; ++k) {
            const double h = 1e-5;
            Vec p = w, m = w;
            p(k) += h;
            m(k) -= h;
            fd(k) = (empirical_loss(p, ds, gamma) - empirical_loss(m, ds, gamma)) / (2 * h);
        }
        CHECK((grad - fd).norm() / grad.norm() < 1e-7);
    }
}

TEST_CASE("hot-path gradient matches the reference gradient") {
    const Dataset ds = random_ds(12, 5, 2.0, 4);
    GradEval ge(ds, 2.0);
    auto eng = Stream(3, "ge").at(0);
    Gaussian g;
    Vec w(12), out(12), shift(5);
    g.fill(eng, w.data(), 12);
    g.fill(eng, shift.data(), 5);
    auto dense = [&](const Vec& y) {
        return Vec(a_matrix(w, 2.0) * ds.X * (ds.X.transpose() * alpha_of_w(w, 2.0) - y) / 5.0);
    };
    const double loss = ge(w.data(), out.data());
    CHECK(loss == doctest::Approx(empirical_loss(w, ds, 2.0)).epsilon(1e-13));
    CHECK((out - dense(ds.y)).norm() < 1e-12 * out.norm());
    CHECK(ge.stiffness() == doctest::Approx(apply_a(w, 2.0, ds.X).squaredNorm() / 5).epsilon(1e-12));
    ge(w.data(), out.data(), shift.data());
    CHECK((out - dense(ds.y + shift)).norm() < 1e-12 * out.norm());
}

TEST_CASE("losses") {
    const Dataset ds = figure3_dataset();
    const Vec ws = ds.w_star;
    CHECK(empirical_loss(ws, ds, 2.0) < 1e-28);
    CHECK(test_loss(ws, ds, 2.0) < 1e-30);
    CHECK(population_loss(ws, ws, 2.0) == 0.0);
    // zero vector: loss = y^2 / 2
    CHECK(empirical_loss(Vec::Zero(2), ds, 2.0) == doctest::Approx(0.5 * 0.390625));
    const LossPair lin = diagonal_network_loss(ws, 1, make_dataset(ds.X, ws, 0.0));
    CHECK(lin.train == doctest::Approx(0.0));
    const Vec w = vec2(0.3, -0.2);
    CHECK(diagonal_network_loss(w, 3, ds).test ==
          doctest::Approx(0.5 * (Vec(w.array().cube().matrix()) - ds.alpha_star).squaredNorm()));
}

TEST_CASE("hessian on the manifold is (1/n) A X X^T A") {
    const Dataset ds = random_ds(6, 2, 2.0, 8);
    const Vec wd = min_norm_solution(ds, 2.0);
    const Mat H = hessian_on_manifold(wd, ds, 2.0);
    CHECK((H - H.transpose()).norm() < 1e-14);
    Eigen::SelfAdjointEigenSolver<Mat> es(H);
    int positive = 0;
    for (int i = 0; i < 6; ++i) positive += es.eigenvalues()(i) > 1e-10;
    CHECK(positive == 2);
    CHECK_THROWS_AS(hessian_on_manifold(Vec::Ones(6) * 10, ds, 2.0), ContractError);
}

TEST_CASE("model config validation reports key paths") {
    ModelConfig c;
    c.n = 40;
    try {
        c.validate();
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.key_path == "model.n");
    }
    c = ModelConfig{};
    c.eta_small = 0.1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("dataset generation") {
    ModelConfig c;
    c.d = 50;
    c.n = 40;
    const Dataset a = generate_dataset(c, 5, {});
    const Dataset b = generate_dataset(c, 5, {});
    CHECK(a.X == b.X);
    CHECK(a.y == b.y);
    CHECK(a.w_star.norm() == doctest::Approx(1.0));
    // mean ||x_i||^2 = d, variance 2d per column
    c.n = 49;
    double sum = 0;
    int cols = 0;
    for (std::uint64_t s = 0; s < 21; ++s) {
        const Dataset ds = generate_dataset(c, 100 + s, {});
        sum += ds.X.colwise().squaredNorm().sum();
        cols += ds.n();
    }
    CHECK(std::abs(sum / cols - 50.0) < 3.0 * std::sqrt(100.0 / cols));
    WStarSpec spec;
    spec.explicit_w = Vec::Ones(50);
    CHECK(generate_dataset(c, 1, spec).w_star == Vec::Ones(50));
    c.sigma = 0.3;
    const Dataset noisy = generate_dataset(c, 1, {}, true);
    REQUIRE(noisy.noise.has_value());
    CHECK(noisy.noise->cwiseAbs().minCoeff() == doctest::Approx(0.3));
    CHECK(((noisy.X.transpose() * noisy.alpha_star + *noisy.noise) - noisy.y).norm() < 1e-12);
}
