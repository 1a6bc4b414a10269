#include <doctest.h>

#include <cmath>

#include "minima_drift/errors.hpp"
#include "minima_drift/experiments.hpp"
#include "minima_drift/rng.hpp"
#include "minima_drift/validation.hpp"

using namespace mdrift;

namespace {

Dataset random_ds(int d, int n, double gamma, std::uint64_t seed) {
    ModelConfig c;
    c.d = d;
    c.n = n;
    c.gamma = gamma;
    return generate_dataset(c, seed, {});
}

Vec gaussian(int d, std::uint64_t seed) {
    auto eng = Stream(seed, "manifold-test").at(0);
    Gaussian g;
    Vec v(d);
    g.fill(eng, v.data(), static_cast<std::size_t>(d));
    return v;
}

Vec fig3_rbar() {
    Vec r(2);
    r << 0.7, 0.15;
    return r.normalized();
}

}  // namespace

TEST_CASE("figure-3 minimum-norm solution") {
    const Dataset ds = figure3_dataset();
    const Vec wd = min_norm_solution(ds, 2.0);
    CHECK(wd(0) == doctest::Approx(-0.200257451517015658).epsilon(1e-13));
    CHECK(wd(1) == doctest::Approx(0.934534773746073069).epsilon(1e-13));
    CHECK(wd.norm() == doctest::Approx(0.955750119136123288).epsilon(1e-13));
    CHECK(is_on_manifold(wd, ds, 2.0, 1e-12));
    CHECK(lambda_max(ds, 2.0) == doctest::Approx(std::pow(0.955750119136123288, -2.0)).epsilon(1e-13));
}

TEST_CASE("figure-3 manifold point at lambda = 0.3") {
    const Dataset ds = figure3_dataset();
    const ManifoldPoint mp = manifold_point_from_lambda(0.3, fig3_rbar(), ds, 2.0);
    CHECK(mp.w_m(0) == doctest::Approx(1.71187204933215785).epsilon(1e-13));
    CHECK(mp.w_m(1) == doctest::Approx(0.634686867714033824).epsilon(1e-13));
    CHECK(mp.w_m.norm() == doctest::Approx(1.82574185835055371).epsilon(1e-13));
    CHECK(mp.c_perp == doctest::Approx(1.80685798345020010).epsilon(1e-13));
    CHECK(c_coefficient(mp, ds, 2.0) == doctest::Approx(0.4703125).epsilon(1e-13));
    CHECK(is_on_manifold(mp.w_m, ds, 2.0, 1e-12));
}

TEST_CASE("C coefficient closed forms on figure-3 data") {
    const Dataset ds = figure3_dataset();
    // along X: (0.5125 - 4 * 0.5125) / 1; orthogonal to X: 0.5125
    CHECK(c_coefficient(Vec(ds.X.col(0)), ds, 2.0) == doctest::Approx(-1.5375).epsilon(1e-14));
    CHECK(c_coefficient(fig3_rbar(), ds, 2.0) == doctest::Approx(0.5125).epsilon(1e-14));
    CHECK(c_coefficient(min_norm_solution(ds, 2.0), ds, 2.0) == doctest::Approx(-1.5375).epsilon(1e-12));
}

TEST_CASE("retraction lands on M and is a projection") {
    for (double gamma : {0.0, 0.5, 1.0, 2.0, 5.0}) {
        const Dataset ds = random_ds(8, 3, gamma, 21);
        for (std::uint64_t s = 0; s < 5; ++s) {
            const Vec w = gaussian(8, s) * (0.1 + s);
            const ManifoldPoint mp = retract(w, ds, gamma);
            CHECK(manifold_residual(mp.w_m, ds, gamma) < 1e-13 * ds.X.norm() * (1 + std::pow(mp.w_m.norm(), gamma + 1)));
            CHECK((ds.project_perp(mp.w_m) - ds.project_perp(w)).norm() < 1e-12 * (1 + w.norm()));
            const ManifoldPoint again = retract(mp.w_m, ds, gamma);
            CHECK((again.w_m - mp.w_m).norm() < 1e-12 * mp.w_m.norm());
        }
        // no X-perp component: the retraction is w_dagger
        const ManifoldPoint at = retract(ds.project_x(gaussian(8, 99)), ds, gamma);
        CHECK((at.w_m - min_norm_solution(ds, gamma)).norm() < 1e-12);
    }
}

TEST_CASE("retraction survives a vanishing X-perp component") {
    const Dataset ds = figure3_dataset();
    const Vec wd = min_norm_solution(ds, 2.0);
    for (double eps : {1e-6, 1e-9, 1e-12, 1e-15, 1e-18}) {
        const ManifoldPoint mp = retract(wd + eps * fig3_rbar(), ds, 2.0);
        CHECK((mp.w_m - wd).norm() < 1e-12 + 2 * eps);
    }
}

TEST_CASE("make_manifold_point validation") {
    const Dataset ds = random_ds(6, 2, 2.0, 4);
    const ManifoldPoint mp = retract(gaussian(6, 1), ds, 2.0);
    const ManifoldPoint again = make_manifold_point(mp.w_m, ds, 2.0);
    CHECK(again.lambda == doctest::Approx(std::pow(mp.w_m.norm(), -2.0)));
    CHECK(again.r_bar.norm() == doctest::Approx(1.0));
    CHECK_THROWS(make_manifold_point(mp.w_m * 1.1, ds, 2.0));
    CHECK_THROWS_AS(make_manifold_point(mp.w_m, ds, -0.5), DomainError);
}

TEST_CASE("tangent and normal spaces") {
    const Dataset ds = random_ds(10, 4, 2.0, 6);
    const ManifoldPoint mp = retract(gaussian(10, 2), ds, 2.0);
    const TangentNormal tn = tangent_normal_bases(mp, ds, 2.0);
    CHECK(tn.tangent.cols() == 6);
    CHECK(tn.normal.cols() == 4);
    CHECK((tn.tangent.transpose() * tn.normal).norm() < 1e-12 * tn.normal.norm());
    // the tangent space is the null space of the constraint Jacobian X^T A
    const Mat J = ds.X.transpose() * a_matrix(mp.w_m, 2.0);
    CHECK((J * tn.tangent).norm() < 1e-12 * J.norm() * tn.tangent.norm());
    const Vec v = gaussian(10, 3);
    const Decomposition dc = decompose(mp.w_m + v, mp, ds, 2.0);
    CHECK((dc.d_par + dc.d_perp - v).norm() < 1e-12);
    CHECK((tangent_project(v, mp.w_m, ds, 2.0) - dc.d_par).norm() < 1e-12);
    const Mat P = projector(tn.normal);
    CHECK((P * P - P).norm() < 1e-12);
    CHECK_THROWS_AS(projector(Mat::Zero(10, 2)), RankError);
}

TEST_CASE("minimum-norm solution is the constrained minimizer") {
    for (double gamma : {0.0, 0.5, 1.0, 2.0, 5.0}) {
        const Dataset ds = random_ds(12, 4, gamma, 31);
        const Vec wd = min_norm_solution(ds, gamma);
        CHECK(kkt_residual(ds, gamma) < 1e-10);
        // every other manifold point is longer
        for (std::uint64_t s = 0; s < 10; ++s) {
            const Vec w = retract(gaussian(12, 40 + s), ds, gamma).w_m;
            CHECK(w.norm() >= wd.norm() - 1e-12);
        }
    }
    Mat X = Mat::Zero(3, 1);
    X(0, 0) = 1.0;
    Vec ws = Vec::Zero(3);
    ws(1) = 1.0;
    CHECK_THROWS_AS(min_norm_solution(make_dataset(X, ws, 2.0), 2.0), DegenerateDataError);
}

TEST_CASE("lambda parametrization bounds") {
    const Dataset ds = figure3_dataset();
    const double lmax = lambda_max(ds, 2.0);
    const ManifoldPoint top = manifold_point_from_lambda(lmax, fig3_rbar(), ds, 2.0);
    CHECK((top.w_m - min_norm_solution(ds, 2.0)).norm() < 1e-7);
    CHECK_THROWS_AS(manifold_point_from_lambda(1.01 * lmax, fig3_rbar(), ds, 2.0), DomainError);
    CHECK_THROWS_AS(manifold_point_from_lambda(0.3, Vec(ds.X.col(0)), ds, 2.0), DomainError);
}
