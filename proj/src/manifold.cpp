#include "minima_drift/manifold.hpp"

#include <algorithm>
#include <cmath>

#include "minima_drift/errors.hpp"

namespace mdrift {

Mat projector(const Mat& Y) {
    Eigen::JacobiSVD<Mat> svd(Y);
    const auto& s = svd.singularValues();
    if (Y.cols() == 0 || Y.cols() > Y.rows() || !(s(Y.cols() - 1) > 1e-8 * s(0)))
        throw RankError("projector: matrix is not full column rank");
    Mat G = Y.transpose() * Y;
    return Y * G.ldlt().solve(Y.transpose());
}

double manifold_residual(const Vec& w, const Dataset& ds, double gamma) {
    Vec r = ds.X.transpose() * (alpha_of_w(w, gamma) - ds.alpha_star);
    return r.norm() / (1.0 + (ds.X.transpose() * ds.alpha_star).norm());
}

bool is_on_manifold(const Vec& w, const Dataset& ds, double gamma, double tol) {
    if (!(tol > 0.0)) throw DomainError("is_on_manifold: tol must be > 0");
    return manifold_residual(w, ds, gamma) <= tol;
}

ManifoldPoint make_manifold_point(const Vec& w_m, const Dataset& ds, double gamma) {
    if (gamma < 0.0) throw DomainError("manifold points are restricted to gamma >= 0");
    if (!is_on_manifold(w_m, ds, gamma, 1e-8)) throw ContractError("point is not on the minima manifold");
    ManifoldPoint mp;
    mp.w_m = w_m;
    mp.lambda = norm_pow(w_m.norm(), -gamma);
    Vec perp = ds.project_perp(w_m);
    mp.c_perp = perp.norm();
    mp.r_bar = mp.c_perp > 0.0 ? Vec(perp / mp.c_perp) : Vec(ds.basis.q_perp.col(0));
    Vec rebuilt = mp.lambda * ds.alpha_star_x + mp.c_perp * mp.r_bar;
    if ((rebuilt - w_m).norm() > 1e-8 * (1.0 + w_m.norm()))
        throw ContractError("manifold point representation is inconsistent");
    return mp;
}

namespace {

Mat normal_matrix(const Vec& w_m, const Dataset& ds, double gamma) { return apply_a(w_m, gamma, ds.X); }

}  // namespace

TangentNormal tangent_normal_bases(const ManifoldPoint& mp, const Dataset& ds, double gamma) {
    return {apply_a_inverse(mp.w_m, gamma, ds.basis.q_perp), normal_matrix(mp.w_m, ds, gamma)};
}

Vec normal_project(const Vec& v, const Vec& w_m, const Dataset& ds, double gamma) {
    Mat N = normal_matrix(w_m, ds, gamma);
    Mat G = N.transpose() * N;
    return N * G.ldlt().solve(N.transpose() * v);
}

Vec tangent_project(const Vec& v, const Vec& w_m, const Dataset& ds, double gamma) {
    return v - normal_project(v, w_m, ds, gamma);
}

Decomposition decompose(const Vec& w, const ManifoldPoint& mp, const Dataset& ds, double gamma) {
    Vec diff = w - mp.w_m;
    Vec perp = normal_project(diff, mp.w_m, ds, gamma);
    return {diff - perp, perp};
}

double lambda_max(const Dataset& ds, double gamma) {
    const double a = ds.alpha_star_x.norm();
    if (a == 0.0) throw DegenerateDataError("alpha* has no component in col(X)");
    return std::pow(a, -gamma / (1.0 + gamma));
}

ManifoldPoint manifold_point_from_lambda(double lambda, const Vec& r_bar, const Dataset& ds, double gamma) {
    if (!(gamma > 0.0)) throw DomainError("lambda parametrization needs gamma > 0");
    const double lmax = lambda_max(ds, gamma);
    if (!(lambda > 0.0) || lambda > lmax * (1.0 + 1e-14))
        throw DomainError("lambda outside (0, ||alpha*_X||^{-gamma/(1+gamma)}]");
    if (std::abs(r_bar.norm() - 1.0) > 1e-10 || ds.project_x(r_bar).norm() > 1e-10)
        throw DomainError("r_bar must be a unit vector in X-perp");
    const double a = ds.alpha_star_x.norm();
    const double c2 = std::pow(lambda, -2.0 / gamma) - lambda * lambda * a * a;
    const double c = c2 > 0.0 ? std::sqrt(c2) : 0.0;
    ManifoldPoint mp;
    mp.w_m = lambda * ds.alpha_star_x + c * r_bar;
    mp.lambda = lambda;
    mp.c_perp = c;
    mp.r_bar = r_bar;
    if (!is_on_manifold(mp.w_m, ds, gamma, 1e-8)) throw ContractError("lambda point failed membership");
    return mp;
}

Vec min_norm_solution(const Dataset& ds, double gamma) {
    if (ds.alpha_star_x.norm() == 0.0) throw DegenerateDataError("alpha* has no component in col(X)");
    return w_of_alpha(ds.alpha_star_x, gamma);
}

double c_coefficient(const Vec& w, const Dataset& ds, double gamma) {
    const double nrm = w.norm();
    if (nrm == 0.0) throw DomainError("c_coefficient: w = 0");
    Vec xw = ds.X.transpose() * (w / nrm);
    return (ds.X.squaredNorm() - (gamma + 2.0) * xw.squaredNorm()) / ds.n();
}

ManifoldPoint retract(const Vec& w, const Dataset& ds, double gamma) {
    if (gamma < 0.0) throw DomainError("retract: gamma < 0 is not supported");
    if (!w.allFinite()) throw RetractionError("retract: non-finite input");
    const double a = ds.alpha_star_x.norm();
    if (a == 0.0) throw RetractionError("retract: alpha* has no component in col(X)");
    Vec perp = ds.project_perp(w);
    const double c = perp.norm();
    Vec w_m;
    if (gamma == 0.0) {
        w_m = ds.alpha_star_x + perp;
    } else {
        // s = ||w_m|| solves s^2 = c^2 + a^2 s^{-2 gamma}; f is increasing in s
        const double s_dag = std::pow(a, 1.0 / (1.0 + gamma));
        auto f = [&](double s) { return s * s - c * c - a * a * std::pow(s, -2.0 * gamma); };
        double lo = std::max(c, s_dag);
        double hi = std::sqrt(c * c + s_dag * s_dag);
        // f(lo) <= 0 <= f(hi) holds exactly; a sign flip here is rounding at a collapsed bracket (c -> 0)
        const double f_lo = f(lo), f_hi = f(hi);
        double s = 0.5 * (lo + hi);
        if (f_lo >= 0.0) s = lo, hi = lo;
        else if (f_hi <= 0.0) s = hi, lo = hi;
        // Newton inside the bracket, bisection when a step leaves it
        for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
            const double fs = f(s);
            if (fs == 0.0) {
                lo = hi = s;
                break;
            }
            (fs > 0.0 ? hi : lo) = s;
            const double df = 2.0 * s + 2.0 * gamma * a * a * std::pow(s, -2.0 * gamma - 1.0);
            double next = s - fs / df;
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            if (std::abs(next - s) <= 1e-16 * s) {
                s = next;
                break;
            }
            s = next;
        }
        w_m = std::pow(s, -gamma) * ds.alpha_star_x + perp;
    }
    if (!is_on_manifold(w_m, ds, gamma, 1e-8)) throw RetractionError("retract: result failed membership");
    ManifoldPoint mp;
    mp.w_m = std::move(w_m);
    mp.lambda = norm_pow(mp.w_m.norm(), -gamma);
    mp.c_perp = c;
    mp.r_bar = c > 0.0 ? Vec(perp / c) : Vec(ds.basis.q_perp.col(0));
    return mp;
}

}  // namespace mdrift
