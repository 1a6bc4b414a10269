#pragma once

#include "minima_drift/model.hpp"

namespace mdrift {

// Point of the zero-loss set written as w_m = lambda alpha*_X + c_perp r_bar.
struct ManifoldPoint {
    Vec w_m;
    double lambda = 0.0;  // ||w_m||^-gamma
    double c_perp = 0.0;  // ||P_perp w_m||
    Vec r_bar;            // unit, in X-perp
};

// Validates membership and representation consistency (1e-8).
ManifoldPoint make_manifold_point(const Vec& w_m, const Dataset& ds, double gamma);

Mat projector(const Mat& Y);

// ||X^T(alpha - alpha*)|| / (1 + ||X^T alpha*||)
double manifold_residual(const Vec& w, const Dataset& ds, double gamma);
bool is_on_manifold(const Vec& w, const Dataset& ds, double gamma, double tol);

struct TangentNormal {
    Mat tangent;  // A^-1 X_perp, d x (d-n)
    Mat normal;   // A X, d x n
};
TangentNormal tangent_normal_bases(const ManifoldPoint& mp, const Dataset& ds, double gamma);

// Orthogonal projection onto the tangent space at w_m (v minus its span(A X) part).
Vec tangent_project(const Vec& v, const Vec& w_m, const Dataset& ds, double gamma);
Vec normal_project(const Vec& v, const Vec& w_m, const Dataset& ds, double gamma);

struct Decomposition {
    Vec d_par;   // tangent part
    Vec d_perp;  // normal part
};
Decomposition decompose(const Vec& w, const ManifoldPoint& mp, const Dataset& ds, double gamma);

// upper end of the lambda range, ||alpha*_X||^{-gamma/(1+gamma)}
double lambda_max(const Dataset& ds, double gamma);
ManifoldPoint manifold_point_from_lambda(double lambda, const Vec& r_bar, const Dataset& ds, double gamma);

Vec min_norm_solution(const Dataset& ds, double gamma);

double c_coefficient(const Vec& w, const Dataset& ds, double gamma);
inline double c_coefficient(const ManifoldPoint& mp, const Dataset& ds, double gamma) {
    return c_coefficient(mp.w_m, ds, gamma);
}

// Keeps P_perp w and rescales the col(X) part onto alpha*_X.
ManifoldPoint retract(const Vec& w, const Dataset& ds, double gamma);

}  // namespace mdrift
