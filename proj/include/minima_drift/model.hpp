#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace mdrift {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct ModelConfig {
    int d = 30;
    int n = 8;
    double gamma = 2.0;
    double sigma = 0.1;
    double eta_large = 0.05;
    double eta_small = 0.005;

    // throws ConfigError naming the offending field
    void validate() const;
};

// Orthonormal bases of col(X) and its complement.
struct OrthoBasis {
    Mat q_x;     // d x n
    Mat q_perp;  // d x (d-n)
};

OrthoBasis ortho_basis(const Mat& X);

struct Dataset {
    Mat X;  // d x n, one sample per column
    Vec w_star;
    Vec alpha_star;
    Vec y;
    std::optional<Vec> noise;

    OrthoBasis basis;
    Vec alpha_star_x;  // P_X alpha*

    int d() const { return static_cast<int>(X.rows()); }
    int n() const { return static_cast<int>(X.cols()); }
    Vec project_x(const Vec& v) const { return basis.q_x * (basis.q_x.transpose() * v); }
    Vec project_perp(const Vec& v) const { return v - project_x(v); }
};

// alpha* = ||w*||^gamma w*
Dataset make_dataset(Mat X, Vec w_star, double gamma, std::optional<Vec> noise = std::nullopt);
// Explicit alpha* for the baseline families (diagonal, linear).
Dataset make_dataset_alpha(Mat X, Vec w_star, Vec alpha_star, std::optional<Vec> noise = std::nullopt);

Vec alpha_of_w(const Vec& w, double gamma);
Vec w_of_alpha(const Vec& alpha, double gamma);

double empirical_loss(const Vec& w, const Dataset& ds, double gamma);
double population_loss(const Vec& w, const Vec& w_star, double gamma);
// 1/2 ||alpha - alpha*|| against the dataset's stored alpha*
double test_loss(const Vec& w, const Dataset& ds, double gamma);

Mat a_matrix(const Vec& w, double gamma);
Mat a_matrix_inverse(const Vec& w, double gamma);
Mat apply_a(const Vec& w, double gamma, const Mat& V);
Mat apply_a_inverse(const Vec& w, double gamma, const Mat& V);

Vec grad_empirical(const Vec& w, const Dataset& ds, double gamma);

// Gradient of (1/2n)||X^T alpha - (y + shift)||^2 into a caller-owned buffer.
// Hot path for every integrator; no allocation after construction.
class GradEval {
public:
    GradEval(const Dataset& ds, double gamma);
    // returns the training loss at w as a by-product
    double operator()(const double* w, double* out, const double* label_shift = nullptr);
    const Dataset& data() const { return ds_; }
    double gamma() const { return gamma_; }
    // (1/n)||A(w) X||_F^2 at the last evaluated w, an upper bound on the
    // largest curvature of the Gauss-Newton part
    double stiffness() const;

private:
    const Dataset& ds_;
    double gamma_;
    double x_fro2_;
    double nrm_ = 0.0, scale_ = 0.0, xta2_ = 0.0;
    std::vector<double> alpha_, r_, g_;
};

Mat hessian_on_manifold(const Vec& w_m, const Dataset& ds, double gamma);

struct LossPair {
    double train;
    double test;
};

// entrywise-power baseline alpha' = w^L
LossPair diagonal_network_loss(const Vec& w, int L, const Dataset& ds);

double norm_pow(double nrm, double gamma);  // nrm^gamma with 0^0 = 1

}  // namespace mdrift
