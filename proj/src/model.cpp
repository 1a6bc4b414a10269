#include "minima_drift/model.hpp"

#include <cmath>

#include "minima_drift/errors.hpp"
#include "minima_drift/kernels.hpp"
#include "minima_drift/manifold.hpp"

namespace mdrift {

void ModelConfig::validate() const {
    if (d <= 0) throw ConfigError("model.d", "must be a positive integer");
    if (n <= 0) throw ConfigError("model.n", "must be a positive integer");
    if (n >= d) throw ConfigError("model.n", "must be smaller than model.d (overparameterized regime)");
    if (!std::isfinite(gamma) || gamma <= -1.0) throw ConfigError("model.gamma", "must be > -1");
    if (!std::isfinite(sigma) || sigma < 0.0) throw ConfigError("model.sigma", "must be >= 0");
    if (!std::isfinite(eta_large) || eta_large <= 0.0) throw ConfigError("model.eta_large", "must be > 0");
    if (!std::isfinite(eta_small) || eta_small <= 0.0) throw ConfigError("model.eta_small", "must be > 0");
    if (eta_small >= eta_large) throw ConfigError("model.eta_small", "must be smaller than model.eta_large");
}

double norm_pow(double nrm, double gamma) {
    if (gamma == 0.0) return 1.0;
    return std::pow(nrm, gamma);
}

OrthoBasis ortho_basis(const Mat& X) {
    const Eigen::Index d = X.rows(), n = X.cols();
    if (n == 0 || n > d) throw RankError("data matrix must be d x n with 0 < n <= d");
    Eigen::JacobiSVD<Mat> svd(X);
    const auto& s = svd.singularValues();
    if (!(s(n - 1) > 1e-8 * s(0))) throw RankError("data matrix is not full column rank");
    Eigen::HouseholderQR<Mat> qr(X);
    Mat Q = qr.householderQ() * Mat::Identity(d, d);
    return {Q.leftCols(n), Q.rightCols(d - n)};
}

Dataset make_dataset_alpha(Mat X, Vec w_star, Vec alpha_star, std::optional<Vec> noise) {
    if (w_star.size() != X.rows() || alpha_star.size() != X.rows())
        throw ContractError("ground truth length does not match data dimension");
    Dataset ds;
    ds.basis = ortho_basis(X);
    ds.X = std::move(X);
    ds.w_star = std::move(w_star);
    ds.alpha_star = std::move(alpha_star);
    ds.y = ds.X.transpose() * ds.alpha_star;
    if (noise) {
        if (noise->size() != ds.X.cols()) throw ContractError("noise length does not match sample count");
        ds.y += *noise;
        ds.noise = std::move(noise);
    }
    ds.alpha_star_x = ds.project_x(ds.alpha_star);
    return ds;
}

Dataset make_dataset(Mat X, Vec w_star, double gamma, std::optional<Vec> noise) {
    Vec a = alpha_of_w(w_star, gamma);
    return make_dataset_alpha(std::move(X), std::move(w_star), std::move(a), std::move(noise));
}

Vec alpha_of_w(const Vec& w, double gamma) {
    if (!w.allFinite()) throw DomainError("alpha_of_w: non-finite input");
    const double nrm = w.norm();
    if (nrm == 0.0) {
        if (gamma < 0.0) throw SingularityError("alpha_of_w: w = 0 with gamma < 0");
        return Vec::Zero(w.size());
    }
    return norm_pow(nrm, gamma) * w;
}

Vec w_of_alpha(const Vec& alpha, double gamma) {
    if (gamma <= -1.0) throw DomainError("w_of_alpha: gamma must be > -1");
    if (!alpha.allFinite()) throw DomainError("w_of_alpha: non-finite input");
    const double nrm = alpha.norm();
    if (nrm == 0.0) return Vec::Zero(alpha.size());
    return std::pow(nrm, -gamma / (1.0 + gamma)) * alpha;
}

double empirical_loss(const Vec& w, const Dataset& ds, double gamma) {
    Vec r = ds.X.transpose() * alpha_of_w(w, gamma) - ds.y;
    return 0.5 * r.squaredNorm() / ds.n();
}

double population_loss(const Vec& w, const Vec& w_star, double gamma) {
    return 0.5 * (alpha_of_w(w, gamma) - alpha_of_w(w_star, gamma)).squaredNorm();
}

double test_loss(const Vec& w, const Dataset& ds, double gamma) {
    return 0.5 * (alpha_of_w(w, gamma) - ds.alpha_star).squaredNorm();
}

namespace {

void check_nonzero(double nrm, double gamma, const char* who) {
    if (nrm == 0.0 && gamma != 0.0) throw SingularityError(std::string(who) + ": w = 0");
}

}  // namespace

Mat a_matrix(const Vec& w, double gamma) {
    const Eigen::Index d = w.size();
    if (gamma == 0.0) return Mat::Identity(d, d);
    const double nrm = w.norm();
    if (nrm == 0.0) {
        if (gamma > 0.0) return Mat::Zero(d, d);
        throw SingularityError("a_matrix: w = 0 with gamma < 0");
    }
    Vec wb = w / nrm;
    return norm_pow(nrm, gamma) * (Mat::Identity(d, d) + gamma * wb * wb.transpose());
}

Mat a_matrix_inverse(const Vec& w, double gamma) {
    const Eigen::Index d = w.size();
    if (gamma == 0.0) return Mat::Identity(d, d);
    if (gamma <= -1.0) throw DomainError("a_matrix_inverse: gamma must be > -1");
    const double nrm = w.norm();
    check_nonzero(nrm, gamma, "a_matrix_inverse");
    Vec wb = w / nrm;
    return norm_pow(nrm, -gamma) * (Mat::Identity(d, d) - (gamma / (1.0 + gamma)) * wb * wb.transpose());
}

Mat apply_a(const Vec& w, double gamma, const Mat& V) {
    if (gamma == 0.0) return V;
    const double nrm = w.norm();
    if (nrm == 0.0) return a_matrix(w, gamma) * V;
    Vec wb = w / nrm;
    return norm_pow(nrm, gamma) * (V + gamma * wb * (wb.transpose() * V));
}

Mat apply_a_inverse(const Vec& w, double gamma, const Mat& V) {
    if (gamma == 0.0) return V;
    const double nrm = w.norm();
    check_nonzero(nrm, gamma, "apply_a_inverse");
    Vec wb = w / nrm;
    return norm_pow(nrm, -gamma) * (V - (gamma / (1.0 + gamma)) * wb * (wb.transpose() * V));
}

GradEval::GradEval(const Dataset& ds, double gamma)
    : ds_(ds), gamma_(gamma), x_fro2_(ds.X.squaredNorm()), alpha_(ds.d()), r_(ds.n()), g_(ds.d()) {}

double GradEval::stiffness() const {
    const double n = static_cast<double>(ds_.n());
    if (nrm_ == 0.0) return scale_ * scale_ * x_fro2_ / n;
    // ||X^T wb||^2 = ||X^T alpha||^2 / (s ||w||)^2
    const double xtw2 = xta2_ / (scale_ * scale_ * nrm_ * nrm_);
    return scale_ * scale_ * (x_fro2_ + (gamma_ * gamma_ + 2.0 * gamma_) * xtw2) / n;
}

double GradEval::operator()(const double* w, double* out, const double* label_shift) {
    const std::size_t d = ds_.d(), n = ds_.n();
    const double nrm2 = kern::dot(w, w, d);
    const double nrm = std::sqrt(nrm2);
    if (nrm == 0.0 && gamma_ < 0.0) throw SingularityError("gradient: w = 0 with gamma < 0");
    const double s = nrm == 0.0 ? (gamma_ == 0.0 ? 1.0 : 0.0) : norm_pow(nrm, gamma_);
    for (std::size_t i = 0; i < d; ++i) alpha_[i] = s * w[i];
    kern::gemv_t(ds_.X.data(), d, n, alpha_.data(), r_.data());
    nrm_ = nrm;
    scale_ = s;
    xta2_ = 0.0;
    for (std::size_t j = 0; j < n; ++j) xta2_ += r_[j] * r_[j];
    const double* y = ds_.y.data();
    double loss = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        r_[j] -= y[j];
        if (label_shift != nullptr) r_[j] -= label_shift[j];
        loss += r_[j] * r_[j];
    }
    kern::gemv(ds_.X.data(), d, n, r_.data(), g_.data());
    // A(w) g / n with A = s (I + gamma wb wb^T)
    const double inv_n = 1.0 / static_cast<double>(n);
    double coef = 0.0;
    if (gamma_ != 0.0 && nrm > 0.0) coef = gamma_ * kern::dot(w, g_.data(), d) / nrm2;
    for (std::size_t i = 0; i < d; ++i) out[i] = s * inv_n * (g_[i] + coef * w[i]);
    return 0.5 * loss * inv_n;
}

Vec grad_empirical(const Vec& w, const Dataset& ds, double gamma) {
    if (w.size() != ds.d()) throw ContractError("grad_empirical: dimension mismatch");
    GradEval ge(ds, gamma);
    Vec out(ds.d());
    ge(w.data(), out.data());
    return out;
}

Mat hessian_on_manifold(const Vec& w_m, const Dataset& ds, double gamma) {
    if (!is_on_manifold(w_m, ds, gamma, 1e-6))
        throw ContractError("hessian_on_manifold: point is off the minima manifold");
    Mat AX = apply_a(w_m, gamma, ds.X);
    return AX * AX.transpose() / ds.n();
}

LossPair diagonal_network_loss(const Vec& w, int L, const Dataset& ds) {
    if (L < 1) throw DomainError("diagonal_network_loss: depth must be >= 1");
    Vec a = w.array().pow(static_cast<double>(L)).matrix();
    if (L == 1) a = w;
    Vec r = ds.X.transpose() * a - ds.y;
    return {0.5 * r.squaredNorm() / ds.n(), 0.5 * (a - ds.alpha_star).squaredNorm()};
}

}  // namespace mdrift
