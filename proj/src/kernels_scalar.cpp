#include "minima_drift/kernels.hpp"

namespace mdrift::kern {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t len) {
    double s = 0.0;
    for (std::size_t i = 0; i < len; ++i) s += a[i] * b[i];
    return s;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t len) {
    for (std::size_t i = 0; i < len; ++i) y[i] += a * x[i];
}

void gemv_t_scalar(const double* X, std::size_t d, std::size_t n, const double* v, double* out) {
    for (std::size_t j = 0; j < n; ++j) out[j] = dot_scalar(X + j * d, v, d);
}

void gemv_scalar(const double* X, std::size_t d, std::size_t n, const double* r, double* out) {
    for (std::size_t i = 0; i < d; ++i) out[i] = 0.0;
    for (std::size_t j = 0; j < n; ++j) axpy_scalar(r[j], X + j * d, out, d);
}

}  // namespace

const Table& scalar_table() {
    static const Table t{"scalar", dot_scalar, axpy_scalar, gemv_t_scalar, gemv_scalar};
    return t;
}

}  // namespace mdrift::kern
