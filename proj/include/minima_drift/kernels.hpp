#pragma once

#include <cstddef>
#include <string_view>

// Dense vector primitives used by every integrator step. Matrices are
// column-major (Eigen default), X is d x n.
namespace mdrift::kern {

struct Table {
    const char* name;
    double (*dot)(const double* a, const double* b, std::size_t len);
    void (*axpy)(double a, const double* x, double* y, std::size_t len);
    // out[j] = <X[:,j], v>
    void (*gemv_t)(const double* X, std::size_t d, std::size_t n, const double* v, double* out);
    // out = X r
    void (*gemv)(const double* X, std::size_t d, std::size_t n, const double* r, double* out);
};

const Table& scalar_table();
const Table* avx2_table();  // nullptr when the build or the CPU lacks AVX2/FMA

bool avx2_available();

// Selected once from cpuid; MINIMA_DRIFT_SIMD=scalar|avx2 overrides.
const Table& active();
// Returns false if the name is unknown or unsupported on this CPU.
bool select(std::string_view name);

inline double dot(const double* a, const double* b, std::size_t len) { return active().dot(a, b, len); }
inline void axpy(double a, const double* x, double* y, std::size_t len) { active().axpy(a, x, y, len); }
inline void gemv_t(const double* X, std::size_t d, std::size_t n, const double* v, double* out) {
    active().gemv_t(X, d, n, v, out);
}
inline void gemv(const double* X, std::size_t d, std::size_t n, const double* r, double* out) {
    active().gemv(X, d, n, r, out);
}

}  // namespace mdrift::kern
