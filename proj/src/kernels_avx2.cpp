// Compiled with -mavx2 -mfma. Must not include Eigen or other inline-heavy
// headers: their instantiations would leak wider-ISA code into shared symbols.
#include "minima_drift/kernels.hpp"

#if defined(__x86_64__) && defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>

namespace mdrift::kern {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double dot_avx2(const double* a, const double* b, std::size_t len) {
    __m256d s0 = _mm256_setzero_pd();
    __m256d s1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= len; i += 8) {
        s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
        s1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), s1);
    }
    if (i + 4 <= len) {
        s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
        i += 4;
    }
    double s = hsum(_mm256_add_pd(s0, s1));
    for (; i < len; ++i) s += a[i] * b[i];
    return s;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t len) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= len; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < len; ++i) y[i] += a * x[i];
}

// four columns at a time share the loads of v
void gemv_t_avx2(const double* X, std::size_t d, std::size_t n, const double* v, double* out) {
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        const double* c0 = X + j * d;
        const double* c1 = c0 + d;
        const double* c2 = c1 + d;
        const double* c3 = c2 + d;
        __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
        __m256d s2 = _mm256_setzero_pd(), s3 = _mm256_setzero_pd();
        std::size_t i = 0;
        for (; i + 4 <= d; i += 4) {
            __m256d vv = _mm256_loadu_pd(v + i);
            s0 = _mm256_fmadd_pd(_mm256_loadu_pd(c0 + i), vv, s0);
            s1 = _mm256_fmadd_pd(_mm256_loadu_pd(c1 + i), vv, s1);
            s2 = _mm256_fmadd_pd(_mm256_loadu_pd(c2 + i), vv, s2);
            s3 = _mm256_fmadd_pd(_mm256_loadu_pd(c3 + i), vv, s3);
        }
        double r0 = hsum(s0), r1 = hsum(s1), r2 = hsum(s2), r3 = hsum(s3);
        for (; i < d; ++i) {
            r0 += c0[i] * v[i];
            r1 += c1[i] * v[i];
            r2 += c2[i] * v[i];
            r3 += c3[i] * v[i];
        }
        out[j] = r0;
        out[j + 1] = r1;
        out[j + 2] = r2;
        out[j + 3] = r3;
    }
    for (; j < n; ++j) out[j] = dot_avx2(X + j * d, v, d);
}

void gemv_avx2(const double* X, std::size_t d, std::size_t n, const double* r, double* out) {
    std::size_t i = 0;
    for (; i + 4 <= d; i += 4) {
        __m256d acc = _mm256_setzero_pd();
        for (std::size_t j = 0; j < n; ++j)
            acc = _mm256_fmadd_pd(_mm256_set1_pd(r[j]), _mm256_loadu_pd(X + j * d + i), acc);
        _mm256_storeu_pd(out + i, acc);
    }
    for (; i < d; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += r[j] * X[j * d + i];
        out[i] = s;
    }
}

}  // namespace

const Table* avx2_table() {
    static const Table t{"avx2", dot_avx2, axpy_avx2, gemv_t_avx2, gemv_avx2};
    return &t;
}

}  // namespace mdrift::kern

#else

namespace mdrift::kern {
const Table* avx2_table() { return nullptr; }
}  // namespace mdrift::kern

#endif
