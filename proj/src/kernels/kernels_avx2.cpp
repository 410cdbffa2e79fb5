#include "bindelta/kernels.hpp"

// AVX2 + FMA variants. This translation unit is compiled with
// -mavx2 -mfma; it must only be reached through the dispatch table after
// a cpuid check. 4 doubles per lane, scalar tails.

#if defined(__AVX2__)

#include <immintrin.h>

#include <cmath>
#include <limits>

namespace bindelta::kernels {
namespace {

double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d shuf = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

double hmax(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_max_pd(lo, hi);
    __m128d shuf = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_max_sd(lo, shuf));
}

double v_dot(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
    double r = hsum(acc);
    for (; i < n; ++i) r += a[i] * b[i];
    return r;
}

void v_gemv(const double* w, const double* x, const double* b, double* y,
            std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double d = v_dot(w + r * cols, x, cols);
        y[r] = b ? d + b[r] : d;
    }
}

void v_axpy(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d yy = _mm256_loadu_pd(y + i);
        yy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), yy);
        _mm256_storeu_pd(y + i, yy);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void v_gemv_t_acc(const double* w, const double* g, double* dx,
                  std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) v_axpy(g[r], w + r * cols, dx, cols);
}

void v_ger_acc(const double* g, const double* x, double* dw,
               std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) v_axpy(g[r], x, dw + r * cols, cols);
}

void v_scale(double alpha, double* x, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) x[i] *= alpha;
}

void v_relu(const double* x, double* y, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_max_pd(zero, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void v_relu_backward(const double* pre, const double* up, double* out, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(pre + i), zero, _CMP_GT_OQ);
        _mm256_storeu_pd(out + i, _mm256_and_pd(mask, _mm256_loadu_pd(up + i)));
    }
    for (; i < n; ++i) out[i] = pre[i] > 0.0 ? up[i] : 0.0;
}

void v_adam_update(double* p, double* m, double* v, const double* g, std::size_t n,
                   double lr, double beta1, double beta2, double eps,
                   double bc1, double bc2) {
    const __m256d vb1 = _mm256_set1_pd(beta1);
    const __m256d vb2 = _mm256_set1_pd(beta2);
    const __m256d vc1 = _mm256_set1_pd(1.0 - beta1);
    const __m256d vc2 = _mm256_set1_pd(1.0 - beta2);
    const __m256d vlr = _mm256_set1_pd(lr);
    const __m256d veps = _mm256_set1_pd(eps);
    const __m256d vibc1 = _mm256_set1_pd(1.0 / bc1);
    const __m256d vibc2 = _mm256_set1_pd(1.0 / bc2);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d gi = _mm256_loadu_pd(g + i);
        __m256d mi = _mm256_loadu_pd(m + i);
        __m256d vi = _mm256_loadu_pd(v + i);
        mi = _mm256_fmadd_pd(vb1, mi, _mm256_mul_pd(vc1, gi));
        vi = _mm256_fmadd_pd(vb2, vi, _mm256_mul_pd(vc2, _mm256_mul_pd(gi, gi)));
        _mm256_storeu_pd(m + i, mi);
        _mm256_storeu_pd(v + i, vi);
        const __m256d mhat = _mm256_mul_pd(mi, vibc1);
        const __m256d vhat = _mm256_mul_pd(vi, vibc2);
        const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
        const __m256d step = _mm256_div_pd(_mm256_mul_pd(vlr, mhat), denom);
        _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), step));
    }
    for (; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
}

double v_sum(const double* x, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    double r = hsum(acc);
    for (; i < n; ++i) r += x[i];
    return r;
}

double v_max_value(const double* x, std::size_t n) {
    double tail = -std::numeric_limits<double>::infinity();
    std::size_t i = 0;
    if (n >= 4) {
        __m256d acc = _mm256_loadu_pd(x);
        for (i = 4; i + 4 <= n; i += 4) acc = _mm256_max_pd(acc, _mm256_loadu_pd(x + i));
        tail = hmax(acc);
    }
    for (; i < n; ++i) tail = tail > x[i] ? tail : x[i];
    return tail;
}

double v_squared_distance(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double r = hsum(acc);
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        r += d * d;
    }
    return r;
}

} // namespace

const OpsTable& avx2_table() {
    static const OpsTable t{
        v_gemv, v_gemv_t_acc, v_ger_acc, v_dot,  v_axpy,      v_scale,
        v_relu, v_relu_backward, v_adam_update, v_sum, v_max_value, v_squared_distance,
    };
    return t;
}

} // namespace bindelta::kernels

#else

namespace bindelta::kernels {

// Built without AVX2 support: fall back to the scalar table. force_backend
// rejects the request before this is ever used as "avx2".
const OpsTable& avx2_table() { return scalar_table(); }

} // namespace bindelta::kernels

#endif
