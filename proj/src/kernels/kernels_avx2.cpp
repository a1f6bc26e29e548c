// AVX2 + FMA variants. Compiled with -mavx2 -mfma; only ever called after the
// dispatcher has confirmed CPU support.
#include <immintrin.h>

#include <cmath>

#include "kernels_impl.hpp"

namespace mlporo::kern::detail {
namespace {

void axpy_avx2(std::size_t n, double a, const double* x, double* y) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

double dot_avx2(std::size_t n, const double* x, const double* y) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i),
                              acc);
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

void relu_avx2(std::size_t n, const double* z, double* a) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(a + i, _mm256_max_pd(_mm256_loadu_pd(z + i), zero));
    }
    for (; i < n; ++i) a[i] = z[i] > 0.0 ? z[i] : 0.0;
}

void relu_mask_avx2(std::size_t n, const double* z, double* g) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d keep =
            _mm256_cmp_pd(_mm256_loadu_pd(z + i), zero, _CMP_GT_OQ);
        _mm256_storeu_pd(g + i, _mm256_and_pd(_mm256_loadu_pd(g + i), keep));
    }
    for (; i < n; ++i) {
        if (z[i] <= 0.0) g[i] = 0.0;
    }
}

void adam_step_avx2(std::size_t n, double* w, const double* g, double* m,
                    double* v, double lr, double b1, double b2, double eps,
                    double inv_bias1, double inv_bias2) {
    const __m256d vb1 = _mm256_set1_pd(b1);
    const __m256d vb1c = _mm256_set1_pd(1.0 - b1);
    const __m256d vb2 = _mm256_set1_pd(b2);
    const __m256d vb2c = _mm256_set1_pd(1.0 - b2);
    const __m256d vlr = _mm256_set1_pd(lr);
    const __m256d veps = _mm256_set1_pd(eps);
    const __m256d vib1 = _mm256_set1_pd(inv_bias1);
    const __m256d vib2 = _mm256_set1_pd(inv_bias2);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vg = _mm256_loadu_pd(g + i);
        __m256d vm = _mm256_loadu_pd(m + i);
        __m256d vv = _mm256_loadu_pd(v + i);
        vm = _mm256_fmadd_pd(vb1, vm, _mm256_mul_pd(vb1c, vg));
        vv = _mm256_fmadd_pd(vb2, vv, _mm256_mul_pd(vb2c, _mm256_mul_pd(vg, vg)));
        _mm256_storeu_pd(m + i, vm);
        _mm256_storeu_pd(v + i, vv);
        const __m256d mhat = _mm256_mul_pd(vm, vib1);
        const __m256d vhat = _mm256_mul_pd(vv, vib2);
        const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
        const __m256d step = _mm256_div_pd(_mm256_mul_pd(vlr, mhat), denom);
        _mm256_storeu_pd(w + i, _mm256_sub_pd(_mm256_loadu_pd(w + i), step));
    }
    for (; i < n; ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        w[i] -= lr * (m[i] * inv_bias1) / (std::sqrt(v[i] * inv_bias2) + eps);
    }
}

}  // namespace

const KernelTable avx2_table = {axpy_avx2, dot_avx2, relu_avx2, relu_mask_avx2,
                                adam_step_avx2};

}  // namespace mlporo::kern::detail
