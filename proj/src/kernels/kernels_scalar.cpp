#include <cmath>

#include "kernels_impl.hpp"

namespace mlporo::kern::detail {
namespace {

void axpy_scalar(std::size_t n, double a, const double* x, double* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double dot_scalar(std::size_t n, const double* x, const double* y) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

void relu_scalar(std::size_t n, const double* z, double* a) {
    for (std::size_t i = 0; i < n; ++i) a[i] = z[i] > 0.0 ? z[i] : 0.0;
}

void relu_mask_scalar(std::size_t n, const double* z, double* g) {
    for (std::size_t i = 0; i < n; ++i) {
        if (z[i] <= 0.0) g[i] = 0.0;
    }
}

void adam_step_scalar(std::size_t n, double* w, const double* g, double* m,
                      double* v, double lr, double b1, double b2, double eps,
                      double inv_bias1, double inv_bias2) {
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        const double mhat = m[i] * inv_bias1;
        const double vhat = v[i] * inv_bias2;
        w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

}  // namespace

const KernelTable scalar_table = {axpy_scalar, dot_scalar, relu_scalar,
                                  relu_mask_scalar, adam_step_scalar};

}  // namespace mlporo::kern::detail
