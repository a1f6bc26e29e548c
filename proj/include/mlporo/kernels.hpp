/// @file kernels.hpp
/// @brief Data-parallel arithmetic kernels with runtime ISA dispatch.
///
/// The network training loop spends essentially all of its time in a handful
/// of dense operations over contiguous double arrays. Each has a scalar
/// reference implementation and an AVX2 variant; the active variant is picked
/// once at startup from CPU capabilities and can be overridden (environment
/// variable MLPORO_ISA=scalar|avx2, or force_isa()) for equivalence testing
/// and bit-reproducibility across machines.

#pragma once

#include <cstddef>

namespace mlporo::kern {

enum class Isa { scalar, avx2 };

/// Currently active instruction set.
Isa active_isa();

/// Override the dispatch. Throws std::invalid_argument if the requested ISA
/// is not available on this machine.
void force_isa(Isa isa);

const char* isa_name(Isa isa);

/// y[i] += a * x[i]
void axpy(std::size_t n, double a, const double* x, double* y);

/// sum_i x[i] * y[i]
double dot(std::size_t n, const double* x, const double* y);

/// a[i] = max(z[i], 0)
void relu(std::size_t n, const double* z, double* a);

/// g[i] = z[i] > 0 ? g[i] : 0   (backprop through the ReLU mask)
void relu_mask(std::size_t n, const double* z, double* g);

/// One Adam update over a parameter array:
///   m = b1*m + (1-b1)*g;  v = b2*v + (1-b2)*g^2
///   w -= lr * (m*inv_bias1) / (sqrt(v*inv_bias2) + eps)
/// inv_bias1 = 1/(1-b1^t), inv_bias2 = 1/(1-b2^t) are passed in precomputed.
void adam_step(std::size_t n, double* w, const double* g, double* m, double* v,
               double lr, double b1, double b2, double eps, double inv_bias1,
               double inv_bias2);

}  // namespace mlporo::kern
