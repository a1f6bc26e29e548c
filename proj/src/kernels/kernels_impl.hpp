// Internal: per-ISA kernel tables shared by the dispatch unit.
#pragma once

#include <cstddef>

namespace mlporo::kern::detail {

struct KernelTable {
    void (*axpy)(std::size_t, double, const double*, double*);
    double (*dot)(std::size_t, const double*, const double*);
    void (*relu)(std::size_t, const double*, double*);
    void (*relu_mask)(std::size_t, const double*, double*);
    void (*adam_step)(std::size_t, double*, const double*, double*, double*,
                      double, double, double, double, double, double);
};

extern const KernelTable scalar_table;
#if MLPORO_HAVE_AVX2
extern const KernelTable avx2_table;
#endif

}  // namespace mlporo::kern::detail
