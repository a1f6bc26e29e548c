#include <cstdlib>
#include <cstring>
#include <stdexcept>

#include "kernels_impl.hpp"
#include "mlporo/kernels.hpp"

namespace mlporo::kern {
namespace {

using detail::KernelTable;

bool avx2_available() {
#if MLPORO_HAVE_AVX2
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable* table_for(Isa isa) {
    switch (isa) {
        case Isa::scalar: return &detail::scalar_table;
        case Isa::avx2:
#if MLPORO_HAVE_AVX2
            return &detail::avx2_table;
#else
            return nullptr;
#endif
    }
    return nullptr;
}

struct Dispatch {
    Isa isa;
    const KernelTable* table;

    Dispatch() {
        isa = avx2_available() ? Isa::avx2 : Isa::scalar;
        if (const char* env = std::getenv("MLPORO_ISA")) {
            if (std::strcmp(env, "scalar") == 0) isa = Isa::scalar;
            else if (std::strcmp(env, "avx2") == 0 && avx2_available())
                isa = Isa::avx2;
        }
        table = table_for(isa);
    }
};

Dispatch& dispatch() {
    static Dispatch d;
    return d;
}

}  // namespace

Isa active_isa() { return dispatch().isa; }

void force_isa(Isa isa) {
    if (isa == Isa::avx2 && !avx2_available()) {
        throw std::invalid_argument("avx2 kernels not available on this cpu");
    }
    dispatch().isa = isa;
    dispatch().table = table_for(isa);
}

const char* isa_name(Isa isa) {
    return isa == Isa::avx2 ? "avx2" : "scalar";
}

void axpy(std::size_t n, double a, const double* x, double* y) {
    dispatch().table->axpy(n, a, x, y);
}

double dot(std::size_t n, const double* x, const double* y) {
    return dispatch().table->dot(n, x, y);
}

void relu(std::size_t n, const double* z, double* a) {
    dispatch().table->relu(n, z, a);
}

void relu_mask(std::size_t n, const double* z, double* g) {
    dispatch().table->relu_mask(n, z, g);
}

void adam_step(std::size_t n, double* w, const double* g, double* m, double* v,
               double lr, double b1, double b2, double eps, double inv_bias1,
               double inv_bias2) {
    dispatch().table->adam_step(n, w, g, m, v, lr, b1, b2, eps, inv_bias1,
                                inv_bias2);
}

}  // namespace mlporo::kern
