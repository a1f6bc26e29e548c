#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "mlporo/kernels.hpp"

using namespace mlporo::kern;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng,
                               double lo = -2.0, double hi = 2.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

bool have_avx2() {
    try {
        force_isa(Isa::avx2);
    } catch (const std::invalid_argument&) {
        return false;
    }
    force_isa(Isa::scalar);
    return true;
}

}  // namespace

TEST_CASE("scalar kernels: reference behaviour") {
    force_isa(Isa::scalar);
    std::vector<double> x{1.0, -2.0, 3.0}, y{0.5, 0.5, 0.5};
    axpy(3, 2.0, x.data(), y.data());
    CHECK(y[0] == 2.5);
    CHECK(y[1] == -3.5);
    CHECK(y[2] == 6.5);
    CHECK(dot(3, x.data(), x.data()) == 14.0);

    std::vector<double> z{-1.0, 0.0, 2.0}, a(3);
    relu(3, z.data(), a.data());
    CHECK(a[0] == 0.0);
    CHECK(a[1] == 0.0);
    CHECK(a[2] == 2.0);

    std::vector<double> g{5.0, 5.0, 5.0};
    relu_mask(3, z.data(), g.data());
    CHECK(g[0] == 0.0);
    CHECK(g[1] == 0.0);  // derivative taken as 0 at z = 0
    CHECK(g[2] == 5.0);
}

TEST_CASE("adam step matches a hand-computed first iteration") {
    force_isa(Isa::scalar);
    const double lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    double w = 1.0, g = 0.5, m = 0.0, v = 0.0;
    const double ib1 = 1.0 / (1.0 - b1), ib2 = 1.0 / (1.0 - b2);
    adam_step(1, &w, &g, &m, &v, lr, b1, b2, eps, ib1, ib2);
    // m_hat = g, v_hat = g^2 -> step = lr * g / (|g| + eps)
    CHECK(m == doctest::Approx(0.05));
    CHECK(v == doctest::Approx(0.00025));
    CHECK(w == doctest::Approx(1.0 - lr * 0.5 / (0.5 + eps)).epsilon(1e-12));
}

TEST_CASE("avx2 kernels agree with scalar reference") {
    if (!have_avx2()) {
        MESSAGE("avx2 not available, skipping equivalence checks");
        return;
    }
    std::mt19937_64 rng(97);
    // sizes straddle the 4-lane width to exercise remainder handling
    for (std::size_t n : {1u, 3u, 4u, 5u, 8u, 17u, 64u, 1001u}) {
        auto x = random_vec(n, rng);
        auto y0 = random_vec(n, rng);
        auto y1 = y0;

        force_isa(Isa::scalar);
        axpy(n, 1.7, x.data(), y0.data());
        const double d0 = dot(n, x.data(), y0.data());
        force_isa(Isa::avx2);
        axpy(n, 1.7, x.data(), y1.data());
        const double d1 = dot(n, x.data(), y1.data());

        for (std::size_t i = 0; i < n; ++i) {
            CHECK(y1[i] == doctest::Approx(y0[i]).epsilon(1e-15));
        }
        CHECK(d1 == doctest::Approx(d0).epsilon(1e-13 * double(n)));

        // relu and the mask are elementwise: must match exactly
        auto z = random_vec(n, rng);
        std::vector<double> a0(n), a1(n);
        force_isa(Isa::scalar);
        relu(n, z.data(), a0.data());
        force_isa(Isa::avx2);
        relu(n, z.data(), a1.data());
        CHECK(a0 == a1);

        auto g0 = random_vec(n, rng);
        auto g1 = g0;
        force_isa(Isa::scalar);
        relu_mask(n, z.data(), g0.data());
        force_isa(Isa::avx2);
        relu_mask(n, z.data(), g1.data());
        CHECK(g0 == g1);
    }
    force_isa(Isa::scalar);
}

TEST_CASE("avx2 adam agrees elementwise with scalar") {
    if (!have_avx2()) return;
    std::mt19937_64 rng(131);
    const std::size_t n = 103;
    auto w0 = random_vec(n, rng);
    auto g = random_vec(n, rng);
    auto m0 = random_vec(n, rng, 0.0, 1.0);
    auto v0 = random_vec(n, rng, 0.0, 1.0);
    auto w1 = w0, m1 = m0, v1 = v0;

    const double lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    force_isa(Isa::scalar);
    adam_step(n, w0.data(), g.data(), m0.data(), v0.data(), lr, b1, b2, eps,
              2.0, 3.0);
    force_isa(Isa::avx2);
    adam_step(n, w1.data(), g.data(), m1.data(), v1.data(), lr, b1, b2, eps,
              2.0, 3.0);
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(w1[i] == doctest::Approx(w0[i]).epsilon(1e-15));
        CHECK(m1[i] == doctest::Approx(m0[i]).epsilon(1e-15));
        CHECK(v1[i] == doctest::Approx(v0[i]).epsilon(1e-15));
    }
    force_isa(Isa::scalar);
}

TEST_CASE("forcing an isa sticks and reports") {
    force_isa(Isa::scalar);
    CHECK(active_isa() == Isa::scalar);
    CHECK(std::string(isa_name(active_isa())) == "scalar");
}
