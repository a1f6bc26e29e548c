#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "mlporo/scales.hpp"

using namespace mlporo::scales;

TEST_CASE("unit characteristic scales give identity conversions") {
    const auto s = derive({1.0, 1.0, 1.0, 1.0});
    CHECK(s.length == 1.0);
    CHECK(s.stress == 1.0);
    CHECK(s.time == 1.0);
    CHECK(s.velocity == 1.0);
    CHECK(s.conductivity == 1.0);
    CHECK(to_dimensionless(3.5, Quantity::stress, s) == 3.5);
    CHECK(!s.scale_separation_ok);  // d/L = 1
}

TEST_CASE("brain-tissue scale set") {
    // L = 1 mm, d = 20 um, mu_c = 1 mPa s, f_c = 1 mN
    const auto s = derive({1e-3, 20e-6, 1e-3, 1e-3});
    CHECK(s.stress == doctest::Approx(1e3).epsilon(1e-12));
    CHECK(s.time == doctest::Approx(2.5e-3).epsilon(1e-12));
    CHECK(s.velocity == doctest::Approx(4e-1).epsilon(1e-12));
    CHECK(s.conductivity == doctest::Approx(4e-7).epsilon(1e-12));
    CHECK(s.epsilon == doctest::Approx(0.02));
    CHECK(s.scale_separation_ok);
    // 13.5 kPa tissue stiffness -> dimensionless 13.5
    CHECK(to_dimensionless(13.5e3, Quantity::modulus, s) ==
          doctest::Approx(13.5).epsilon(1e-12));
    // velocity scale = length / time
    CHECK(s.velocity == doctest::Approx(s.length / s.time).epsilon(1e-12));
}

TEST_CASE("soil scale set maps 15 MPa to 15") {
    const auto s = derive({1.0, 1e-4, 1e-3, 1e6});
    CHECK(to_dimensionless(15e6, Quantity::modulus, s) ==
          doctest::Approx(15.0).epsilon(1e-12));
    CHECK(s.scale_separation_ok);
}

TEST_CASE("round trip over random values and kinds") {
    const auto s = derive({0.37, 2.1e-3, 8.9e-4, 520.0});
    std::mt19937_64 rng(20240811);
    std::uniform_real_distribution<double> val(1e-6, 1e6);
    const Quantity kinds[] = {
        Quantity::length,      Quantity::displacement, Quantity::stress,
        Quantity::modulus,     Quantity::pressure,     Quantity::time,
        Quantity::velocity,    Quantity::conductivity, Quantity::viscosity,
        Quantity::force};
    for (int i = 0; i < 1000; ++i) {
        const double v = val(rng);
        const Quantity q = kinds[i % 10];
        const double rt = to_physical(to_dimensionless(v, q, s), q, s);
        CHECK(rt == doctest::Approx(v).epsilon(1e-14));
    }
}

TEST_CASE("conversion is linear in the value") {
    const auto s = derive({2.0, 1e-2, 3e-3, 7.0});
    const double a = to_dimensionless(1.0, Quantity::pressure, s);
    for (double v : {0.0, 0.5, -3.0, 1e4}) {
        CHECK(to_dimensionless(v, Quantity::pressure, s) ==
              doctest::Approx(a * v));
    }
}

TEST_CASE("non-positive scales are rejected") {
    CHECK_THROWS_AS(derive({0.0, 1.0, 1.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(derive({1.0, -1.0, 1.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(derive({1.0, 1.0, 0.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(derive({1.0, 1.0, 1.0, 0.0}), std::invalid_argument);
}
