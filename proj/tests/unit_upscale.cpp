#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "mlporo/upscale.hpp"

using namespace mlporo::up;
using mlporo::cell::CellTensors;

TEST_CASE("no-pore limit recovers the solid stiffness") {
    CellTensors t;  // M = 0
    t.Q11 = -1e-12;  // vanishing pore: tr Q -> 0 from below
    const double E = 15.0, nu = 0.3;
    const auto eff = effective_from_cell(t, E, nu, 0.0);
    const double lam = lame_lambda(E, nu), mu = lame_mu(E, nu);
    CHECK(eff.C11 == doctest::Approx(lam + 2 * mu).epsilon(1e-14));
    CHECK(eff.C12 == doctest::Approx(lam).epsilon(1e-14));
    CHECK(eff.C44 == doctest::Approx(mu).epsilon(1e-14));
    CHECK(eff.alpha == doctest::Approx(0.0));
    CHECK(eff.K11 == 0.0);
    CHECK(eff.biot_modulus > 0.0);
}

TEST_CASE("undrained tensor arithmetic") {
    EffectiveCoefficients eff;
    eff.C11 = 20.0;
    eff.C12 = 8.0;
    eff.C44 = 6.0;
    eff.alpha = 0.8;
    eff.biot_modulus = 10.0;
    auto u = undrained_tensor(eff);
    CHECK(u[0] == doctest::Approx(26.4).epsilon(1e-14));
    CHECK(u[1] == doctest::Approx(14.4).epsilon(1e-14));
    CHECK(u[2] == doctest::Approx(6.0).epsilon(1e-14));

    eff.alpha = 0.0;
    u = undrained_tensor(eff);
    CHECK(u[0] == doctest::Approx(eff.C11));
    CHECK(u[1] == doctest::Approx(eff.C12));

    eff.alpha = 0.8;
    eff.biot_modulus = 0.0;
    u = undrained_tensor(eff);
    CHECK(u[0] == doctest::Approx(eff.C11));
    CHECK(u[1] == doctest::Approx(eff.C12));
}

TEST_CASE("undrained stiffening never softens the 11/12 slots") {
    std::mt19937_64 rng(20240814);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int k = 0; k < 200; ++k) {
        EffectiveCoefficients eff;
        eff.C11 = 5.0 + 20.0 * U(rng);
        eff.C12 = 0.5 * eff.C11 * U(rng);
        eff.C44 = 1.0 + 5.0 * U(rng);
        eff.alpha = U(rng);
        eff.biot_modulus = 50.0 * U(rng);
        const auto u = undrained_tensor(eff);
        CHECK(u[0] >= eff.C11);
        CHECK(u[1] >= eff.C12);
        CHECK(u[2] == eff.C44);
    }
}

TEST_CASE("isotropic recovery inverts the Lame forms") {
    // 3D-form slots: C11 = lambda + 2 mu, C12 = lambda
    const double E = 15.0, nu = 0.3;
    const double lam = lame_lambda(E, nu), mu = lame_mu(E, nu);
    const auto [Er, nur] = isotropic_moduli(lam + 2 * mu, lam);
    CHECK(Er == doctest::Approx(E).epsilon(1e-10));
    CHECK(nur == doctest::Approx(nu).epsilon(1e-10));

    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> UE(0.5, 50.0), Unu(0.01, 0.49);
    for (int k = 0; k < 100; ++k) {
        const double e = UE(rng), n = Unu(rng);
        const double l = lame_lambda(e, n), m = lame_mu(e, n);
        const auto [er, nr] = isotropic_moduli(l + 2 * m, l);
        CHECK(er == doctest::Approx(e).epsilon(1e-12));
        CHECK(nr == doctest::Approx(n).epsilon(1e-12));
    }
}

TEST_CASE("isotropic recovery of the zero-strain bulk/shear tangent") {
    // C11 = K + 2 mu and C12 = K for (E, nu) = (15e6, 0.3), in 1e6 units
    const double mu = 15.0 / 2.6;
    const double K = 15.0 / (3 * 0.4);
    const auto [E, nu] = isotropic_moduli(K + 2 * mu, K);
    CHECK(E == doctest::Approx(15.49).epsilon(5e-4));
    CHECK(nu == doctest::Approx(0.342).epsilon(5e-4));
}

TEST_CASE("isotropic recovery edge cases") {
    const auto [E, nu] = isotropic_moduli(7.5, 0.0);
    CHECK(nu == doctest::Approx(0.0));
    CHECK(E == doctest::Approx(7.5));
    CHECK_THROWS_AS(isotropic_moduli(3.0, -3.0), std::domain_error);
}

TEST_CASE("non-negative trace of Q is rejected") {
    CellTensors t;
    t.Q11 = 0.0;
    CHECK_THROWS_AS(effective_from_cell(t, 15.0, 0.3, 0.3), std::domain_error);
    t.Q11 = 1e-3;
    CHECK_THROWS_AS(effective_from_cell(t, 15.0, 0.3, 0.3), std::domain_error);
    CHECK_THROWS_AS(effective_from_cell(t, -1.0, 0.3, 0.3),
                    std::invalid_argument);
}

TEST_CASE("scaling in the solid modulus") {
    CellTensors t;
    t.M11 = -0.24;
    t.M12 = -0.10;
    t.M44 = -0.25;
    t.Q11 = -0.0117;
    t.K11 = 3.9e-4;
    const double nu = 0.3, phi = 0.3;
    const auto e1 = effective_from_cell(t, 15.0, nu, phi);
    const auto e2 = effective_from_cell(t, 30.0, nu, phi);
    // C-eff and Biot modulus are degree 1 in E; alpha and K11 degree 0
    CHECK(e2.C11 == doctest::Approx(2 * e1.C11).epsilon(1e-13));
    CHECK(e2.C12 == doctest::Approx(2 * e1.C12).epsilon(1e-13));
    CHECK(e2.C44 == doctest::Approx(2 * e1.C44).epsilon(1e-13));
    CHECK(e2.biot_modulus == doctest::Approx(2 * e1.biot_modulus).epsilon(1e-13));
    CHECK(e2.alpha == doctest::Approx(e1.alpha).epsilon(1e-15));
    CHECK(e2.K11 == e1.K11);
}

TEST_CASE("training-range structure at a mid-grid point") {
    // tensors of the mid-range cell (phi = 0.3, nu = 0.3) at the working
    // resolution; structural bounds that any faithful solve must satisfy
    CellTensors t;
    t.M11 = -0.2397;
    t.M12 = -0.0986;
    t.M44 = -0.2484;
    t.Q11 = -0.01173;
    t.K11 = 3.886e-4;
    const auto eff = effective_from_cell(t, 15.0, 0.3, 0.3);
    CHECK(eff.C11 > std::abs(eff.C12));  // positive definite
    CHECK(eff.C44 > 0.0);
    CHECK(eff.alpha >= 0.3);
    CHECK(eff.alpha <= 1.0);
    CHECK(eff.biot_modulus > 0.0);
    const auto u = undrained_tensor(eff);
    CHECK(u[0] > eff.C11);
}
