#include "mlporo/hyperverify.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "mlporo/upscale.hpp"

namespace mlporo::hyper {

namespace {

void validate_params(const remodel::NeoHookeanParams& params) {
    if (!(params.c10 > 0.0) || !(params.d1 > 0.0)) {
        throw std::invalid_argument("solid energy parameters must be positive");
    }
}

// axial and transverse second Piola-Kirchhoff stress for the diagonal
// stretch pair (l1, l2): S_aa = 2 C10 (1 - 1/la^2) + 2 ln(l1 l2)/(D1 la^2)
double s_axial(const remodel::NeoHookeanParams& p, double l1, double l2) {
    const double lj = std::log(l1 * l2);
    return 2.0 * p.c10 * (1.0 - 1.0 / (l1 * l1)) + 2.0 * lj / (p.d1 * l1 * l1);
}

}  // namespace

double lateral_stretch(const remodel::NeoHookeanParams& params, double stretch) {
    validate_params(params);
    if (!(stretch > 0.0)) {
        throw std::invalid_argument("stretch must be positive");
    }
    // the transverse stress is the axial formula of the swapped pair and
    // grows monotonically with the lateral stretch
    const auto transverse = [&](double lat) {
        return s_axial(params, lat, stretch);
    };
    double lo = 0.2, hi = 5.0;
    if (!(transverse(lo) < 0.0) || !(transverse(hi) > 0.0)) {
        throw std::domain_error("no lateral equilibrium in the search bracket");
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (transverse(mid) > 0.0 ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

double reference_stress(const remodel::NeoHookeanParams& params, double stretch) {
    return s_axial(params, stretch, lateral_stretch(params, stretch));
}

UniaxialRun incremental_uniaxial(const remodel::NeoHookeanParams& params,
                                 double target_stretch, int n_increments) {
    validate_params(params);
    if (!(target_stretch >= 0.5) || !(target_stretch <= 2.0)) {
        throw std::invalid_argument("target stretch must lie in [0.5, 2]");
    }
    if (n_increments < 1) {
        throw std::invalid_argument("at least one increment is required");
    }

    UniaxialRun run;
    run.n_increments = n_increments;
    run.target_stretch = target_stretch;
    run.records.reserve(n_increments + 1);

    const double dl = (target_stretch - 1.0) / n_increments;
    remodel::Sym2 e{0.0, 0.0, 0.0};
    double stress = 0.0;
    remodel::FullTangent tan = remodel::neo_hookean_tangent_full(params, e);

    // each record carries the moduli its increment was solved with; the
    // re-tangent happens lazily so a final-step jump past the energy's
    // domain (the N = 1 line) still returns its polyline
    auto push = [&](double stretch) {
        const auto [mod_e, mod_nu] =
            up::isotropic_moduli(0.5 * (tan.t1111 + tan.t2222), tan.t1122);
        run.records.push_back({stretch, stress, mod_e, mod_nu});
    };
    push(1.0);

    for (int k = 0; k < n_increments; ++k) {
        if (!(tan.t2222 > 0.0) ||
            !(tan.t1111 - tan.t1122 * tan.t1122 / tan.t2222 > 0.0)) {
            throw std::domain_error(
                "tangent lost positive definiteness along the stretch path");
        }
        const double lam = 1.0 + k * dl;
        // exact Green-strain step of the axial stretch increment
        const double de11 = lam * dl + 0.5 * dl * dl;
        // zero transverse stress increment eliminates the lateral strain
        const double de22 = -tan.t1122 / tan.t2222 * de11;
        stress += (tan.t1111 - tan.t1122 * tan.t1122 / tan.t2222) * de11;
        e.xx += de11;
        e.yy += de22;
        push(k + 1 == n_increments ? target_stretch : 1.0 + (k + 1) * dl);
        if (k + 1 < n_increments) {
            tan = remodel::neo_hookean_tangent_full(params, e);
        }
    }
    return run;
}

void append_curve_csv(std::ostream& out, const UniaxialRun& run) {
    char buf[96];
    for (const auto& r : run.records) {
        std::snprintf(buf, sizeof(buf), "%d,%.12g,%.12g\n", run.n_increments,
                      r.stretch, r.nominal_stress);
        out << buf;
    }
}

}  // namespace mlporo::hyper
