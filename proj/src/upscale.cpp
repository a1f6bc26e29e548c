#include "mlporo/upscale.hpp"

#include <cmath>
#include <stdexcept>

namespace mlporo::up {

EffectiveCoefficients effective_from_cell(const cell::CellTensors& t,
                                          double solid_E, double solid_nu,
                                          double phi, double E_ref) {
    if (!(solid_E > 0.0)) {
        throw std::invalid_argument("solid modulus must be positive");
    }
    const double lam = lame_lambda(solid_E, solid_nu);
    const double mu = lame_mu(solid_E, solid_nu);

    EffectiveCoefficients eff;
    // C-eff = (1-phi) C + C : <M>, written out in square-symmetric slots
    eff.C11 = (1.0 - phi) * (lam + 2 * mu) + (lam + 2 * mu) * t.M11 +
              lam * t.M12;
    eff.C12 = (1.0 - phi) * lam + (lam + 2 * mu) * t.M12 + lam * t.M11;
    eff.C44 = (1.0 - phi) * mu + 2 * mu * t.M44;
    eff.alpha = phi - (t.M11 + t.M12);

    const double tr_q = 2.0 * t.Q11 * (E_ref / solid_E);
    if (!(tr_q < 0.0)) {
        throw std::domain_error(
            "cell solution has non-negative <tr Q>; no positive Biot modulus");
    }
    eff.biot_modulus = -1.0 / tr_q;
    eff.K11 = t.K11;
    return eff;
}

std::array<double, 3> undrained_tensor(const EffectiveCoefficients& eff) {
    const double add = eff.biot_modulus * eff.alpha * eff.alpha;
    return {eff.C11 + add, eff.C12 + add, eff.C44};
}

std::pair<double, double> isotropic_moduli(double C11, double C12) {
    const double s = C11 + C12;
    if (s == 0.0) {
        throw std::domain_error("isotropic recovery undefined for C11 = -C12");
    }
    const double E = (C11 * s - 2.0 * C12 * C12) / s;
    const double nu = C12 / s;
    return {E, nu};
}

}  // namespace mlporo::up
