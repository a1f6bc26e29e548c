#pragma once

// Macroscale effective coefficients assembled from cell-averaged tensors.
//
// With the solid stiffness C (isotropic E, nu; plane strain with the 3D
// Lame constants) and the cell averages M, Q, W:
//
//   C-eff  = (1 - phi) C + C : <M>       (square symmetric: C11, C12, C44)
//   alpha  = phi - (M11 + M12)           (isotropic Biot coefficient)
//   1/M_b  = -<tr Q> = -2 Q11            (Q rescaled from the reference
//                                         modulus: Q ~ 1/E)
//   K11    = <W11>                       (hydraulic conductivity)

#include <array>
#include <utility>

#include "mlporo/microcell.hpp"

namespace mlporo::up {

struct EffectiveCoefficients {
    double C11 = 0.0;  ///< drained stiffness, 11-slot
    double C12 = 0.0;  ///< drained stiffness, 12-slot
    double C44 = 0.0;  ///< drained shear slot (acts on gamma)
    double alpha = 0.0;
    double biot_modulus = 0.0;
    double K11 = 0.0;
};

inline double lame_lambda(double E, double nu) {
    return E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
}
inline double lame_mu(double E, double nu) { return E / (2.0 * (1.0 + nu)); }

/// Assemble effective coefficients from cell tensors obtained at the
/// reference modulus E_ref. Q scales as 1/E, so the Biot modulus uses
/// Q11 * (E_ref / solid_E). Throws std::domain_error when the rescaled
/// <tr Q> fails to be negative (non-physical cell solution).
EffectiveCoefficients effective_from_cell(const cell::CellTensors& t,
                                          double solid_E, double solid_nu,
                                          double phi,
                                          double E_ref = cell::kReferenceYoungs);

/// Undrained stiffness: adds biot_modulus * alpha^2 to the 11 and 12 slots.
std::array<double, 3> undrained_tensor(const EffectiveCoefficients& eff);

/// Isotropic moduli recovered from the 3D-form stiffness slots
/// (C11 = lambda + 2 mu, C12 = lambda):
///   E  = (C11 (C11 + C12) - 2 C12^2) / (C11 + C12)
///   nu = C12 / (C11 + C12)
/// Throws std::domain_error when C11 + C12 == 0.
std::pair<double, double> isotropic_moduli(double C11, double C12);

}  // namespace mlporo::up
