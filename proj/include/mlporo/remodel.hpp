#pragma once

// Per-quadrature-point remodelling engine.
//
// Each macroscale increment localises the macro response to a microscopic
// strain increment, accumulates it, and refreshes the point's porosity,
// solid moduli and effective coefficients:
//
//   d<eps1> = M : d_eps0 + Q d_p0            (localisation)
//   F       = <eps1> / (1 - phi_i) + I        (whole-cell to solid average)
//   E_green = (F^T F - I) / 2,   J = det F
//   phi     = 1 - (1 - phi_i) J               (incompressible fluid)
//   C_t     = d2W/dE2  for  W = C10 (I1 - 3) - 2 C10 ln J + ln(J)^2 / D1
//   (E, nu) from (C11, C12) assuming the matrix stays isotropic
//
// The strain energy is anchored at the initial moduli (C10, D1 from E_i,
// nu_i), so the tangent depends only on the accumulated strain: repeated
// zero increments are idempotent. Q11 scales as 1/E and is stored with the
// E_i/E correction already applied, ready for the next localisation.

#include <iosfwd>

#include "mlporo/microcell.hpp"
#include "mlporo/surrogate.hpp"
#include "mlporo/upscale.hpp"

namespace mlporo::remodel {

/// Symmetric second-rank tensor in the plane, tensor (not engineering)
/// components.
struct Sym2 {
    double xx = 0.0;
    double yy = 0.0;
    double xy = 0.0;
};

/// Total kinematics rebuilt from the accumulated microscopic strain.
struct Kinematics {
    double f11 = 1.0, f12 = 0.0, f21 = 0.0, f22 = 1.0;  ///< deformation gradient
    Sym2 e_green;                                       ///< Green strain
    double jac = 1.0;                                   ///< det F
};

/// Compressible neo-Hookean material constants, fixed at the initial moduli.
struct NeoHookeanParams {
    double c10 = 0.0;  ///< E_i / (4 (1 + nu_i))
    double d1 = 0.0;   ///< 6 (1 - 2 nu_i) / E_i

    static NeoHookeanParams from_initial(double E_i, double nu_i);
};

/// Square-symmetric reduction of the material tangent.
struct Tangent {
    double c11 = 0.0;
    double c12 = 0.0;
    double c44 = 0.0;
};

/// Unreduced plane-strain material tangent d2W/dE2 (distinct normal slots).
struct FullTangent {
    double t1111 = 0.0;
    double t2222 = 0.0;
    double t1122 = 0.0;
    double t1212 = 0.0;
};

/// Evolving state of one quadrature point.
struct MaterialPointState {
    double phi = 0.0;    ///< current porosity
    double phi_i = 0.0;  ///< reference porosity
    double E = 0.0;      ///< current solid modulus (dimensionless)
    double nu = 0.0;     ///< current solid Poisson ratio
    double E_i = 0.0;    ///< initial solid modulus
    double nu_i = 0.0;   ///< initial Poisson ratio
    Sym2 eps_micro;      ///< accumulated microscopic strain (whole-cell avg)
    cell::CellTensors tensors;     ///< cell tensors, Q11 already 1/E-corrected
    up::EffectiveCoefficients eff; ///< assembled macroscale coefficients
    int clamp_events = 0;          ///< porosity clamps into the trained range
};

/// d<eps1> = M : eps_macro + Q p. The shear slot picks up the factor 2 of
/// the full fourth-rank contraction over both off-diagonal pairs. t.Q11
/// must already carry the E_i/E correction when E differs from E_i.
Sym2 localise(const cell::CellTensors& t, const Sym2& eps_macro, double p);

/// Accumulates the strain increment and rebuilds (F, E_green, J) from the
/// total. Throws std::runtime_error when J <= 0 (increment rejected, state
/// untouched; the caller should cut the time step).
Kinematics update_kinematics(MaterialPointState& state, const Sym2& d_eps_micro);

/// phi = 1 - (1 - phi_i) J, clamped to the trained porosity interval
/// [0.082, 0.783]; a clamp bumps state.clamp_events. Updates state.phi.
double update_porosity(MaterialPointState& state, double jac);

/// Analytic Hessian of the strain energy at the given Green strain
/// (plane strain: the out-of-plane stretch is rigid), with the two normal
/// slots kept distinct. Throws std::domain_error when C = 2 E_green + I is
/// not positive definite.
FullTangent neo_hookean_tangent_full(const NeoHookeanParams& params,
                                     const Sym2& e_green);

/// Square-symmetric reduction of neo_hookean_tangent_full: the two normal
/// slots are averaged, matching the isotropic coefficient update.
Tangent neo_hookean_tangent(const NeoHookeanParams& params, const Sym2& e_green);

/// Isotropic moduli from the tangent's (C11, C12); updates state.E/state.nu.
/// Throws std::domain_error when C11 + C12 <= 0.
std::pair<double, double> update_solid_moduli(MaterialPointState& state,
                                              const Tangent& tangent);

/// Fresh point at the reference configuration: moduli at (E_i, nu_i)'s
/// zero-strain tangent, cell tensors and effective coefficients from the
/// surrogate at (nu, phi_i). Validates 0 < phi_i < 1, E_i > 0,
/// -1 < nu_i < 0.5 (std::invalid_argument).
MaterialPointState make_point(double phi_i, double E_i, double nu_i,
                              const ann::SurrogateBundle& bundle);

/// One full remodelling pass: localise the increment, accumulate
/// kinematics, update porosity and solid moduli, then refresh the cell
/// tensors and effective coefficients through the surrogate. With
/// linear_mode the state is returned unchanged (frozen coefficients).
/// Sub-operation errors are rethrown with the point identifier prepended.
MaterialPointState remodel_point(const MaterialPointState& state,
                                 const Sym2& d_eps_macro, double d_p,
                                 const ann::SurrogateBundle& bundle,
                                 bool linear_mode = false, int point_id = -1);

}  // namespace mlporo::remodel
