#include "mlporo/remodel.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace mlporo::remodel {

namespace {

constexpr double kPhiLo = 0.082;
constexpr double kPhiHi = 0.783;

Kinematics kinematics_of(const Sym2& eps_total, double phi_i) {
    // F = <eps1>/(1 - phi_i) + I; the factor converts the whole-cell
    // average to a solid-phase average on the unit cell
    const double s = 1.0 / (1.0 - phi_i);
    Kinematics kin;
    kin.f11 = 1.0 + s * eps_total.xx;
    kin.f22 = 1.0 + s * eps_total.yy;
    kin.f12 = s * eps_total.xy;
    kin.f21 = s * eps_total.xy;
    kin.jac = kin.f11 * kin.f22 - kin.f12 * kin.f21;
    // E = (F^T F - I)/2
    kin.e_green.xx = 0.5 * (kin.f11 * kin.f11 + kin.f21 * kin.f21 - 1.0);
    kin.e_green.yy = 0.5 * (kin.f12 * kin.f12 + kin.f22 * kin.f22 - 1.0);
    kin.e_green.xy = 0.5 * (kin.f11 * kin.f12 + kin.f21 * kin.f22);
    return kin;
}

}  // namespace

NeoHookeanParams NeoHookeanParams::from_initial(double E_i, double nu_i) {
    if (E_i <= 0.0 || nu_i <= -1.0 || nu_i >= 0.5) {
        throw std::invalid_argument(
            "neo-Hookean constants need E_i > 0 and nu_i in (-1, 0.5)");
    }
    NeoHookeanParams p;
    p.c10 = E_i / (4.0 * (1.0 + nu_i));
    p.d1 = 6.0 * (1.0 - 2.0 * nu_i) / E_i;
    return p;
}

Sym2 localise(const cell::CellTensors& t, const Sym2& eps_macro, double p) {
    Sym2 out;
    out.xx = t.M11 * eps_macro.xx + t.M12 * eps_macro.yy + t.Q11 * p;
    out.yy = t.M12 * eps_macro.xx + t.M11 * eps_macro.yy + t.Q11 * p;
    // both off-diagonal slots of the contraction land here
    out.xy = 2.0 * t.M44 * eps_macro.xy;
    return out;
}

Kinematics update_kinematics(MaterialPointState& state, const Sym2& d_eps_micro) {
    Sym2 total = state.eps_micro;
    total.xx += d_eps_micro.xx;
    total.yy += d_eps_micro.yy;
    total.xy += d_eps_micro.xy;
    const Kinematics kin = kinematics_of(total, state.phi_i);
    if (!(kin.jac > 0.0)) {
        char buf[96];
        std::snprintf(buf, sizeof(buf),
                      "increment rejected: J = %.6g <= 0 (time step too large)",
                      kin.jac);
        throw std::runtime_error(buf);
    }
    state.eps_micro = total;
    return kin;
}

double update_porosity(MaterialPointState& state, double jac) {
    if (!(jac > 0.0)) {
        throw std::invalid_argument("porosity update needs J > 0");
    }
    // rigid limit stays exactly at the reference porosity (1 - (1 - phi) * 1
    // would drift by an ulp)
    double phi = jac == 1.0 ? state.phi_i : 1.0 - (1.0 - state.phi_i) * jac;
    if (phi < kPhiLo) {
        phi = kPhiLo;
        ++state.clamp_events;
    } else if (phi > kPhiHi) {
        phi = kPhiHi;
        ++state.clamp_events;
    }
    state.phi = phi;
    return phi;
}

FullTangent neo_hookean_tangent_full(const NeoHookeanParams& params,
                                     const Sym2& e_green) {
    // right Cauchy-Green in plane strain: C = 2E + I, C33 = 1
    const double c11 = 2.0 * e_green.xx + 1.0;
    const double c22 = 2.0 * e_green.yy + 1.0;
    const double c12 = 2.0 * e_green.xy;
    const double det = c11 * c22 - c12 * c12;
    if (!(c11 > 0.0) || !(det > 0.0)) {
        throw std::domain_error(
            "non-positive-definite right Cauchy-Green tensor in the solid "
            "tangent");
    }
    const double i11 = c22 / det, i22 = c11 / det, i12 = -c12 / det;
    const double log_j = 0.5 * std::log(det);

    // d2W/dE2 for W = C10 (I1 - 3) - 2 C10 ln J + ln(J)^2 / D1 with
    // dlnJ/dE = C^-1 and d(C^-1)_ij/dE_kl = -(Ci_ik Ci_jl + Ci_il Ci_jk):
    //   C_ijkl = q (Ci_ik Ci_jl + Ci_il Ci_jk) + (2/D1) Ci_ij Ci_kl,
    //   q = 2 C10 - (2/D1) ln J
    const double q = 2.0 * params.c10 - (2.0 / params.d1) * log_j;
    const double vol = 2.0 / params.d1;
    FullTangent full;
    full.t1111 = 2.0 * q * i11 * i11 + vol * i11 * i11;
    full.t2222 = 2.0 * q * i22 * i22 + vol * i22 * i22;
    full.t1122 = 2.0 * q * i12 * i12 + vol * i11 * i22;
    full.t1212 = q * (i11 * i22 + i12 * i12) + vol * i12 * i12;
    return full;
}

Tangent neo_hookean_tangent(const NeoHookeanParams& params, const Sym2& e_green) {
    const FullTangent full = neo_hookean_tangent_full(params, e_green);
    Tangent tan;
    tan.c11 = 0.5 * (full.t1111 + full.t2222);  // square-symmetric reduction
    tan.c12 = full.t1122;
    tan.c44 = full.t1212;
    return tan;
}

std::pair<double, double> update_solid_moduli(MaterialPointState& state,
                                              const Tangent& tangent) {
    const auto [E, nu] = up::isotropic_moduli(tangent.c11, tangent.c12);
    state.E = E;
    state.nu = nu;
    return {E, nu};
}

namespace {

// refreshes tensors + effective coefficients at the state's (nu, phi, E);
// the stored Q11 carries the 1/E rescaling so localise can use it directly
void refresh_coefficients(MaterialPointState& st,
                          const ann::SurrogateBundle& bundle) {
    const cell::CellTensors raw = bundle.evaluate(st.nu, st.phi);
    st.eff = up::effective_from_cell(raw, st.E, st.nu, st.phi);
    st.tensors = raw;
    st.tensors.Q11 *= cell::kReferenceYoungs / st.E;
}

}  // namespace

MaterialPointState make_point(double phi_i, double E_i, double nu_i,
                              const ann::SurrogateBundle& bundle) {
    if (!(phi_i > 0.0) || !(phi_i < 1.0)) {
        throw std::invalid_argument("reference porosity must lie in (0, 1)");
    }
    const NeoHookeanParams params = NeoHookeanParams::from_initial(E_i, nu_i);
    MaterialPointState st;
    st.phi = phi_i;
    st.phi_i = phi_i;
    st.E_i = E_i;
    st.nu_i = nu_i;
    // the identity-state tangent of the energy, not (E_i, nu_i) verbatim:
    // the volumetric constant makes the zero-strain tangent K I x I + 2 mu II
    const Tangent tan0 = neo_hookean_tangent(params, Sym2{});
    update_solid_moduli(st, tan0);
    refresh_coefficients(st, bundle);
    return st;
}

MaterialPointState remodel_point(const MaterialPointState& state,
                                 const Sym2& d_eps_macro, double d_p,
                                 const ann::SurrogateBundle& bundle,
                                 bool linear_mode, int point_id) {
    if (linear_mode) return state;  // coefficients frozen at initial values
    try {
        MaterialPointState st = state;
        const Sym2 d_micro = localise(st.tensors, d_eps_macro, d_p);
        const Kinematics kin = update_kinematics(st, d_micro);
        update_porosity(st, kin.jac);
        const NeoHookeanParams params =
            NeoHookeanParams::from_initial(st.E_i, st.nu_i);
        const Tangent tan = neo_hookean_tangent(params, kin.e_green);
        update_solid_moduli(st, tan);
        refresh_coefficients(st, bundle);
        return st;
    } catch (const std::exception& e) {
        throw std::runtime_error("material point " + std::to_string(point_id) +
                                 ": " + e.what());
    }
}

}  // namespace mlporo::remodel
