#pragma once

// Incremental 1D finite-element solver for the homogenised u-p column.
//
// Unknowns per increment (backward differences in time, coefficients frozen
// at the intermediate configuration):
//
//   momentum:  d/dx (C11_eff du/dx - alpha p) + t_bar on the loaded face
//   mass:      (1/M) dp/dt + alpha d(eps)/dt - d/dx (K11 dp/dx) = 0
//
// Displacement is quadratic per element, pressure linear (inf-sup stable
// pair). The momentum equation re-targets the full residual of the totals
// every increment, and the mass equation carries the defect introduced by
// coefficient updates, so residuals never accumulate across increments.
//
// Column geometry runs from x = 0 (bottom) to x = length (top); each
// element owns two quadrature points with their own remodelling state.

#include <Eigen/Dense>
#include <iosfwd>
#include <vector>

#include "mlporo/remodel.hpp"
#include "mlporo/surrogate.hpp"

namespace mlporo::macro {

enum class MechKind { kFixed, kTraction };
enum class HydroKind { kPressure, kImpermeable, kFreeDrainage };

/// Mechanical face condition: prescribed displacement or applied axial
/// traction (x-component of the traction vector on that face).
struct MechBc {
    MechKind kind = MechKind::kTraction;
    double value = 0.0;
};

/// Hydraulic face condition. kPressure prescribes p; kFreeDrainage is the
/// Robin leakage v = K11 (p - env) / dx through a drainage length dx.
struct HydroBc {
    HydroKind kind = HydroKind::kImpermeable;
    double value = 0.0;  ///< prescribed pressure (kPressure)
    double dx = 0.0;     ///< drainage length (kFreeDrainage)
    double env = 0.0;    ///< environment pressure (kFreeDrainage)
};

struct ColumnConfig {
    double length = 1.0;
    int n_elements = 60;
    double phi_i = 0.3;
    double E_i = 15.0;
    double nu_i = 0.3;
    MechBc mech_bottom{MechKind::kFixed, 0.0};
    MechBc mech_top{MechKind::kTraction, 0.0};
    HydroBc hydro_bottom{HydroKind::kImpermeable};
    HydroBc hydro_top{HydroKind::kPressure, 0.0, 0.0, 0.0};
};

/// Column mesh plus per-quadrature-point material state.
class Column {
  public:
    Column(const ColumnConfig& config, const ann::SurrogateBundle& bundle);

    ColumnConfig cfg;
    std::vector<remodel::MaterialPointState> points;  ///< 2 per element

    int n_elements() const { return cfg.n_elements; }
    int n_u_nodes() const { return 2 * cfg.n_elements + 1; }
    int n_p_nodes() const { return cfg.n_elements + 1; }
    double h() const { return cfg.length / cfg.n_elements; }
    double x_u(int node) const { return 0.5 * h() * node; }
    double x_p(int node) const { return h() * node; }
    /// coordinate of quadrature point q (0..1) of element e
    double x_qp(int e, int q) const;
};

struct MacroState {
    Eigen::VectorXd u;  ///< nodal displacement totals (quadratic grid)
    Eigen::VectorXd p;  ///< nodal pressure totals (linear grid)
    Eigen::VectorXd du_dt, dp_dt;  ///< rates of the last increment
    double t = 0.0;
    Eigen::VectorXd carry_p;   ///< mass-equation defect fed to the next rhs
    double carry_u_norm = 0.0; ///< post-solve momentum residual norm
    double carry_p_norm = 0.0; ///< post-solve mass residual norm
    double drained_top = 0.0;     ///< cumulative drained volume, top face
    double drained_bottom = 0.0;  ///< cumulative drained volume, bottom face
    double storage_change = 0.0;  ///< cumulative (1/M) dp storage
    double coupling_change = 0.0; ///< cumulative alpha d(eps) contraction
    int dt_halvings = 0;          ///< total rejected-increment halvings
};

/// Fresh state (zero fields) sized for the column.
MacroState make_state(const Column& column);

/// One increment's linear system for (du, dp), symmetric-blocked, with
/// essential conditions eliminated. Exposed for the zero-load patch test.
struct IncrementSystem {
    Eigen::SparseMatrix<double> lhs;
    Eigen::VectorXd rhs;
    int n_u = 0, n_p = 0;
};
IncrementSystem assemble_increment(const Column& column, const MacroState& state,
                                   double dt);

/// Robin boundary flux K11 (p_surface - env) / dx.
double free_drainage_flux(const up::EffectiveCoefficients& eff, double p_surface,
                          double env_pressure, double dx);

/// Advances the state by exactly dt. Solves the increment, updates totals
/// and drainage accounting, and (unless linear_mode) remodels every
/// quadrature point with the increment's strain and pressure changes.
/// A remodelling rejection (J <= 0) halves the increment and retries, at
/// most five times, before rethrowing. Throws on singular systems
/// (boundary-condition under-constraint).
void step(Column& column, MacroState& state, double dt,
          const ann::SurrogateBundle& bundle, bool linear_mode);

/// Global mass-balance defect of the run so far:
/// storage + coupling + drained volumes, relative to the largest term.
double mass_balance_defect(const MacroState& state);

/// Appends `t,node,x,u,p` rows (pressure nodes; u interpolated there).
void append_timeseries_csv(std::ostream& out, const Column& column,
                           const MacroState& state);
/// Appends `t,qp,x,phi,E,nu,C11_eff,alpha,M_biot,K11` rows.
void append_quadrature_csv(std::ostream& out, const Column& column,
                           const MacroState& state);

}  // namespace mlporo::macro
