#include "mlporo/macro1d.hpp"

#include <Eigen/SparseLU>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace mlporo::macro {

namespace {

// 2-point Gauss rule on [0, 1]
constexpr double kXi[2] = {0.21132486540518713, 0.7886751345948129};
constexpr double kWq[2] = {0.5, 0.5};

// quadratic shape functions (nodes at 0, 1/2, 1) and reference derivatives
void p2_shapes(double xi, double n[3], double dn[3]) {
    n[0] = (1 - xi) * (1 - 2 * xi);
    n[1] = 4 * xi * (1 - xi);
    n[2] = xi * (2 * xi - 1);
    dn[0] = 4 * xi - 3;
    dn[1] = 4 - 8 * xi;
    dn[2] = 4 * xi - 1;
}

using Trip = Eigen::Triplet<double>;

// raw increment operator (mass row NOT yet negated) and rhs, before the
// essential conditions are applied; kept separate so reactions can be read
// off the unconstrained rows afterwards
struct RawSystem {
    Eigen::SparseMatrix<double> lhs;  // [A -G^T; G C+dtD+R]
    Eigen::VectorXd rhs;
    int n_u = 0, n_p = 0;
};

// nearest quadrature point of the face element, used for the face K11
const up::EffectiveCoefficients& face_eff(const Column& col, bool top) {
    return top ? col.points[2 * col.cfg.n_elements - 1].eff : col.points[0].eff;
}

RawSystem assemble_raw(const Column& col, const MacroState& st, double dt) {
    if (col.cfg.mech_bottom.kind != MechKind::kFixed &&
        col.cfg.mech_top.kind != MechKind::kFixed) {
        // a floating column has a rigid displacement mode; with compatible
        // tractions the factorization would even "succeed", so reject the
        // configuration itself rather than trusting pivot magnitudes
        throw std::runtime_error(
            "singular increment system: boundary conditions under-constrain "
            "the column");
    }
    const int ne = col.cfg.n_elements;
    const int nu = col.n_u_nodes(), np = col.n_p_nodes();
    const double h = col.h();

    RawSystem sys;
    sys.n_u = nu;
    sys.n_p = np;
    sys.rhs = Eigen::VectorXd::Zero(nu + np);
    std::vector<Trip> trips;
    trips.reserve(ne * 40);

    for (int e = 0; e < ne; ++e) {
        const int un[3] = {2 * e, 2 * e + 1, 2 * e + 2};
        const int pn[2] = {e, e + 1};
        for (int q = 0; q < 2; ++q) {
            const auto& eff = col.points[2 * e + q].eff;
            double n[3], dn[3];
            p2_shapes(kXi[q], n, dn);
            const double lp[2] = {1 - kXi[q], kXi[q]};
            const double dlp[2] = {-1.0, 1.0};
            const double w = kWq[q] * h;

            // current totals at the point
            double du_dx = 0, p_here = 0, dp_dx = 0;
            for (int i = 0; i < 3; ++i) du_dx += st.u[un[i]] * dn[i] / h;
            for (int k = 0; k < 2; ++k) {
                p_here += st.p[pn[k]] * lp[k];
                dp_dx += st.p[pn[k]] * dlp[k] / h;
            }

            for (int i = 0; i < 3; ++i) {
                // momentum: stiffness and full residual of the totals
                for (int j = 0; j < 3; ++j) {
                    trips.emplace_back(un[i], un[j],
                                       w * eff.C11 * dn[i] * dn[j] / (h * h));
                }
                for (int k = 0; k < 2; ++k) {
                    const double g = w * eff.alpha * lp[k] * dn[i] / h;
                    trips.emplace_back(un[i], nu + pn[k], -g);  // -G^T
                    trips.emplace_back(nu + pn[k], un[i], g);   // G
                }
                sys.rhs[un[i]] -=
                    w * (eff.C11 * du_dx - eff.alpha * p_here) * dn[i] / h;
            }
            for (int k = 0; k < 2; ++k) {
                // mass: storage + conduction, and the conduction of the totals
                for (int l = 0; l < 2; ++l) {
                    const double c =
                        w * lp[k] * lp[l] / eff.biot_modulus +
                        dt * w * eff.K11 * dlp[k] * dlp[l] / (h * h);
                    trips.emplace_back(nu + pn[k], nu + pn[l], c);
                }
                sys.rhs[nu + pn[k]] -= dt * w * eff.K11 * dp_dx * dlp[k] / h;
            }
        }
    }

    // face terms: applied tractions and Robin drainage
    if (col.cfg.mech_bottom.kind == MechKind::kTraction) {
        sys.rhs[0] += col.cfg.mech_bottom.value;
    }
    if (col.cfg.mech_top.kind == MechKind::kTraction) {
        sys.rhs[nu - 1] += col.cfg.mech_top.value;
    }
    const HydroBc* hbc[2] = {&col.cfg.hydro_bottom, &col.cfg.hydro_top};
    const int hnode[2] = {0, np - 1};
    for (int f = 0; f < 2; ++f) {
        if (hbc[f]->kind != HydroKind::kFreeDrainage) continue;
        if (!(hbc[f]->dx > 0.0)) {
            throw std::invalid_argument("free drainage needs a positive dx");
        }
        const double k_face = face_eff(col, f == 1).K11;
        const double c = dt * k_face / hbc[f]->dx;
        trips.emplace_back(nu + hnode[f], nu + hnode[f], c);
        sys.rhs[nu + hnode[f]] -= c * (st.p[hnode[f]] - hbc[f]->env);
    }

    sys.rhs.segment(nu, np) += st.carry_p;

    sys.lhs.resize(nu + np, nu + np);
    sys.lhs.setFromTriplets(trips.begin(), trips.end());
    return sys;
}

struct Constraint {
    int dof;
    double value;  // increment value
};

std::vector<Constraint> essential_constraints(const Column& col,
                                              const MacroState& st) {
    const int nu = col.n_u_nodes(), np = col.n_p_nodes();
    std::vector<Constraint> out;
    if (col.cfg.mech_bottom.kind == MechKind::kFixed) {
        out.push_back({0, col.cfg.mech_bottom.value - st.u[0]});
    }
    if (col.cfg.mech_top.kind == MechKind::kFixed) {
        out.push_back({nu - 1, col.cfg.mech_top.value - st.u[nu - 1]});
    }
    if (col.cfg.hydro_bottom.kind == HydroKind::kPressure) {
        out.push_back({nu, col.cfg.hydro_bottom.value - st.p[0]});
    }
    if (col.cfg.hydro_top.kind == HydroKind::kPressure) {
        out.push_back({nu + np - 1, col.cfg.hydro_top.value - st.p[np - 1]});
    }
    return out;
}

// symmetric-blocked constrained system: mass rows negated, essential dofs
// eliminated (column contribution moved to the rhs)
IncrementSystem constrain(const RawSystem& raw,
                          const std::vector<Constraint>& cons) {
    Eigen::MatrixXd dense = Eigen::MatrixXd(raw.lhs);
    Eigen::VectorXd rhs = raw.rhs;
    dense.bottomRows(raw.n_p) *= -1.0;
    rhs.tail(raw.n_p) *= -1.0;
    for (const auto& c : cons) {
        rhs -= dense.col(c.dof) * c.value;
        dense.row(c.dof).setZero();
        dense.col(c.dof).setZero();
        dense(c.dof, c.dof) = 1.0;
        rhs[c.dof] = c.value;
    }
    IncrementSystem sys;
    sys.n_u = raw.n_u;
    sys.n_p = raw.n_p;
    sys.lhs = dense.sparseView();
    sys.rhs = rhs;
    return sys;
}

Eigen::VectorXd solve_increment(const IncrementSystem& sys) {
    Eigen::SparseMatrix<double> lhs = sys.lhs;
    lhs.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(lhs);
    if (lu.info() != Eigen::Success) {
        throw std::runtime_error(
            "singular increment system: boundary conditions under-constrain "
            "the column");
    }
    Eigen::VectorXd x = lu.solve(sys.rhs);
    const double defect = (sys.lhs * x - sys.rhs).norm();
    if (!(defect <= 1e-8 * (1.0 + sys.rhs.norm()))) {
        throw std::runtime_error(
            "singular increment system: boundary conditions under-constrain "
            "the column");
    }
    return x;
}

}  // namespace

Column::Column(const ColumnConfig& config, const ann::SurrogateBundle& bundle)
    : cfg(config) {
    if (cfg.n_elements < 4) {
        throw std::invalid_argument("column needs at least 4 elements");
    }
    if (!(cfg.length > 0.0)) {
        throw std::invalid_argument("column length must be positive");
    }
    points.reserve(2 * cfg.n_elements);
    const auto fresh = remodel::make_point(cfg.phi_i, cfg.E_i, cfg.nu_i, bundle);
    for (int i = 0; i < 2 * cfg.n_elements; ++i) points.push_back(fresh);
}

double Column::x_qp(int e, int q) const { return (e + kXi[q]) * h(); }

MacroState make_state(const Column& column) {
    MacroState st;
    st.u = Eigen::VectorXd::Zero(column.n_u_nodes());
    st.p = Eigen::VectorXd::Zero(column.n_p_nodes());
    st.du_dt = Eigen::VectorXd::Zero(column.n_u_nodes());
    st.dp_dt = Eigen::VectorXd::Zero(column.n_p_nodes());
    st.carry_p = Eigen::VectorXd::Zero(column.n_p_nodes());
    return st;
}

IncrementSystem assemble_increment(const Column& column, const MacroState& state,
                                   double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("time increment must be positive");
    return constrain(assemble_raw(column, state, dt),
                     essential_constraints(column, state));
}

double free_drainage_flux(const up::EffectiveCoefficients& eff, double p_surface,
                          double env_pressure, double dx) {
    if (!(dx > 0.0)) throw std::invalid_argument("free drainage needs a positive dx");
    return eff.K11 * (p_surface - env_pressure) / dx;
}

namespace {

void step_impl(Column& col, MacroState& st, double dt,
               const ann::SurrogateBundle& bundle, bool linear_mode,
               int depth) {
    const int nu = col.n_u_nodes(), np = col.n_p_nodes();
    const double h = col.h();

    const RawSystem raw = assemble_raw(col, st, dt);
    const auto cons = essential_constraints(col, st);
    const IncrementSystem sys = constrain(raw, cons);
    const Eigen::VectorXd x = solve_increment(sys);
    const Eigen::VectorXd du = x.head(nu);
    const Eigen::VectorXd dp = x.tail(np);

    // remodel on copies first: a rejected increment must leave everything
    // untouched so the halved retry starts clean
    std::vector<remodel::MaterialPointState> new_points = col.points;
    if (!linear_mode) {
        try {
            for (int e = 0; e < col.cfg.n_elements; ++e) {
                for (int q = 0; q < 2; ++q) {
                    const int id = 2 * e + q;
                    double n[3], dn[3];
                    p2_shapes(kXi[q], n, dn);
                    double deps = 0.0;
                    for (int i = 0; i < 3; ++i) deps += du[2 * e + i] * dn[i] / h;
                    const double dp_here =
                        dp[e] * (1 - kXi[q]) + dp[e + 1] * kXi[q];
                    new_points[id] = remodel::remodel_point(
                        new_points[id], {deps, 0.0, 0.0}, dp_here, bundle,
                        false, id);
                }
            }
        } catch (const std::exception&) {
            if (depth >= 5) throw;
            // halve the increment and cover dt with two sub-steps
            st.dt_halvings += 1;
            step_impl(col, st, 0.5 * dt, bundle, linear_mode, depth + 1);
            step_impl(col, st, 0.5 * dt, bundle, linear_mode, depth + 1);
            return;
        }
    }

    // commit totals; essential values are pinned exactly
    st.u += du;
    st.p += dp;
    if (col.cfg.mech_bottom.kind == MechKind::kFixed)
        st.u[0] = col.cfg.mech_bottom.value;
    if (col.cfg.mech_top.kind == MechKind::kFixed)
        st.u[nu - 1] = col.cfg.mech_top.value;
    if (col.cfg.hydro_bottom.kind == HydroKind::kPressure)
        st.p[0] = col.cfg.hydro_bottom.value;
    if (col.cfg.hydro_top.kind == HydroKind::kPressure)
        st.p[np - 1] = col.cfg.hydro_top.value;
    st.du_dt = du / dt;
    st.dp_dt = dp / dt;
    st.t += dt;

    // post-solve residual of the constrained system (coefficients as solved)
    const Eigen::VectorXd res = sys.lhs * x - sys.rhs;
    st.carry_u_norm = res.head(nu).norm();
    st.carry_p_norm = res.tail(np).norm();

    // drainage accounting from the unconstrained mass rows: a prescribed
    // pressure node's row defect is exactly the volume that left through it
    const Eigen::VectorXd full = raw.lhs * x - raw.rhs;
    double drained[2] = {0.0, 0.0};
    const HydroBc* hbc[2] = {&col.cfg.hydro_bottom, &col.cfg.hydro_top};
    const int hnode[2] = {0, np - 1};
    for (int f = 0; f < 2; ++f) {
        switch (hbc[f]->kind) {
            case HydroKind::kImpermeable:
                break;
            case HydroKind::kPressure:
                drained[f] = -full[nu + hnode[f]];
                break;
            case HydroKind::kFreeDrainage:
                drained[f] = dt * face_eff(col, f == 1).K11 *
                             (st.p[hnode[f]] - hbc[f]->env) / hbc[f]->dx;
                break;
        }
    }
    st.drained_bottom += drained[0];
    st.drained_top += drained[1];

    // storage and coupling increments (mass rows summed against q = 1)
    double storage = 0.0, coupling = 0.0;
    for (int e = 0; e < col.cfg.n_elements; ++e) {
        for (int q = 0; q < 2; ++q) {
            const auto& eff = col.points[2 * e + q].eff;
            double n[3], dn[3];
            p2_shapes(kXi[q], n, dn);
            const double w = kWq[q] * h;
            double deps = 0.0;
            for (int i = 0; i < 3; ++i) deps += du[2 * e + i] * dn[i] / h;
            const double dp_here = dp[e] * (1 - kXi[q]) + dp[e + 1] * kXi[q];
            storage += w * dp_here / eff.biot_modulus;
            coupling += w * eff.alpha * deps;
        }
    }
    st.storage_change += storage;
    st.coupling_change += coupling;

    if (!linear_mode) {
        col.points = std::move(new_points);
        // mass-equation defect with the freshly remodelled coefficients,
        // carried into the next increment so residuals never accumulate
        // old totals, old (already consumed) carry, new coefficients: any
        // defect left is purely the remodelling-induced coefficient change
        MacroState prev = st;
        prev.u -= du;
        prev.p -= dp;
        const RawSystem post = assemble_raw(col, prev, dt);
        Eigen::VectorXd defect = post.rhs.tail(np) - (post.lhs * x).tail(np);
        // prescribed-pressure rows carry nothing (their value is pinned)
        if (col.cfg.hydro_bottom.kind == HydroKind::kPressure) defect[0] = 0.0;
        if (col.cfg.hydro_top.kind == HydroKind::kPressure) defect[np - 1] = 0.0;
        st.carry_p = defect;
    } else {
        st.carry_p.setZero();
    }
}

}  // namespace

void step(Column& column, MacroState& state, double dt,
          const ann::SurrogateBundle& bundle, bool linear_mode) {
    if (!(dt > 0.0)) throw std::invalid_argument("time increment must be positive");
    step_impl(column, state, dt, bundle, linear_mode, 0);
}

double mass_balance_defect(const MacroState& state) {
    const double drained = state.drained_top + state.drained_bottom;
    const double sum = state.storage_change + state.coupling_change + drained;
    const double scale =
        std::max({std::abs(state.storage_change), std::abs(state.coupling_change),
                  std::abs(drained), 1e-300});
    return std::abs(sum) / scale;
}

void append_timeseries_csv(std::ostream& out, const Column& column,
                           const MacroState& state) {
    char buf[160];
    for (int k = 0; k < column.n_p_nodes(); ++k) {
        std::snprintf(buf, sizeof(buf), "%.9g,%d,%.9g,%.12g,%.12g\n", state.t, k,
                      column.x_p(k), state.u[2 * k], state.p[k]);
        out << buf;
    }
}

void append_quadrature_csv(std::ostream& out, const Column& column,
                           const MacroState& state) {
    char buf[256];
    for (int e = 0; e < column.cfg.n_elements; ++e) {
        for (int q = 0; q < 2; ++q) {
            const int id = 2 * e + q;
            const auto& pt = column.points[id];
            std::snprintf(buf, sizeof(buf),
                          "%.9g,%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                          state.t, id, column.x_qp(e, q), pt.phi, pt.E, pt.nu,
                          pt.eff.C11, pt.eff.alpha, pt.eff.biot_modulus,
                          pt.eff.K11);
            out << buf;
        }
    }
}

}  // namespace mlporo::macro
