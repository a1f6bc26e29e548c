#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

#include "mlporo/macro1d.hpp"
#include "testutil.hpp"

using namespace mlporo;
using namespace mlporo::macro;
using testutil::constant_bundle;

namespace {

// 200-term single-drainage consolidation series, drainage at x = L:
// p(x, t) / p0 with Tv = c_v t / L^2
double series_p(double x, double tv, double len) {
    double s = 0.0;
    for (int m = 0; m < 200; ++m) {
        const double lam = (2 * m + 1) * M_PI / 2.0;
        s += (2.0 * ((m % 2) ? -1.0 : 1.0) / lam) * std::cos(lam * x / len) *
             std::exp(-lam * lam * tv);
    }
    return s;
}

// degree of consolidation 1 - sum 2/lam^2 exp(-lam^2 Tv)
double series_u(double tv) {
    double s = 0.0;
    for (int m = 0; m < 200; ++m) {
        const double lam = (2 * m + 1) * M_PI / 2.0;
        s += 2.0 / (lam * lam) * std::exp(-lam * lam * tv);
    }
    return 1.0 - s;
}

ColumnConfig consolidation_config(int n, double traction) {
    ColumnConfig cfg;
    cfg.n_elements = n;
    cfg.mech_top = {MechKind::kTraction, traction};
    return cfg;
}

struct OracleNumbers {
    double p0, cv, t_char, u_drained, u_undrained;
};

OracleNumbers oracle_numbers(const Column& col, double load) {
    const auto& eff = col.points[0].eff;
    const auto und = up::undrained_tensor(eff);
    OracleNumbers o;
    o.p0 = eff.alpha * eff.biot_modulus * load / und[0];
    o.cv = eff.K11 * eff.biot_modulus * eff.C11 / und[0];
    o.t_char = col.cfg.length * col.cfg.length / o.cv;
    o.u_drained = -load * col.cfg.length / eff.C11;
    o.u_undrained = -load * col.cfg.length / und[0];
    return o;
}

}  // namespace

TEST_CASE("macro: column geometry and validation") {
    const auto bundle = constant_bundle();
    ColumnConfig cfg;
    cfg.n_elements = 8;
    cfg.length = 2.0;
    Column col(cfg, bundle);

    CHECK(col.n_elements() == 8);
    CHECK(col.n_u_nodes() == 17);
    CHECK(col.n_p_nodes() == 9);
    CHECK(col.h() == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(col.x_u(0) == 0.0);
    CHECK(col.x_u(16) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(col.x_u(1) == doctest::Approx(0.125).epsilon(1e-15));
    CHECK(col.x_p(4) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(col.points.size() == 16);
    // quadrature points sit strictly inside their element
    CHECK(col.x_qp(0, 0) > 0.0);
    CHECK(col.x_qp(0, 0) < col.x_qp(0, 1));
    CHECK(col.x_qp(0, 1) < 0.25);
    CHECK(col.x_qp(7, 1) < 2.0);

    ColumnConfig bad = cfg;
    bad.n_elements = 3;
    CHECK_THROWS_AS(Column(bad, bundle), std::invalid_argument);
    bad = cfg;
    bad.length = 0.0;
    CHECK_THROWS_AS(Column(bad, bundle), std::invalid_argument);

    const MacroState st = make_state(col);
    CHECK(st.u.size() == 17);
    CHECK(st.p.size() == 9);
    CHECK(st.carry_p.size() == 9);
    CHECK(st.u.norm() == 0.0);
    CHECK(st.t == 0.0);
}

TEST_CASE("macro: increment system is symmetric with eliminated rows") {
    const auto bundle = constant_bundle();
    Column col(consolidation_config(8, -0.1), bundle);
    const MacroState st = make_state(col);

    const IncrementSystem sys = assemble_increment(col, st, 1.0);
    CHECK(sys.n_u == 17);
    CHECK(sys.n_p == 9);
    CHECK(sys.lhs.rows() == 26);

    const Eigen::MatrixXd dense(sys.lhs);
    const double scale = dense.cwiseAbs().maxCoeff();
    CHECK((dense - dense.transpose()).cwiseAbs().maxCoeff() <= 1e-14 * scale);
    // eliminated rows: fixed bottom displacement and prescribed top pressure
    CHECK(dense(0, 0) == 1.0);
    CHECK(dense.row(0).cwiseAbs().sum() == 1.0);
    CHECK(dense(25, 25) == 1.0);

    CHECK_THROWS_AS(assemble_increment(col, st, 0.0), std::invalid_argument);
}

TEST_CASE("macro: zero load leaves the column untouched") {
    const auto bundle = constant_bundle();
    Column col(consolidation_config(8, 0.0), bundle);
    // construction already lands E on the identity-state tangent modulus
    const double e0 = col.points[0].E;
    MacroState st = make_state(col);
    for (int k = 0; k < 5; ++k) step(col, st, 3.0, bundle, false);
    CHECK(st.u.cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(st.p.cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(st.drained_top == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(st.t == doctest::Approx(15.0).epsilon(1e-15));
    for (const auto& pt : col.points) {
        CHECK(pt.phi == doctest::Approx(0.3).epsilon(1e-13));
        CHECK(pt.E == doctest::Approx(e0).epsilon(1e-13));
    }
}

TEST_CASE("macro: consolidation transient matches the analytic series") {
    const auto bundle = constant_bundle();
    const double load = 0.1;
    Column col(consolidation_config(60, -load), bundle);
    const auto& eff = col.points[0].eff;
    const auto num = oracle_numbers(col, load);
    MacroState st = make_state(col);

    const int nsteps = 1000;
    const double dt = 0.5 * num.t_char / nsteps;
    const double probes[3] = {0.05, 0.2, 0.5};
    int pi = 0;
    for (int k = 1; k <= nsteps; ++k) {
        step(col, st, dt, bundle, true);
        const double tv = num.cv * st.t;
        if (pi >= 3 || tv < probes[pi] - 1e-12) continue;

        double el2 = 0.0, sl2 = 0.0, emax = 0.0;
        for (int n = 0; n < col.n_p_nodes() - 1; ++n) {
            const double exact = num.p0 * series_p(col.x_p(n), tv, 1.0);
            el2 += (st.p[n] - exact) * (st.p[n] - exact);
            sl2 += exact * exact;
            if (std::abs(exact) > 0.05 * num.p0)
                emax = std::max(emax,
                                std::abs(st.p[n] - exact) / std::abs(exact));
        }
        CHECK(std::sqrt(el2 / sl2) <= 3e-3);
        CHECK(emax <= 1e-2);

        // settlement = drained share U + undrained share (1 - U)
        const double uu = series_u(tv);
        const double uex = num.u_drained * uu + num.u_undrained * (1.0 - uu);
        CHECK(st.u[col.n_u_nodes() - 1] ==
              doctest::Approx(uex).epsilon(1e-3));
        ++pi;
    }
    CHECK(pi == 3);

    // bookkeeping along the way: linear mode balances to round-off
    CHECK(mass_balance_defect(st) <= 1e-10);
    CHECK(st.carry_p_norm <= 1e-12);
    CHECK(st.drained_bottom == 0.0);
    CHECK(st.drained_top > 0.0);

    // run to the drained steady state with huge increments
    for (int k = 0; k < 4; ++k) step(col, st, 100 * num.t_char, bundle, true);
    double lin_err = 0.0;
    for (int n = 0; n < col.n_u_nodes(); ++n) {
        const double exact = num.u_drained * col.x_u(n) / col.cfg.length;
        lin_err = std::max(lin_err, std::abs(st.u[n] - exact));
    }
    const double umax = std::abs(st.u[col.n_u_nodes() - 1]);
    CHECK(lin_err <= 1e-9 * umax);
    CHECK(st.p.cwiseAbs().maxCoeff() <= 1e-9 * num.p0);

    // everything squeezed out equals alpha * settlement, and the books close
    CHECK(st.drained_top + st.drained_bottom ==
          doctest::Approx(eff.alpha * load / eff.C11).epsilon(1e-8));
    CHECK(mass_balance_defect(st) <= 1e-9);

    // steady state is a fixed point of further stepping
    const Eigen::VectorXd u_before = st.u, p_before = st.p;
    step(col, st, 100 * num.t_char, bundle, true);
    CHECK((st.u - u_before).norm() <= 1e-10);
    CHECK((st.p - p_before).norm() <= 1e-10);
}

TEST_CASE("macro: first increment reproduces the undrained response") {
    const auto bundle = constant_bundle();
    const double load = 0.1;

    // fine grid: the pinned-pressure boundary layer controls the error
    Column col(consolidation_config(120, -load), bundle);
    const auto num = oracle_numbers(col, load);
    MacroState st = make_state(col);
    step(col, st, 1e-6 * num.t_char, bundle, true);
    CHECK(st.p[col.n_p_nodes() / 2] ==
          doctest::Approx(num.p0).epsilon(1e-10));
    CHECK(st.u[col.n_u_nodes() - 1] ==
          doctest::Approx(num.u_undrained).epsilon(1e-2));

    // the settlement error shrinks monotonically as the increment shrinks
    double prev = 1e30;
    for (double f : {1e-4, 1e-5, 1e-6}) {
        Column c(consolidation_config(60, -load), bundle);
        MacroState s = make_state(c);
        step(c, s, f * num.t_char, bundle, true);
        const double err =
            std::abs(s.u[c.n_u_nodes() - 1] - num.u_undrained);
        CHECK(err < prev);
        prev = err;
    }
}

TEST_CASE("macro: linear mode superposes loads exactly") {
    const auto bundle = constant_bundle();
    Column a(consolidation_config(20, -0.1), bundle);
    Column b(consolidation_config(20, -0.2), bundle);
    MacroState sa = make_state(a), sb = make_state(b);
    const double dt = oracle_numbers(a, 0.1).t_char / 50;
    for (int k = 0; k < 5; ++k) {
        step(a, sa, dt, bundle, true);
        step(b, sb, dt, bundle, true);
    }
    CHECK((2.0 * sa.u - sb.u).norm() <= 1e-13 * sb.u.norm());
    CHECK((2.0 * sa.p - sb.p).norm() <= 1e-13 * sb.p.norm());
}

TEST_CASE("macro: held load with sealed ends is step-size invariant") {
    // with no drainage the increment equations lose their time dependence,
    // so one large step and two half steps land on the same equilibrium
    const auto bundle = constant_bundle();
    ColumnConfig cfg = consolidation_config(10, -0.1);
    cfg.hydro_top = {HydroKind::kImpermeable};
    Column a(cfg, bundle), b(cfg, bundle);
    MacroState sa = make_state(a), sb = make_state(b);
    step(a, sa, 2.0, bundle, true);
    step(b, sb, 1.0, bundle, true);
    step(b, sb, 1.0, bundle, true);
    CHECK((sa.u - sb.u).norm() <= 1e-13 * (sa.u.norm() + 1e-30));
    CHECK((sa.p - sb.p).norm() <= 1e-13 * (sa.p.norm() + 1e-30));
    CHECK(sa.p[0] > 0.0);  // trapped fluid stays pressurised
    CHECK(sa.drained_top == 0.0);
    CHECK(sa.drained_bottom == 0.0);
}

TEST_CASE("macro: prescribed top displacement is pinned exactly") {
    const auto bundle = constant_bundle();
    ColumnConfig cfg;
    cfg.n_elements = 10;
    cfg.mech_top = {MechKind::kFixed, -0.01};
    Column col(cfg, bundle);
    const auto num = oracle_numbers(col, 0.1);
    MacroState st = make_state(col);
    for (int k = 0; k < 4; ++k) {
        step(col, st, 100 * num.t_char, bundle, true);
        CHECK(st.u[col.n_u_nodes() - 1] == -0.01);
        CHECK(st.u[0] == 0.0);
    }
    // drained steady state under uniform compression: linear profile
    for (int n = 0; n < col.n_u_nodes(); ++n) {
        CHECK(st.u[n] ==
              doctest::Approx(-0.01 * col.x_u(n)).epsilon(1e-9));
    }
    CHECK(st.p.cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("macro: free drainage approaches the prescribed-pressure limit") {
    const auto bundle = constant_bundle();
    const double load = 0.1;
    const ColumnConfig dir_cfg = consolidation_config(30, -load);
    ColumnConfig rob_cfg = dir_cfg;
    rob_cfg.hydro_top = {HydroKind::kFreeDrainage, 0.0, 1e-8, 0.0};

    Column a(dir_cfg, bundle), b(rob_cfg, bundle);
    const auto num = oracle_numbers(a, load);
    MacroState sa = make_state(a), sb = make_state(b);
    const double dt = 0.2 * num.t_char / 200;
    for (int k = 0; k < 200; ++k) {
        step(a, sa, dt, bundle, true);
        step(b, sb, dt, bundle, true);
    }
    CHECK((sa.p - sb.p).norm() <= 1e-6 * sa.p.norm());
    CHECK(sb.drained_top ==
          doctest::Approx(sa.drained_top).epsilon(1e-6));
    CHECK(mass_balance_defect(sb) <= 1e-10);

    // a long drainage path releases the same fluid more slowly
    ColumnConfig slow_cfg = dir_cfg;
    slow_cfg.hydro_top = {HydroKind::kFreeDrainage, 0.0, 0.5, 0.0};
    Column c(slow_cfg, bundle);
    MacroState sc = make_state(c);
    for (int k = 0; k < 200; ++k) step(c, sc, dt, bundle, true);
    CHECK(sc.drained_top > 0.0);
    CHECK(sc.drained_top < sa.drained_top);
    CHECK(sc.p[c.n_p_nodes() - 1] > 0.0);  // surface pressure not pinned
    CHECK(mass_balance_defect(sc) <= 1e-10);
}

TEST_CASE("macro: free drainage flux arithmetic") {
    up::EffectiveCoefficients eff;
    eff.K11 = 2.0;
    CHECK(free_drainage_flux(eff, 3.0, 1.0, 0.5) ==
          doctest::Approx(8.0).epsilon(1e-15));
    CHECK(free_drainage_flux(eff, 1.0, 1.0, 0.5) == 0.0);
    CHECK(free_drainage_flux(eff, 0.0, 1.0, 0.5) < 0.0);
    CHECK_THROWS_AS(free_drainage_flux(eff, 1.0, 0.0, 0.0),
                    std::invalid_argument);

    const auto bundle = constant_bundle();
    ColumnConfig cfg = consolidation_config(8, -0.1);
    cfg.hydro_top = {HydroKind::kFreeDrainage, 0.0, 0.0, 0.0};
    Column col(cfg, bundle);
    MacroState st = make_state(col);
    CHECK_THROWS_AS(step(col, st, 1.0, bundle, true), std::invalid_argument);
}

TEST_CASE("macro: implicit increments converge first order in time") {
    const auto bundle = constant_bundle();
    const ColumnConfig cfg = consolidation_config(16, -0.1);
    const auto num = oracle_numbers(Column(cfg, bundle), 0.1);
    auto settle = [&](int n_steps) {
        Column c(cfg, bundle);
        MacroState s = make_state(c);
        const double total = 0.1 * num.t_char;
        for (int k = 0; k < n_steps; ++k)
            step(c, s, total / n_steps, bundle, true);
        return s.u[c.n_u_nodes() - 1];
    };
    const double ref = settle(640);
    const double e40 = std::abs(settle(40) - ref);
    const double e80 = std::abs(settle(80) - ref);
    CHECK(e40 / e80 >= 1.7);
    CHECK(e40 / e80 <= 2.6);
}

TEST_CASE("macro: remodelling densifies and rebalances the books") {
    const auto bundle = constant_bundle();
    const ColumnConfig cfg = consolidation_config(16, -0.5);
    Column lin(cfg, bundle), nl(cfg, bundle);
    const double e0 = lin.points[0].E;
    const auto num = oracle_numbers(lin, 0.5);
    MacroState sl = make_state(lin), sn = make_state(nl);
    const double dt = num.t_char / 40;
    for (int k = 0; k < 160; ++k) {
        step(lin, sl, dt, bundle, true);
        step(nl, sn, dt, bundle, false);
    }
    const int top = lin.n_u_nodes() - 1;

    // compression closes pores; the negative localisation tensors turn the
    // macro contraction into a mildly tensile solid-phase corrector, which
    // softens the solid: the evolving column settles slightly further
    for (const auto& pt : nl.points) {
        CHECK(pt.phi < cfg.phi_i);
        CHECK(pt.phi > 0.25);
        CHECK(pt.E < e0);
        CHECK(pt.E > 13.0);
        CHECK(pt.clamp_events == 0);
    }
    CHECK(std::abs(sn.u[top]) > std::abs(sl.u[top]));
    CHECK(sn.drained_top > sl.drained_top);
    CHECK(sn.dt_halvings == 0);

    // linear run stays on the frozen material
    for (const auto& pt : lin.points) {
        CHECK(pt.phi == cfg.phi_i);
        CHECK(pt.E == e0);
    }

    // coefficient jumps are carried, so the global books stay near closed
    CHECK(mass_balance_defect(sn) <= 1e-2);
    CHECK(mass_balance_defect(sl) <= 1e-10);
}

TEST_CASE("macro: rejected increments halve and finally rethrow") {
    const auto bundle = constant_bundle();
    // strong tension drives the updated Poisson ratio out of the surrogate
    // box on the first sub-increment at every depth, so nothing commits
    Column col(consolidation_config(8, 50.0), bundle);
    MacroState st = make_state(col);
    bool threw = false;
    try {
        step(col, st, 1.0, bundle, false);
    } catch (const std::runtime_error& e) {
        threw = true;
        CHECK(std::string(e.what()).rfind("material point", 0) == 0);
    }
    CHECK(threw);
    CHECK(st.t == 0.0);
    CHECK(st.u.norm() == 0.0);
    CHECK(st.p.norm() == 0.0);
    CHECK(st.dt_halvings == 5);
    for (const auto& pt : col.points) CHECK(pt.phi == 0.3);
}

TEST_CASE("macro: under-constrained column is reported") {
    const auto bundle = constant_bundle();
    ColumnConfig cfg = consolidation_config(8, -0.1);
    cfg.mech_bottom = {MechKind::kTraction, 0.1};  // nothing pins u
    Column col(cfg, bundle);
    MacroState st = make_state(col);
    CHECK_THROWS_WITH_AS(
        step(col, st, 1.0, bundle, true),
        "singular increment system: boundary conditions under-constrain "
        "the column",
        std::runtime_error);
}

TEST_CASE("macro: mass balance defect arithmetic") {
    MacroState st;
    CHECK(mass_balance_defect(st) == 0.0);
    st.storage_change = 1.0;
    st.coupling_change = -0.5;
    st.drained_top = -0.4;
    st.drained_bottom = -0.2;
    CHECK(mass_balance_defect(st) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("macro: csv appenders emit one row per sample point") {
    const auto bundle = constant_bundle();
    Column col(consolidation_config(8, -0.1), bundle);
    MacroState st = make_state(col);
    step(col, st, 1.0, bundle, false);

    std::ostringstream ts;
    append_timeseries_csv(ts, col, st);
    int rows = 0;
    std::string line;
    std::istringstream tsin(ts.str());
    while (std::getline(tsin, line)) {
        ++rows;
        CHECK(std::count(line.begin(), line.end(), ',') == 4);
    }
    CHECK(rows == col.n_p_nodes());
    CHECK(ts.str().rfind("1,0,0,", 0) == 0);  // t=1, node 0, x=0

    std::ostringstream qs;
    append_quadrature_csv(qs, col, st);
    rows = 0;
    std::istringstream qsin(qs.str());
    while (std::getline(qsin, line)) {
        ++rows;
        CHECK(std::count(line.begin(), line.end(), ',') == 9);
    }
    CHECK(rows == 2 * col.n_elements());
}
