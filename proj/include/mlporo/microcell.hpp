#pragma once

// Periodic unit-cell corrector problems.
//
// Two companion cells share one porosity (see mesh.hpp): the channel cell
// (percolating fluid) carries the flow corrector; the phase-swapped pore
// cell (percolating solid frame) carries the elastic and pressure
// correctors. A single 2D geometry cannot keep both phases percolating,
// and a non-percolating solid has zero drained stiffness, so the two
// stiffness- and flow-relevant projections of the underlying 3D cell are
// kept as separate meshes.
//
//  * Elastic correctors (pore cell). For each unit macroscopic strain E_k
//    (k = e11, e22, e12) find the periodic, zero-solid-mean displacement w:
//        a_s(w, v) = -int_s xi(v) : C : E_k dy     for all periodic v,
//    where a_s is the linear-elastic form on the solid phase; the volume
//    load is equivalent to the interface traction load under periodicity.
//    Cell averages of xi(w) give the strain-concentration tensor M (square
//    symmetry: M11, M12, M44). The effective stiffness is the Gram matrix
//    of the fields E_k + xi(w_k) in the C-energy inner product, hence
//    positive definite exactly because the frame percolates.
//
//  * Pressure corrector (pore cell). Unit pore pressure loads the solid:
//        a_s(w, v) = -int_s div(v) dy.
//    The average strain gives Q (isotropic: Q11 = Q22; testing the equation
//    with w itself shows trace(Q) < 0: pressure inflates the pore).
//
//  * Stokes correctors (channel cell). Taylor-Hood (P2/P1) velocity and
//    pressure on the fluid phase with no-slip on the interface, periodic
//    cell faces, zero fluid-mean pressure via a scalar Lagrange multiplier,
//    unit body force e_k. Velocity averages give the permeability K11.
//
// All averages divide by the full cell measure |Y| = 1. M and Q are
// dimensionless; M does not depend on the solid Young's modulus E while
// Q scales as 1/E, so datasets are generated at a fixed reference modulus.

#include <array>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "mlporo/mesh.hpp"

namespace mlporo::cell {

// Reference dimensionless Young's modulus used for dataset generation.
// Pressure-corrector outputs for other moduli follow from Q ~ 1/E.
inline constexpr double kReferenceYoungs = 15.0;

struct CellTensors {
    double M11 = 0.0;
    double M12 = 0.0;
    double M44 = 0.0;  // tensor component M_1212
    double Q11 = 0.0;
    double K11 = 0.0;
};

struct CellDiagnostics {
    double mean_constraint_norm = 0.0;  // |mean solid displacement|
    double pressure_mean = 0.0;         // |mean fluid pressure|
    double div_residual = 0.0;          // ||B w|| of the discrete constraint
    double symmetry_defect = 0.0;       // worst square-symmetry violation
    int elastic_dofs = 0;
    int stokes_dofs = 0;
    double elastic_seconds = 0.0;
    double stokes_seconds = 0.0;
};

struct CellSolution {
    CellTensors tensors;
    CellDiagnostics diag;
};

// node_dof marker for the translation-reference node class (pinned during
// the solve, then carrying the mean-shift translation)
inline constexpr int kPinnedDof = -2;

// Full elastic corrector output for one (E, nu) solve.
struct ElasticSolution {
    // Cell-average strains (Voigt e11, e22, gamma12) for the four loads:
    // unit e11, unit e22, unit e12 (gamma = 1), unit pore pressure.
    std::array<std::array<double, 3>, 4> avg_strain{};
    std::array<std::array<double, 2>, 4> mean_displacement{};  // solid mean
    double M11 = 0.0, M12 = 0.0, M44 = 0.0, Q11 = 0.0;
    double symmetry_defect = 0.0;
    int n_dofs = 0;
    double seconds = 0.0;
    std::array<Eigen::VectorXd, 4> fields;  // active dof vectors per load
    std::array<std::array<double, 2>, 4> pin_value{};  // pinned-class value
    std::vector<int> node_dof;  // P2 node -> x dof (-1 inactive, -2 pinned)

    std::array<double, 2> displacement(int load, int p2_node) const;
};

// Linear-solver strategy for the SPD elastic system. kDirect is a sparse
// Cholesky factorization; its fill-in exceeds available memory somewhere
// past ~300k dofs, so kIterative switches to conjugate gradients with an
// incomplete-Cholesky preconditioner. kAuto picks by system size. Both
// paths agree to solver tolerance (covered by unit tests).
enum class ElasticMethod { kAuto, kDirect, kIterative };

// Assembles the solid-phase operators once; solve() combines them for any
// (E, nu) and factors one SPD sparse matrix for all four load cases. Rigid
// translations are removed by pinning one node class; solutions are then
// shifted to exact zero solid mean. Not safe for concurrent solve() calls
// on one instance (the factorization is cached).
class ElasticCell {
  public:
    explicit ElasticCell(const CellMesh& mesh);
    ElasticSolution solve(double E, double nu,
                          ElasticMethod method = ElasticMethod::kAuto) const;
    int n_dofs() const { return n_dofs_; }

  private:
    const CellMesh& mesh_;
    Eigen::SparseMatrix<double> K_lambda_, K_mu_;
    Eigen::VectorXd f_lambda_[3], f_mu_[3], f_pressure_, mean_w_;
    std::vector<int> node_dof_;
    int n_dofs_ = 0;
    int pin_node_ = -1;
    double pin_weight_ = 0.0;
    double solid_area_ = 0.0;
    mutable Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
    mutable bool pattern_ready_ = false;
};

struct StokesSolution {
    double K[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
    double div_residual = 0.0;
    double pressure_mean = 0.0;
    int n_dofs = 0;
    double seconds = 0.0;
    std::array<Eigen::VectorXd, 2> fields;  // velocity dofs only
    std::vector<int> node_dof;              // P2 node -> x dof (-1 inactive)

    std::array<double, 2> velocity(int load, int p2_node) const;
};

// Linear-solver strategy for the Stokes saddle system. kDirect runs sparse
// LU on the full indefinite system; its fill-in grows too fast past roughly
// 1/64 resolution, so kSchur switches to a pressure Schur complement:
// Cholesky on the SPD viscous block plus mass-preconditioned CG on the
// pressure. kAuto picks by system size. Both paths agree to solver
// tolerance; the equivalence is covered by unit tests.
enum class StokesMethod { kAuto, kDirect, kSchur };

// Taylor-Hood saddle problem on the fluid phase. The viscous block is kept
// separate so solve() can scale it by the dimensionless viscosity.
class StokesCell {
  public:
    explicit StokesCell(const CellMesh& mesh);
    StokesSolution solve(double mu_prime = 1.0,
                         StokesMethod method = StokesMethod::kAuto) const;
    int n_dofs() const { return n_total_; }

  private:
    // Both return full solution vectors (velocity, pressure, multiplier)
    // for the two unit body-force loads, sharing one factorization.
    std::array<Eigen::VectorXd, 2> solve_direct(double mu_prime) const;
    std::array<Eigen::VectorXd, 2> solve_schur(double mu_prime) const;

    const CellMesh& mesh_;
    Eigen::SparseMatrix<double> visc_, rest_;
    Eigen::VectorXd rhs_[2], mean_weights_, pres_weights_;
    std::vector<int> vel_dof_, pres_dof_;
    int n_vel_ = 0, n_pres_ = 0, n_total_ = 0, b_rows_begin_ = 0;
    double fluid_area_ = 0.0;
};

// flow_cell: channel mesh (Stokes); stiffness_cell: pore mesh (elastic and
// pressure correctors). Both must be built for the same porosity.
CellSolution solve_cell(const CellMesh& flow_cell,
                        const CellMesh& stiffness_cell, double nu,
                        double E = kReferenceYoungs, double mu_prime = 1.0);

// Convenience wrapper building both companion cells at one porosity.
CellSolution solve_cell_at(double phi, double nu, double resolution,
                           double grading = 1.0, double E = kReferenceYoungs,
                           double mu_prime = 1.0);

// ---------------------------------------------------------------------------
// Dataset generation over a (phi, nu) grid
// ---------------------------------------------------------------------------

struct DatasetSpec {
    int phi_count = 50;
    int nu_count = 50;
    double phi_min = 0.082;
    double phi_max = 0.783;
    double nu_min = 0.10;
    double nu_max = 0.45;
    double resolution = 1.0 / 32.0;  // refined to w/2 automatically
    double grading = 1.0;
    double E_ref = kReferenceYoungs;
    double mu_prime = 1.0;
    int jobs = 1;
};

struct DatasetRow {
    double phi = 0.0, nu = 0.0;
    double M11 = 0.0, M12 = 0.0, M44 = 0.0, Q11 = 0.0, K11 = 0.0;
};

// Rows come back sorted by (phi, nu) regardless of the job count.
std::vector<DatasetRow> generate_dataset(const DatasetSpec& spec,
                                         std::ostream* progress = nullptr);

void write_dataset_csv(const std::string& path,
                       const std::vector<DatasetRow>& rows);
std::vector<DatasetRow> read_dataset_csv(const std::string& path);

}  // namespace mlporo::cell
