#include "mlporo/microcell.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace mlporo::cell {

namespace {

using Clock = std::chrono::steady_clock;
using Triplet = Eigen::Triplet<double>;
using SpMat = Eigen::SparseMatrix<double>;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// 6-point degree-4 triangle rule; weights sum to 1 (relative to area).
struct QuadPoint {
    double l0, l1, l2, w;
};
constexpr double qa1 = 0.445948490915965;
constexpr double qw1 = 0.223381589678011;
constexpr double qa2 = 0.091576213509771;
constexpr double qw2 = 0.109951743655322;
constexpr QuadPoint kQuad[6] = {
    {1 - 2 * qa1, qa1, qa1, qw1}, {qa1, 1 - 2 * qa1, qa1, qw1},
    {qa1, qa1, 1 - 2 * qa1, qw1}, {1 - 2 * qa2, qa2, qa2, qw2},
    {qa2, 1 - 2 * qa2, qa2, qw2}, {qa2, qa2, 1 - 2 * qa2, qw2}};

// P2 shape values at a quadrature point.
void p2_values(const QuadPoint& q, double N[6]) {
    N[0] = q.l0 * (2 * q.l0 - 1);
    N[1] = q.l1 * (2 * q.l1 - 1);
    N[2] = q.l2 * (2 * q.l2 - 1);
    N[3] = 4 * q.l0 * q.l1;
    N[4] = 4 * q.l1 * q.l2;
    N[5] = 4 * q.l2 * q.l0;
}

// P2 reference gradients (d/dxi, d/deta) with L0 = 1-xi-eta, L1 = xi, L2 = eta.
void p2_ref_grads(const QuadPoint& q, double g[6][2]) {
    g[0][0] = -(4 * q.l0 - 1);
    g[0][1] = -(4 * q.l0 - 1);
    g[1][0] = 4 * q.l1 - 1;
    g[1][1] = 0;
    g[2][0] = 0;
    g[2][1] = 4 * q.l2 - 1;
    g[3][0] = 4 * (q.l0 - q.l1);
    g[3][1] = -4 * q.l1;
    g[4][0] = 4 * q.l2;
    g[4][1] = 4 * q.l1;
    g[5][0] = -4 * q.l2;
    g[5][1] = 4 * (q.l0 - q.l2);
}

struct TriGeometry {
    double inv_jt[2][2];  // J^{-T}
    double area;
};

TriGeometry tri_geometry(const CellMesh& m, int t) {
    const Vec2 &p0 = m.xy[m.tri[t][0]], &p1 = m.xy[m.tri[t][1]],
               &p2 = m.xy[m.tri[t][2]];
    const double j00 = p1.x - p0.x, j01 = p2.x - p0.x;
    const double j10 = p1.y - p0.y, j11 = p2.y - p0.y;
    const double det = j00 * j11 - j01 * j10;
    TriGeometry g;
    g.area = 0.5 * det;  // CCW triangles
    const double inv = 1.0 / det;
    // J^{-1} = inv * [[j11, -j01], [-j10, j00]]; we need its transpose
    g.inv_jt[0][0] = j11 * inv;
    g.inv_jt[0][1] = -j10 * inv;
    g.inv_jt[1][0] = -j01 * inv;
    g.inv_jt[1][1] = j00 * inv;
    return g;
}

// physical gradients: grad[i] = J^{-T} * ref_grad[i]
void physical_grads(const TriGeometry& g, const double ref[6][2],
                    double grad[6][2]) {
    for (int i = 0; i < 6; ++i) {
        grad[i][0] = g.inv_jt[0][0] * ref[i][0] + g.inv_jt[0][1] * ref[i][1];
        grad[i][1] = g.inv_jt[1][0] * ref[i][0] + g.inv_jt[1][1] * ref[i][1];
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// ElasticCell
// ---------------------------------------------------------------------------

ElasticCell::ElasticCell(const CellMesh& mesh) : mesh_(mesh) {
    const int n_nodes = mesh.n_p2_nodes();
    node_dof_.assign(n_nodes, -1);
    // Pin one node class to remove the rigid-translation kernel; the
    // solution is shifted to exact zero solid mean afterwards. (Lagrange
    // mean-rows would be dense and ruin sparse factorization fill-in.)
    pin_node_ = -1;
    int next = 0;
    for (int n = 0; n < n_nodes; ++n) {
        if (mesh.touches_solid[n] && mesh.periodic_master[n] == n) {
            if (pin_node_ < 0) {
                pin_node_ = n;
                continue;
            }
            node_dof_[n] = next;
            next += 2;
        }
    }
    for (int n = 0; n < n_nodes; ++n) {
        const int m = mesh.periodic_master[n];
        if (m != n) node_dof_[n] = node_dof_[m];
    }
    if (pin_node_ >= 0) {
        for (int n = 0; n < n_nodes; ++n) {
            if (mesh.periodic_master[n] == pin_node_) node_dof_[n] = kPinnedDof;
        }
    }
    n_dofs_ = next;
    solid_area_ = mesh.solid_area();

    std::vector<Triplet> t_lambda, t_mu;
    t_lambda.reserve(mesh.n_triangles() * 144);
    t_mu.reserve(mesh.n_triangles() * 144);
    for (int k = 0; k < 3; ++k) {
        f_lambda_[k] = Eigen::VectorXd::Zero(n_dofs_);
        f_mu_[k] = Eigen::VectorXd::Zero(n_dofs_);
    }
    f_pressure_ = Eigen::VectorXd::Zero(n_dofs_);
    mean_w_ = Eigen::VectorXd::Zero(n_dofs_);

    double ref_grads[6][6][2];
    double shape_vals[6][6];
    for (int q = 0; q < 6; ++q) {
        p2_ref_grads(kQuad[q], ref_grads[q]);
        p2_values(kQuad[q], shape_vals[q]);
    }

    for (int t = 0; t < mesh.n_triangles(); ++t) {
        if (!mesh.tri_solid[t]) continue;
        const auto nodes = mesh.tri_p2_nodes(t);
        const TriGeometry geo = tri_geometry(mesh_, t);
        int dof[6];
        for (int i = 0; i < 6; ++i) dof[i] = node_dof_[nodes[i]];

        // accumulate local 12x12 blocks over the rule, then emit one triplet
        // per entry (emitting per quadrature point multiplies the triplet
        // footprint sixfold and exhausts memory on fine meshes)
        double Kl[12][12] = {};
        double Km[12][12] = {};
        for (int q = 0; q < 6; ++q) {
            double grad[6][2];
            physical_grads(geo, ref_grads[q], grad);
            const double wq = kQuad[q].w * geo.area;
            for (int i = 0; i < 6; ++i) {
                const double Nix = grad[i][0], Niy = grad[i][1];
                for (int j = 0; j < 6; ++j) {
                    const double Njx = grad[j][0], Njy = grad[j][1];
                    // volumetric (lambda) part: div_i x div_j
                    Kl[2 * i][2 * j] += wq * Nix * Njx;
                    Kl[2 * i][2 * j + 1] += wq * Nix * Njy;
                    Kl[2 * i + 1][2 * j] += wq * Niy * Njx;
                    Kl[2 * i + 1][2 * j + 1] += wq * Niy * Njy;
                    // deviatoric-ish (mu) part
                    Km[2 * i][2 * j] += wq * (2 * Nix * Njx + Niy * Njy);
                    Km[2 * i][2 * j + 1] += wq * Niy * Njx;
                    Km[2 * i + 1][2 * j] += wq * Nix * Njy;
                    Km[2 * i + 1][2 * j + 1] += wq * (2 * Niy * Njy + Nix * Njx);
                }
                if (dof[i] < 0) {  // pinned translation reference
                    pin_weight_ += wq * shape_vals[q][i];
                    continue;
                }
                // strain loads: f_k = -int B^T (D e_k); D split into
                // lambda- and mu-parts of the plane-strain stiffness
                f_lambda_[0][dof[i]] -= wq * Nix;
                f_lambda_[0][dof[i] + 1] -= wq * Niy;
                f_lambda_[1][dof[i]] -= wq * Nix;
                f_lambda_[1][dof[i] + 1] -= wq * Niy;
                f_mu_[0][dof[i]] -= wq * 2 * Nix;
                f_mu_[1][dof[i] + 1] -= wq * 2 * Niy;
                f_mu_[2][dof[i]] -= wq * Niy;
                f_mu_[2][dof[i] + 1] -= wq * Nix;
                // unit pore pressure: -int div(v) dy
                f_pressure_[dof[i]] -= wq * Nix;
                f_pressure_[dof[i] + 1] -= wq * Niy;
                mean_w_[dof[i]] += wq * shape_vals[q][i];
                mean_w_[dof[i] + 1] += wq * shape_vals[q][i];
            }
        }
        for (int i = 0; i < 6; ++i) {
            if (dof[i] < 0) continue;
            for (int j = 0; j < 6; ++j) {
                if (dof[j] < 0) continue;
                for (int a = 0; a < 2; ++a) {
                    for (int b = 0; b < 2; ++b) {
                        t_lambda.emplace_back(dof[i] + a, dof[j] + b,
                                              Kl[2 * i + a][2 * j + b]);
                        t_mu.emplace_back(dof[i] + a, dof[j] + b,
                                          Km[2 * i + a][2 * j + b]);
                    }
                }
            }
        }
    }

    K_lambda_.resize(n_dofs_, n_dofs_);
    K_lambda_.setFromTriplets(t_lambda.begin(), t_lambda.end());
    std::vector<Triplet>().swap(t_lambda);  // large meshes: trim the peak
    K_mu_.resize(n_dofs_, n_dofs_);
    K_mu_.setFromTriplets(t_mu.begin(), t_mu.end());
}

ElasticSolution ElasticCell::solve(double E, double nu,
                                   ElasticMethod method) const {
    if (!(E > 0.0)) throw std::invalid_argument("solid E must be positive");
    if (!(nu > 0.0 && nu < 0.5)) {
        throw std::invalid_argument("solid nu must lie in (0, 0.5)");
    }
    const auto t0 = Clock::now();
    const double lam = E * nu / ((1 + nu) * (1 - 2 * nu));
    const double mu = E / (2 * (1 + nu));
    if (method == ElasticMethod::kAuto) {
        method = n_dofs_ > 300000 ? ElasticMethod::kIterative
                                  : ElasticMethod::kDirect;
    }

    SpMat A = lam * K_lambda_ + mu * K_mu_;
    A.makeCompressed();

    ElasticSolution sol;
    sol.n_dofs = n_dofs_;
    sol.node_dof = node_dof_;
    Eigen::MatrixXd rhs(n_dofs_, 4);
    for (int k = 0; k < 3; ++k) rhs.col(k) = lam * f_lambda_[k] + mu * f_mu_[k];
    rhs.col(3) = f_pressure_;
    Eigen::MatrixXd x(n_dofs_, 4);
    if (method == ElasticMethod::kDirect) {
        if (!pattern_ready_) {
            ldlt_.analyzePattern(A);
            pattern_ready_ = true;
        }
        ldlt_.factorize(A);
        if (ldlt_.info() != Eigen::Success) {
            throw std::runtime_error("elastic cell factorization failed");
        }
        x = ldlt_.solve(rhs);
    } else {
        Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper,
                                 Eigen::IncompleteCholesky<double>>
            cg;
        cg.setTolerance(1e-13);
        cg.setMaxIterations(20000);
        cg.compute(A);
        if (cg.info() != Eigen::Success) {
            throw std::runtime_error("elastic cell preconditioner failed");
        }
        for (int load = 0; load < 4; ++load) {
            x.col(load) = cg.solve(rhs.col(load));
            if (cg.info() != Eigen::Success) {
                throw std::runtime_error(
                    "non-convergent linear solve in the elastic corrector");
            }
        }
    }

    double ref_grads[6][6][2];
    for (int q = 0; q < 6; ++q) p2_ref_grads(kQuad[q], ref_grads[q]);

    // strain averages on the raw solution (pinned node holds exactly zero
    // there, so skipping it is exact); averages are over the cell |Y| = 1
    for (int load = 0; load < 4; ++load) {
        double e11 = 0, e22 = 0, g12 = 0;
        for (int t = 0; t < mesh_.n_triangles(); ++t) {
            if (!mesh_.tri_solid[t]) continue;
            const auto nodes = mesh_.tri_p2_nodes(t);
            const TriGeometry geo = tri_geometry(mesh_, t);
            for (int q = 0; q < 6; ++q) {
                double grad[6][2];
                physical_grads(geo, ref_grads[q], grad);
                const double wq = kQuad[q].w * geo.area;
                for (int i = 0; i < 6; ++i) {
                    const int d = node_dof_[nodes[i]];
                    if (d < 0) continue;
                    const double ux = x(d, load), uy = x(d + 1, load);
                    e11 += wq * grad[i][0] * ux;
                    e22 += wq * grad[i][1] * uy;
                    g12 += wq * (grad[i][1] * ux + grad[i][0] * uy);
                }
            }
        }
        sol.avg_strain[load] = {e11, e22, g12};
    }

    // shift each load case to exact zero solid mean (a pure translation;
    // strain averages are unaffected) and report the achieved mean
    for (int load = 0; load < 4; ++load) {
        double mx = 0.0, my = 0.0;
        for (int d = 0; d < n_dofs_; d += 2) {
            mx += mean_w_[d] * x(d, load);
            my += mean_w_[d + 1] * x(d + 1, load);
        }
        mx /= solid_area_;
        my /= solid_area_;
        for (int d = 0; d < n_dofs_; d += 2) {
            x(d, load) -= mx;
            x(d + 1, load) -= my;
        }
        sol.pin_value[load] = {-mx, -my};
        double rx = pin_weight_ * sol.pin_value[load][0];
        double ry = pin_weight_ * sol.pin_value[load][1];
        for (int d = 0; d < n_dofs_; d += 2) {
            rx += mean_w_[d] * x(d, load);
            ry += mean_w_[d + 1] * x(d + 1, load);
        }
        sol.mean_displacement[load] = {rx / solid_area_, ry / solid_area_};
        sol.fields[load] = x.col(load);
    }

    sol.M11 = 0.5 * (sol.avg_strain[0][0] + sol.avg_strain[1][1]);
    sol.M12 = 0.5 * (sol.avg_strain[0][1] + sol.avg_strain[1][0]);
    sol.M44 = 0.5 * sol.avg_strain[2][2];  // gamma -> tensor eps12
    sol.Q11 = 0.5 * (sol.avg_strain[3][0] + sol.avg_strain[3][1]);
    sol.symmetry_defect = std::max(
        {std::abs(sol.avg_strain[0][0] - sol.avg_strain[1][1]),
         std::abs(sol.avg_strain[0][1] - sol.avg_strain[1][0]),
         std::abs(sol.avg_strain[3][0] - sol.avg_strain[3][1]),
         std::abs(sol.avg_strain[0][2]), std::abs(sol.avg_strain[1][2]),
         std::abs(sol.avg_strain[3][2]), std::abs(sol.avg_strain[2][0]),
         std::abs(sol.avg_strain[2][1])});
    sol.seconds = seconds_since(t0);
    return sol;
}

std::array<double, 2> ElasticSolution::displacement(int load, int p2_node) const {
    const int d = node_dof[p2_node];
    if (d == kPinnedDof) return pin_value[load];
    if (d < 0) return {0.0, 0.0};
    return {fields[load][d], fields[load][d + 1]};
}

// ---------------------------------------------------------------------------
// StokesCell
// ---------------------------------------------------------------------------

StokesCell::StokesCell(const CellMesh& mesh) : mesh_(mesh) {
    const int n_nodes = mesh.n_p2_nodes();
    const int nv = mesh.n_vertices();
    vel_dof_.assign(n_nodes, -1);
    pres_dof_.assign(nv, -1);
    int next = 0;
    for (int n = 0; n < n_nodes; ++n) {
        if (mesh.touches_fluid[n] && !mesh.on_interface[n] &&
            mesh.periodic_master[n] == n) {
            vel_dof_[n] = next;
            next += 2;
        }
    }
    n_vel_ = next;
    for (int n = 0; n < n_nodes; ++n) {
        const int m = mesh.periodic_master[n];
        if (vel_dof_[n] < 0 && m != n) vel_dof_[n] = vel_dof_[m];
    }
    int pnext = 0;
    for (int v = 0; v < nv; ++v) {
        if (mesh.touches_fluid[v] && mesh.periodic_master[v] == v) {
            pres_dof_[v] = pnext++;
        }
    }
    for (int v = 0; v < nv; ++v) {
        const int m = mesh.periodic_master[v];
        if (pres_dof_[v] < 0 && m < nv) pres_dof_[v] = pres_dof_[m];
    }
    n_pres_ = pnext;
    b_rows_begin_ = n_vel_;
    n_total_ = n_vel_ + n_pres_ + 1;  // + pressure-mean multiplier
    fluid_area_ = mesh.fluid_area();
    if (n_vel_ == 0) return;

    std::vector<Triplet> trip;
    trip.reserve(mesh.n_triangles() * 200);
    rhs_[0] = Eigen::VectorXd::Zero(n_total_);
    rhs_[1] = Eigen::VectorXd::Zero(n_total_);
    mean_weights_ = Eigen::VectorXd::Zero(n_vel_);
    pres_weights_ = Eigen::VectorXd::Zero(n_pres_);

    double ref_grads[6][6][2];
    double shape_vals[6][6];
    for (int q = 0; q < 6; ++q) {
        p2_ref_grads(kQuad[q], ref_grads[q]);
        p2_values(kQuad[q], shape_vals[q]);
    }

    for (int t = 0; t < mesh.n_triangles(); ++t) {
        if (mesh.tri_solid[t]) continue;
        const auto nodes = mesh.tri_p2_nodes(t);
        const TriGeometry geo = tri_geometry(mesh_, t);
        int dof[6], pdof[3];
        for (int i = 0; i < 6; ++i) dof[i] = vel_dof_[nodes[i]];
        for (int i = 0; i < 3; ++i) pdof[i] = pres_dof_[mesh.tri[t][i]];

        // local viscous block accumulated over the rule (see the elastic
        // assembly note on triplet footprint)
        double Kv[12][12] = {};
        for (int q = 0; q < 6; ++q) {
            double grad[6][2];
            physical_grads(geo, ref_grads[q], grad);
            const double wq = kQuad[q].w * geo.area;
            const double lam[3] = {kQuad[q].l0, kQuad[q].l1, kQuad[q].l2};
            for (int i = 0; i < 6; ++i) {
                const double Nix = grad[i][0], Niy = grad[i][1];
                // viscous block 2 mu xi(u):xi(v); assembled for mu = 1
                for (int j = 0; j < 6; ++j) {
                    const double Njx = grad[j][0], Njy = grad[j][1];
                    Kv[2 * i][2 * j] += wq * (2 * Nix * Njx + Niy * Njy);
                    Kv[2 * i][2 * j + 1] += wq * Niy * Njx;
                    Kv[2 * i + 1][2 * j] += wq * Nix * Njy;
                    Kv[2 * i + 1][2 * j + 1] += wq * (2 * Niy * Njy + Nix * Njx);
                }
                if (dof[i] < 0) continue;  // no-slip boundary node
                rhs_[0][dof[i]] += wq * shape_vals[q][i];
                rhs_[1][dof[i] + 1] += wq * shape_vals[q][i];
                mean_weights_[dof[i]] += wq * shape_vals[q][i];
            }
            for (int l = 0; l < 3; ++l) {
                pres_weights_[pdof[l]] += wq * lam[l];
            }
        }
        for (int i = 0; i < 6; ++i) {
            if (dof[i] < 0) continue;
            for (int j = 0; j < 6; ++j) {
                if (dof[j] < 0) continue;
                for (int a = 0; a < 2; ++a)
                    for (int b = 0; b < 2; ++b)
                        trip.emplace_back(dof[i] + a, dof[j] + b,
                                          Kv[2 * i + a][2 * j + b]);
            }
        }
    }
    visc_ = SpMat(n_total_, n_total_);
    visc_.setFromTriplets(trip.begin(), trip.end());

    // divergence block, pressure-gradient block, and the mean-zero multiplier
    trip.clear();
    trip.shrink_to_fit();
    trip.reserve(mesh.n_triangles() * 72);
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        if (mesh.tri_solid[t]) continue;
        const auto nodes = mesh.tri_p2_nodes(t);
        const TriGeometry geo = tri_geometry(mesh_, t);
        int dof[6], pdof[3];
        for (int i = 0; i < 6; ++i) dof[i] = vel_dof_[nodes[i]];
        for (int i = 0; i < 3; ++i) pdof[i] = pres_dof_[mesh.tri[t][i]];
        double Bl[3][12] = {};
        for (int q = 0; q < 6; ++q) {
            double grad[6][2];
            physical_grads(geo, ref_grads[q], grad);
            const double wq = kQuad[q].w * geo.area;
            const double lam[3] = {kQuad[q].l0, kQuad[q].l1, kQuad[q].l2};
            for (int l = 0; l < 3; ++l) {
                for (int i = 0; i < 6; ++i) {
                    Bl[l][2 * i] -= wq * lam[l] * grad[i][0];
                    Bl[l][2 * i + 1] -= wq * lam[l] * grad[i][1];
                }
            }
        }
        for (int l = 0; l < 3; ++l) {
            const int prow = b_rows_begin_ + pdof[l];
            for (int i = 0; i < 6; ++i) {
                if (dof[i] < 0) continue;
                for (int a = 0; a < 2; ++a) {
                    trip.emplace_back(prow, dof[i] + a, Bl[l][2 * i + a]);
                    trip.emplace_back(dof[i] + a, prow, Bl[l][2 * i + a]);
                }
            }
        }
    }
    const int mult_row = n_vel_ + n_pres_;
    for (int l = 0; l < n_pres_; ++l) {
        trip.emplace_back(mult_row, b_rows_begin_ + l, pres_weights_[l]);
        trip.emplace_back(b_rows_begin_ + l, mult_row, pres_weights_[l]);
    }
    rest_ = SpMat(n_total_, n_total_);
    rest_.setFromTriplets(trip.begin(), trip.end());
}

std::array<Eigen::VectorXd, 2> StokesCell::solve_direct(double mu_prime) const {
    SpMat A = mu_prime * visc_ + rest_;
    A.makeCompressed();
    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
    lu.analyzePattern(A);
    lu.factorize(A);
    if (lu.info() != Eigen::Success) {
        throw std::runtime_error("stokes cell factorization failed");
    }
    return {lu.solve(rhs_[0]), lu.solve(rhs_[1])};
}

// Pressure Schur complement: with A the viscous block and B the divergence
// rows, solve S p = B A^-1 f by CG where S q = B A^-1 B^T q, preconditioned
// by the P1 pressure mass matrix (spectrally equivalent to S for an inf-sup
// stable pair). Constant pressures span the nullspace of S; iterates are kept
// mean-free by projection and the weighted zero-mean gauge is applied at the
// end, where the direct path's Lagrange multiplier enforces it instead.
std::array<Eigen::VectorXd, 2> StokesCell::solve_schur(double mu_prime) const {
    SpMat A = visc_.topLeftCorner(n_vel_, n_vel_);
    A *= mu_prime;
    A.makeCompressed();
    const SpMat B = rest_.block(n_vel_, 0, n_pres_, n_vel_);
    Eigen::SimplicialLDLT<SpMat> ldlt(A);
    if (ldlt.info() != Eigen::Success) {
        throw std::runtime_error("stokes cell factorization failed");
    }

    // P1 pressure mass matrix over fluid triangles (periodic dofs merged)
    std::vector<Triplet> trip;
    for (int t = 0; t < mesh_.n_triangles(); ++t) {
        if (mesh_.tri_solid[t]) continue;
        const TriGeometry geo = tri_geometry(mesh_, t);
        int pdof[3];
        for (int i = 0; i < 3; ++i) pdof[i] = pres_dof_[mesh_.tri[t][i]];
        for (int q = 0; q < 6; ++q) {
            const double wq = kQuad[q].w * geo.area;
            const double lam[3] = {kQuad[q].l0, kQuad[q].l1, kQuad[q].l2};
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    trip.emplace_back(pdof[i], pdof[j], wq * lam[i] * lam[j]);
        }
    }
    SpMat Mp(n_pres_, n_pres_);
    Mp.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<SpMat> mass(Mp);
    if (mass.info() != Eigen::Success) {
        throw std::runtime_error("stokes cell factorization failed");
    }

    const auto de_mean = [this](Eigen::VectorXd& v) {
        v.array() -= v.sum() / n_pres_;
    };
    const auto apply_S = [&](const Eigen::VectorXd& q) {
        Eigen::VectorXd s = B * ldlt.solve(B.transpose() * q);
        de_mean(s);
        return s;
    };

    std::array<Eigen::VectorXd, 2> out;
    for (int load = 0; load < 2; ++load) {
        const Eigen::VectorXd f = rhs_[load].head(n_vel_);
        Eigen::VectorXd g = B * ldlt.solve(f);
        de_mean(g);

        Eigen::VectorXd p = Eigen::VectorXd::Zero(n_pres_);
        Eigen::VectorXd r = g;
        Eigen::VectorXd z = mass.solve(r);
        Eigen::VectorXd d = z;
        double rz = r.dot(z);
        const double tol2 = 1e-24 * rz;
        constexpr int kMaxIters = 500;
        int it = 0;
        for (; it < kMaxIters && rz > tol2; ++it) {
            const Eigen::VectorXd Sd = apply_S(d);
            const double alpha = rz / d.dot(Sd);
            p += alpha * d;
            r -= alpha * Sd;
            de_mean(r);
            z = mass.solve(r);
            const double rz_new = r.dot(z);
            d = z + (rz_new / rz) * d;
            rz = rz_new;
        }
        if (rz > tol2) {
            throw std::runtime_error(
                "non-convergent linear solve in the pressure iteration");
        }
        // weighted zero-mean gauge, matching the multiplier constraint
        p.array() -= pres_weights_.dot(p) / fluid_area_;

        Eigen::VectorXd x = Eigen::VectorXd::Zero(n_total_);
        x.head(n_vel_) = ldlt.solve(f - B.transpose() * p);
        x.segment(n_vel_, n_pres_) = p;
        out[load] = std::move(x);
    }
    return out;
}

StokesSolution StokesCell::solve(double mu_prime, StokesMethod method) const {
    if (!(mu_prime > 0.0)) {
        throw std::invalid_argument("dimensionless viscosity must be positive");
    }
    StokesSolution sol;
    sol.n_dofs = n_total_;
    sol.node_dof = vel_dof_;
    if (n_vel_ == 0) {
        sol.fields[0] = Eigen::VectorXd::Zero(0);
        sol.fields[1] = Eigen::VectorXd::Zero(0);
        return sol;
    }
    if (method == StokesMethod::kAuto) {
        method = n_total_ > 10000 ? StokesMethod::kSchur : StokesMethod::kDirect;
    }
    const auto t0 = Clock::now();
    const auto xs = method == StokesMethod::kSchur ? solve_schur(mu_prime)
                                                   : solve_direct(mu_prime);
    for (int load = 0; load < 2; ++load) {
        const Eigen::VectorXd& x = xs[load];
        sol.fields[load] = x.head(n_vel_);
        for (int n = 0; n < n_vel_; n += 2) {
            sol.K[0][load] += mean_weights_[n] * x[n];
            sol.K[1][load] += mean_weights_[n] * x[n + 1];
        }
        // residual of the discrete divergence rows (multiplier column removed)
        Eigen::VectorXd r = rest_.middleRows(b_rows_begin_, n_pres_) * x;
        r -= x[n_vel_ + n_pres_] * pres_weights_;
        sol.div_residual = std::max(sol.div_residual, r.norm());
        const double pmean =
            pres_weights_.dot(x.segment(n_vel_, n_pres_)) / fluid_area_;
        sol.pressure_mean = std::max(sol.pressure_mean, std::abs(pmean));
    }
    sol.seconds = seconds_since(t0);
    return sol;
}

std::array<double, 2> StokesSolution::velocity(int load, int p2_node) const {
    const int d = node_dof[p2_node];
    if (d < 0) return {0.0, 0.0};
    return {fields[load][d], fields[load][d + 1]};
}

// ---------------------------------------------------------------------------
// Combined solve + dataset
// ---------------------------------------------------------------------------

CellSolution solve_cell(const CellMesh& flow_cell,
                        const CellMesh& stiffness_cell, double nu, double E,
                        double mu_prime) {
    ElasticCell elastic(stiffness_cell);
    const ElasticSolution es = elastic.solve(E, nu);
    StokesCell stokes(flow_cell);
    const StokesSolution ss = stokes.solve(mu_prime);

    CellSolution out;
    out.tensors.M11 = es.M11;
    out.tensors.M12 = es.M12;
    out.tensors.M44 = es.M44;
    out.tensors.Q11 = es.Q11;
    out.tensors.K11 = 0.5 * (ss.K[0][0] + ss.K[1][1]);
    out.diag.mean_constraint_norm = 0.0;
    for (const auto& m : es.mean_displacement) {
        out.diag.mean_constraint_norm =
            std::max({out.diag.mean_constraint_norm, std::abs(m[0]),
                      std::abs(m[1])});
    }
    out.diag.pressure_mean = ss.pressure_mean;
    out.diag.div_residual = ss.div_residual;
    out.diag.symmetry_defect =
        std::max({es.symmetry_defect, std::abs(ss.K[0][1]),
                  std::abs(ss.K[1][0]), std::abs(ss.K[0][0] - ss.K[1][1])});
    out.diag.elastic_dofs = es.n_dofs;
    out.diag.stokes_dofs = ss.n_dofs;
    out.diag.elastic_seconds = es.seconds;
    out.diag.stokes_seconds = ss.seconds;
    return out;
}

CellSolution solve_cell_at(double phi, double nu, double resolution,
                           double grading, double E, double mu_prime) {
    const CellMesh flow = build_cell_mesh(phi, resolution, grading);
    const CellMesh stiff = build_pore_cell_mesh(phi, resolution, grading);
    return solve_cell(flow, stiff, nu, E, mu_prime);
}

std::vector<DatasetRow> generate_dataset(const DatasetSpec& spec,
                                         std::ostream* progress) {
    if (spec.phi_count < 1 || spec.nu_count < 1) {
        throw std::invalid_argument("grid counts must be positive");
    }
    auto grid = [](double lo, double hi, int n, int i) {
        return n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
    };
    std::vector<DatasetRow> rows(
        static_cast<std::size_t>(spec.phi_count) * spec.nu_count);

    std::mutex progress_mutex;
    auto solve_one_phi = [&](int ip) {
        const double phi = grid(spec.phi_min, spec.phi_max, spec.phi_count, ip);
        const double wc = channel_width_from_phi(phi);
        const double wf = frame_width_from_phi(phi);
        const double res_flow = std::min(spec.resolution, 0.5 * wc);
        const double res_stiff =
            std::min(spec.resolution, 0.5 * std::min(wf, 1.0 - wf));
        const CellMesh flow = build_cell_mesh(phi, res_flow, spec.grading);
        const CellMesh stiff =
            build_pore_cell_mesh(phi, res_stiff, spec.grading);
        ElasticCell elastic(stiff);
        StokesCell stokes(flow);
        const StokesSolution ss = stokes.solve(spec.mu_prime);
        const double K11 = 0.5 * (ss.K[0][0] + ss.K[1][1]);
        for (int inu = 0; inu < spec.nu_count; ++inu) {
            const double nu = grid(spec.nu_min, spec.nu_max, spec.nu_count, inu);
            const ElasticSolution es = elastic.solve(spec.E_ref, nu);
            rows[static_cast<std::size_t>(ip) * spec.nu_count + inu] = {
                phi, nu, es.M11, es.M12, es.M44, es.Q11, K11};
        }
        if (progress) {
            std::lock_guard<std::mutex> lock(progress_mutex);
            (*progress) << "[gen-cells] phi " << (ip + 1) << "/"
                        << spec.phi_count << " (phi=" << phi << ") done\n";
            progress->flush();
        }
    };

    const int jobs = std::max(1, spec.jobs);
    if (jobs == 1) {
        for (int ip = 0; ip < spec.phi_count; ++ip) solve_one_phi(ip);
    } else {
        std::vector<std::thread> pool;
        std::mutex next_mutex;
        int next = 0;
        for (int j = 0; j < jobs; ++j) {
            pool.emplace_back([&]() {
                for (;;) {
                    int ip;
                    {
                        std::lock_guard<std::mutex> lock(next_mutex);
                        if (next >= spec.phi_count) return;
                        ip = next++;
                    }
                    solve_one_phi(ip);
                }
            });
        }
        for (auto& th : pool) th.join();
    }
    return rows;
}

void write_dataset_csv(const std::string& path,
                       const std::vector<DatasetRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "phi,nu,M11,M12,M44,Q11,K11\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf),
                      "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.phi,
                      r.nu, r.M11, r.M12, r.M44, r.Q11, r.K11);
        out << buf;
    }
}

std::vector<DatasetRow> read_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "phi,nu,M11,M12,M44,Q11,K11") {
        throw std::runtime_error("bad dataset header in " + path);
    }
    std::vector<DatasetRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        DatasetRow r;
        const int got = std::sscanf(line.c_str(),
                                    "%lf,%lf,%lf,%lf,%lf,%lf,%lf", &r.phi,
                                    &r.nu, &r.M11, &r.M12, &r.M44, &r.Q11,
                                    &r.K11);
        if (got != 7) {
            throw std::runtime_error("bad dataset row in " + path + ": " + line);
        }
        rows.push_back(r);
    }
    return rows;
}

}  // namespace mlporo::cell
