/// @file mesh.hpp
/// @brief Periodic unit-cell meshes for the microscale problems.
///
/// The cell is the unit square with a plus-shaped fluid channel of width w
/// centred on both axes; the solid phase is the four corner blocks. Porosity
/// and channel width are linked by phi = 2w - w^2. Both phases are connected
/// through the periodic faces, which is what makes this the simplest 2D
/// geometry with nonzero effective conductivity and stiffness at once.
///
/// Meshes are tensor-product grids of the breakpoints {0, a, 1/2, b, 1} per
/// axis (a = (1-w)/2, b = 1-a), each rectangle split into four triangles
/// around its centre. That keeps the triangulation invariant under the
/// symmetry group of the square, so homogenised tensors come out with exact
/// square symmetry up to solver roundoff. Element sizes are graded towards
/// the interface lines x,y = a,b where the Stokes solution has corner
/// singularities.
///
/// Quadratic (P2) nodes are the vertices plus one node per edge. Periodic
/// identification maps every node on x=1 / y=1 onto its partner at x=0 / y=0.

#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace mlporo::cell {

struct Vec2 {
    double x, y;
};

/// channel width from porosity: w = 1 - sqrt(1 - phi)
double channel_width_from_phi(double phi);
/// porosity from channel width: phi = 2w - w^2
double phi_from_channel_width(double w);
/// solid frame band width of the phase-swapped (isolated pore) cell:
/// pore area (1 - w)^2 = phi, so w = 1 - sqrt(phi)
double frame_width_from_phi(double phi);

struct CellMesh {
    double phi = 0.0;         ///< fluid area fraction the mesh was built for
    double w = 0.0;           ///< band width (channel or frame, per builder)
    double resolution = 0.0;  ///< requested target edge length

    std::vector<Vec2> xy;                    ///< vertex coordinates
    std::vector<std::array<int, 3>> tri;     ///< CCW vertex triples
    std::vector<std::uint8_t> tri_solid;     ///< 1 solid, 0 fluid
    std::vector<std::array<int, 2>> edge;    ///< unique edges, v0 < v1
    std::vector<std::array<int, 3>> tri_edge;///< edge ids: (01), (12), (20)

    /// Per P2 node: canonical representative under periodic identification
    /// (nodes on x=1/y=1 map to x=0/y=0; masters map to themselves).
    std::vector<int> periodic_master;
    /// Per P2 node: 1 when the node lies on a solid-fluid interface edge.
    std::vector<std::uint8_t> on_interface;
    /// Per P2 node: 1 when some adjacent triangle is solid / fluid.
    std::vector<std::uint8_t> touches_solid;
    std::vector<std::uint8_t> touches_fluid;

    int n_vertices() const { return static_cast<int>(xy.size()); }
    int n_edges() const { return static_cast<int>(edge.size()); }
    int n_p2_nodes() const { return n_vertices() + n_edges(); }
    int n_triangles() const { return static_cast<int>(tri.size()); }

    /// Coordinate of a P2 node (edge nodes sit at edge midpoints).
    Vec2 p2_coord(int node) const;
    /// The six P2 nodes of a triangle: v0 v1 v2, then mid(01) mid(12) mid(20).
    std::array<int, 6> tri_p2_nodes(int t) const;

    double solid_area() const;
    double fluid_area() const;
};

/// Build a periodic cell mesh.
///
/// @param phi        porosity; 0 is allowed (degenerate full-solid cell used
///                   by patch tests), otherwise must lie in [0.05, 0.80]
/// @param resolution target edge length in [1/256, 1/16]
/// @param grading    0 = uniform spacing, 1 = full cosine grading towards
///                   the interface lines (default)
/// Throws std::invalid_argument when the channel would be unresolved
/// (w < 2 * resolution) or parameters are out of range.
CellMesh build_cell_mesh(double phi, double resolution, double grading = 1.0);

/// Phase-swapped companion cell for the stiffness problems: a connected
/// solid frame (band width 1 - sqrt(phi)) around one isolated square pore
/// of area phi per period. In two dimensions a single geometry cannot keep
/// both phases percolating, so flow correctors use the channel cell above
/// while elastic/pressure correctors use this dual cell at the same phi.
/// Throws std::invalid_argument when pore or ligament would be unresolved.
CellMesh build_pore_cell_mesh(double phi, double resolution,
                              double grading = 1.0);

}  // namespace mlporo::cell
