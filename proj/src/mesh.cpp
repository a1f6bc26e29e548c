#include "mlporo/mesh.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace mlporo::cell {

double channel_width_from_phi(double phi) {
    return 1.0 - std::sqrt(1.0 - phi);
}

double phi_from_channel_width(double w) { return 2.0 * w - w * w; }

double frame_width_from_phi(double phi) { return 1.0 - std::sqrt(phi); }

namespace {

constexpr double kPi = 3.14159265358979323846;

// Append the n interval endpoints of (x0, x1] to pts. cluster = +1 refines
// towards x1, -1 towards x0, 0 keeps uniform spacing; g in [0,1] blends
// between uniform and full cosine clustering.
void append_graded(std::vector<double>& pts, double x0, double x1, int n,
                   int cluster, double g) {
    for (int i = 1; i <= n; ++i) {
        const double t = static_cast<double>(i) / n;
        double s = t;
        if (cluster > 0) s = std::sin(0.5 * kPi * t);
        else if (cluster < 0) s = 1.0 - std::cos(0.5 * kPi * t);
        const double u = (1.0 - g) * t + g * s;
        pts.push_back(i == n ? x1 : x0 + (x1 - x0) * u);
    }
}

// Breakpoint-aligned axis points over [0,1], mirror-symmetric about 1/2.
std::vector<double> axis_points(double a, double resolution, double g) {
    auto pieces = [&](double len) {
        return std::max(1, static_cast<int>(std::ceil(len / resolution - 1e-9)));
    };
    std::vector<double> pts{0.0};
    const double half_channel = 0.5 - a;
    if (half_channel <= 0.0) {
        append_graded(pts, 0.0, 0.5, pieces(0.5), 0, 0.0);
    } else {
        append_graded(pts, 0.0, a, pieces(a), +1, g);
        append_graded(pts, a, 0.5, pieces(half_channel), -1, g);
    }
    // mirror the lower half onto (1/2, 1]
    for (int i = static_cast<int>(pts.size()) - 2; i >= 0; --i) {
        pts.push_back(1.0 - pts[i]);
    }
    return pts;
}

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) {
        for (int i = 0; i < n; ++i) parent[i] = i;
    }
    int find(int i) {
        while (parent[i] != i) {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        return i;
    }
    void unite(int i, int j) {
        i = find(i);
        j = find(j);
        if (i == j) return;
        if (i < j) parent[j] = i;
        else parent[i] = j;
    }
};

}  // namespace

Vec2 CellMesh::p2_coord(int node) const {
    const int nv = n_vertices();
    if (node < nv) return xy[node];
    const auto& e = edge[node - nv];
    return {0.5 * (xy[e[0]].x + xy[e[1]].x), 0.5 * (xy[e[0]].y + xy[e[1]].y)};
}

std::array<int, 6> CellMesh::tri_p2_nodes(int t) const {
    const int nv = n_vertices();
    return {tri[t][0],           tri[t][1],           tri[t][2],
            nv + tri_edge[t][0], nv + tri_edge[t][1], nv + tri_edge[t][2]};
}

double CellMesh::solid_area() const {
    double area = 0.0;
    for (int t = 0; t < n_triangles(); ++t) {
        if (!tri_solid[t]) continue;
        const Vec2 &p0 = xy[tri[t][0]], &p1 = xy[tri[t][1]], &p2 = xy[tri[t][2]];
        area += 0.5 * ((p1.x - p0.x) * (p2.y - p0.y) -
                       (p2.x - p0.x) * (p1.y - p0.y));
    }
    return area;
}

double CellMesh::fluid_area() const {
    double area = 0.0;
    for (int t = 0; t < n_triangles(); ++t) {
        if (tri_solid[t]) continue;
        const Vec2 &p0 = xy[tri[t][0]], &p1 = xy[tri[t][1]], &p2 = xy[tri[t][2]];
        area += 0.5 * ((p1.x - p0.x) * (p2.y - p0.y) -
                       (p2.x - p0.x) * (p1.y - p0.y));
    }
    return area;
}

namespace {

// Shared tensor-grid builder. The plus-shaped band of width w is tagged as
// the fluid phase; wrappers below set phi and optionally swap the phases.
CellMesh build_band_mesh(double w, double resolution, double grading) {
    grading = std::min(1.0, std::max(0.0, grading));

    CellMesh m;
    m.w = w;
    m.resolution = resolution;

    const double a = 0.5 * (1.0 - w);
    const double b = 1.0 - a;
    const std::vector<double> pts = axis_points(a, resolution, grading);
    const int np = static_cast<int>(pts.size());
    const int nrect = np - 1;

    // vertices: grid points then rectangle centres
    m.xy.reserve(static_cast<std::size_t>(np) * np + nrect * nrect);
    for (int j = 0; j < np; ++j) {
        for (int i = 0; i < np; ++i) m.xy.push_back({pts[i], pts[j]});
    }
    auto grid_v = [np](int i, int j) { return j * np + i; };
    const int ncorner = np * np;
    auto centre_v = [&](int i, int j) { return ncorner + j * nrect + i; };
    for (int j = 0; j < nrect; ++j) {
        for (int i = 0; i < nrect; ++i) {
            m.xy.push_back({0.5 * (pts[i] + pts[i + 1]),
                            0.5 * (pts[j] + pts[j + 1])});
        }
    }

    // four triangles per rectangle, tagged by the rectangle midpoint
    m.tri.reserve(static_cast<std::size_t>(nrect) * nrect * 4);
    for (int j = 0; j < nrect; ++j) {
        for (int i = 0; i < nrect; ++i) {
            const int v00 = grid_v(i, j), v10 = grid_v(i + 1, j);
            const int v11 = grid_v(i + 1, j + 1), v01 = grid_v(i, j + 1);
            const int c = centre_v(i, j);
            const double cx = 0.5 * (pts[i] + pts[i + 1]);
            const double cy = 0.5 * (pts[j] + pts[j + 1]);
            const bool fluid =
                w > 0.0 && ((cx > a && cx < b) || (cy > a && cy < b));
            const std::uint8_t solid = fluid ? 0 : 1;
            m.tri.push_back({v00, v10, c});
            m.tri.push_back({v10, v11, c});
            m.tri.push_back({v11, v01, c});
            m.tri.push_back({v01, v00, c});
            for (int k = 0; k < 4; ++k) m.tri_solid.push_back(solid);
        }
    }

    // unique edge table
    std::unordered_map<std::uint64_t, int> edge_id;
    edge_id.reserve(m.tri.size() * 2);
    auto get_edge = [&](int u, int v) {
        const int lo = std::min(u, v), hi = std::max(u, v);
        const std::uint64_t key =
            (static_cast<std::uint64_t>(lo) << 32) | static_cast<std::uint32_t>(hi);
        auto it = edge_id.find(key);
        if (it != edge_id.end()) return it->second;
        const int id = static_cast<int>(m.edge.size());
        m.edge.push_back({lo, hi});
        edge_id.emplace(key, id);
        return id;
    };
    m.tri_edge.resize(m.tri.size());
    for (std::size_t t = 0; t < m.tri.size(); ++t) {
        m.tri_edge[t] = {get_edge(m.tri[t][0], m.tri[t][1]),
                         get_edge(m.tri[t][1], m.tri[t][2]),
                         get_edge(m.tri[t][2], m.tri[t][0])};
    }

    const int n_nodes = m.n_p2_nodes();
    const int nv = m.n_vertices();

    // interface edges separate a solid from a fluid triangle
    std::vector<std::uint8_t> edge_touch_solid(m.edge.size(), 0);
    std::vector<std::uint8_t> edge_touch_fluid(m.edge.size(), 0);
    m.touches_solid.assign(n_nodes, 0);
    m.touches_fluid.assign(n_nodes, 0);
    for (std::size_t t = 0; t < m.tri.size(); ++t) {
        for (int k = 0; k < 3; ++k) {
            if (m.tri_solid[t]) edge_touch_solid[m.tri_edge[t][k]] = 1;
            else edge_touch_fluid[m.tri_edge[t][k]] = 1;
        }
        for (int n : m.tri_p2_nodes(static_cast<int>(t))) {
            if (m.tri_solid[t]) m.touches_solid[n] = 1;
            else m.touches_fluid[n] = 1;
        }
    }
    m.on_interface.assign(n_nodes, 0);
    for (std::size_t e = 0; e < m.edge.size(); ++e) {
        if (edge_touch_solid[e] && edge_touch_fluid[e]) {
            m.on_interface[m.edge[e][0]] = 1;
            m.on_interface[m.edge[e][1]] = 1;
            m.on_interface[nv + static_cast<int>(e)] = 1;
        }
    }

    // periodic identification: x=1 -> x=0, y=1 -> y=0 (grid-exact pairing)
    UnionFind uf(n_nodes);
    for (int j = 0; j < np; ++j) uf.unite(grid_v(np - 1, j), grid_v(0, j));
    for (int i = 0; i < np; ++i) uf.unite(grid_v(i, np - 1), grid_v(i, 0));
    for (int j = 0; j + 1 < np; ++j) {
        uf.unite(nv + get_edge(grid_v(np - 1, j), grid_v(np - 1, j + 1)),
                 nv + get_edge(grid_v(0, j), grid_v(0, j + 1)));
    }
    for (int i = 0; i + 1 < np; ++i) {
        uf.unite(nv + get_edge(grid_v(i, np - 1), grid_v(i + 1, np - 1)),
                 nv + get_edge(grid_v(i, 0), grid_v(i + 1, 0)));
    }
    m.periodic_master.resize(n_nodes);
    for (int n = 0; n < n_nodes; ++n) m.periodic_master[n] = uf.find(n);

    // flags are shared across a periodic equivalence class
    for (int n = 0; n < n_nodes; ++n) {
        const int r = m.periodic_master[n];
        m.touches_solid[r] |= m.touches_solid[n];
        m.touches_fluid[r] |= m.touches_fluid[n];
        m.on_interface[r] |= m.on_interface[n];
    }
    for (int n = 0; n < n_nodes; ++n) {
        const int r = m.periodic_master[n];
        m.touches_solid[n] = m.touches_solid[r];
        m.touches_fluid[n] = m.touches_fluid[r];
        m.on_interface[n] = m.on_interface[r];
    }
    return m;
}

void validate_common(double phi, double resolution) {
    if (phi != 0.0 && (phi < 0.05 || phi > 0.80)) {
        throw std::invalid_argument("porosity must be 0 or in [0.05, 0.80]");
    }
    if (resolution < 1.0 / 256 - 1e-12 || resolution > 1.0 / 16 + 1e-12) {
        throw std::invalid_argument("resolution must lie in [1/256, 1/16]");
    }
}

}  // namespace

CellMesh build_cell_mesh(double phi, double resolution, double grading) {
    validate_common(phi, resolution);
    const double w = channel_width_from_phi(phi);
    if (phi != 0.0 && w < 2.0 * resolution) {
        throw std::invalid_argument(
            "resolution too coarse to resolve the channel (w < 2*resolution)");
    }
    CellMesh m = build_band_mesh(w, resolution, grading);
    m.phi = phi;
    return m;
}

CellMesh build_pore_cell_mesh(double phi, double resolution, double grading) {
    validate_common(phi, resolution);
    if (phi == 0.0) return build_cell_mesh(0.0, resolution, grading);
    const double w = frame_width_from_phi(phi);
    if (std::min(w, 1.0 - w) < 2.0 * resolution) {
        throw std::invalid_argument(
            "resolution too coarse to resolve the pore or the frame ligament");
    }
    CellMesh m = build_band_mesh(w, resolution, grading);
    m.phi = phi;
    // swap phases: the band becomes the solid frame, the glued corner
    // blocks become the single periodic pore
    for (auto& s : m.tri_solid) s = s ? 0 : 1;
    std::swap(m.touches_solid, m.touches_fluid);
    return m;
}

}  // namespace mlporo::cell
