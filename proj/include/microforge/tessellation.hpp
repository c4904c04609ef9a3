#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "microforge/core/error.hpp"
#include "microforge/core/geometry.hpp"
#include "microforge/core/parallel.hpp"
#include "microforge/point_process.hpp"

namespace microforge {

/// Window face index: 2 * axis + (0 = low side, 1 = high side).
constexpr int window_face(Axis a, bool high) { return 2 * static_cast<int>(a) + (high ? 1 : 0); }

/// Planar convex polygon bounding a cell. `label` >= 0 names the neighbouring
/// cell; a negative label -(k + 1) marks window face k.
struct PolyFace {
    std::vector<Vec3> verts;  // counter-clockwise seen from outside
    Vec3 normal;              // outward unit normal
    double offset = 0.0;      // plane: dot(normal, x) = offset
    int label = 0;
};

namespace detail {

inline Vec3 centroid(const std::vector<Vec3>& pts) {
    Vec3 c;
    for (const auto& p : pts) c += p;
    return pts.empty() ? c : c / static_cast<double>(pts.size());
}

/// Order coplanar points counter-clockwise around `normal`.
inline void order_ccw(std::vector<Vec3>& pts, const Vec3& normal) {
    const Vec3 c = centroid(pts);
    Vec3 u = pts.front() - c;
    if (norm2(u) == 0.0) u = std::fabs(normal.x) < 0.9 ? cross(normal, {1, 0, 0}) : cross(normal, {0, 1, 0});
    u = normalized(u - normal * dot(u, normal));
    const Vec3 v = cross(normal, u);
    std::vector<std::pair<double, Vec3>> keyed;
    keyed.reserve(pts.size());
    for (const auto& p : pts) keyed.emplace_back(std::atan2(dot(p - c, v), dot(p - c, u)), p);
    std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = keyed[i].second;
}

/// Area by fan triangulation from the polygon centroid.
inline double polygon_area(const std::vector<Vec3>& verts, const Vec3& normal) {
    if (verts.size() < 3) return 0.0;
    const Vec3 c = centroid(verts);
    double a = 0.0;
    for (std::size_t i = 0; i < verts.size(); ++i)
        a += dot(normal, cross(verts[i] - c, verts[(i + 1) % verts.size()] - c));
    return 0.5 * a;
}

inline void dedupe(std::vector<Vec3>& pts, double tol) {
    std::vector<Vec3> out;
    out.reserve(pts.size());
    for (const auto& p : pts) {
        bool dup = false;
        for (const auto& q : out)
            if (norm2(p - q) <= tol * tol) {
                dup = true;
                break;
            }
        if (!dup) out.push_back(p);
    }
    pts.swap(out);
}

}  // namespace detail

/// Convex polyhedron stored as its face polygons; shrinks by half-space clipping.
class ConvexCell {
public:
    static ConvexCell box(const Box& b) {
        ConvexCell c;
        const Vec3 lo = b.lo, hi = b.hi;
        auto add = [&](Vec3 n, double off, int face, std::vector<Vec3> pts) {
            detail::order_ccw(pts, n);
            c.faces_.push_back({std::move(pts), n, off, -(face + 1)});
        };
        add({-1, 0, 0}, -lo.x, 0, {{lo.x, lo.y, lo.z}, {lo.x, hi.y, lo.z}, {lo.x, hi.y, hi.z}, {lo.x, lo.y, hi.z}});
        add({1, 0, 0}, hi.x, 1, {{hi.x, lo.y, lo.z}, {hi.x, hi.y, lo.z}, {hi.x, hi.y, hi.z}, {hi.x, lo.y, hi.z}});
        add({0, -1, 0}, -lo.y, 2, {{lo.x, lo.y, lo.z}, {hi.x, lo.y, lo.z}, {hi.x, lo.y, hi.z}, {lo.x, lo.y, hi.z}});
        add({0, 1, 0}, hi.y, 3, {{lo.x, hi.y, lo.z}, {hi.x, hi.y, lo.z}, {hi.x, hi.y, hi.z}, {lo.x, hi.y, hi.z}});
        add({0, 0, -1}, -lo.z, 4, {{lo.x, lo.y, lo.z}, {hi.x, lo.y, lo.z}, {hi.x, hi.y, lo.z}, {lo.x, hi.y, lo.z}});
        add({0, 0, 1}, hi.z, 5, {{lo.x, lo.y, hi.z}, {hi.x, lo.y, hi.z}, {hi.x, hi.y, hi.z}, {lo.x, hi.y, hi.z}});
        return c;
    }

    const std::vector<PolyFace>& faces() const { return faces_; }
    bool empty() const { return faces_.size() < 4; }

    /// Keep the half-space dot(n, x) <= d. Vertices within `tol` of the plane
    /// count as on it. Returns false when nothing was cut away.
    bool clip(const Vec3& n, double d, int label, double tol) {
        bool any_out = false;
        for (const auto& f : faces_) {
            for (const auto& v : f.verts)
                if (dot(n, v) - d > tol) {
                    any_out = true;
                    break;
                }
            if (any_out) break;
        }
        if (!any_out) return false;

        std::vector<PolyFace> kept;
        kept.reserve(faces_.size() + 1);
        std::vector<Vec3> cap;
        for (const auto& f : faces_) {
            PolyFace g{{}, f.normal, f.offset, f.label};
            const std::size_t m = f.verts.size();
            for (std::size_t i = 0; i < m; ++i) {
                const Vec3& a = f.verts[i];
                const Vec3& b = f.verts[(i + 1) % m];
                const double sa = dot(n, a) - d;
                const double sb = dot(n, b) - d;
                if (sa <= tol) g.verts.push_back(a);
                if (std::fabs(sa) <= tol) cap.push_back(a);
                if ((sa < -tol && sb > tol) || (sa > tol && sb < -tol)) {
                    const Vec3 p = a + (b - a) * (sa / (sa - sb));
                    g.verts.push_back(p);
                    cap.push_back(p);
                }
            }
            detail::dedupe(g.verts, tol);
            if (g.verts.size() >= 3) kept.push_back(std::move(g));
        }
        detail::dedupe(cap, tol);
        if (cap.size() >= 3) {
            detail::order_ccw(cap, n);
            kept.push_back({std::move(cap), n, d, label});
        }
        faces_ = std::move(kept);
        return true;
    }

    double volume() const {
        if (faces_.empty()) return 0.0;
        std::vector<Vec3> all;
        for (const auto& f : faces_) all.insert(all.end(), f.verts.begin(), f.verts.end());
        const Vec3 c = detail::centroid(all);
        double v = 0.0;
        for (const auto& f : faces_) {
            const Vec3 fc = detail::centroid(f.verts);
            for (std::size_t i = 0; i < f.verts.size(); ++i)
                v += dot(fc - c, cross(f.verts[i] - fc, f.verts[(i + 1) % f.verts.size()] - fc));
        }
        return v / 6.0;
    }

    double max_dist2(const Vec3& p) const {
        double r = 0.0;
        for (const auto& f : faces_)
            for (const auto& v : f.verts) r = std::max(r, norm2(v - p));
        return r;
    }

    bool contains(const Vec3& p, double tol) const {
        for (const auto& f : faces_)
            if (dot(f.normal, p) - f.offset > tol) return false;
        return true;
    }

private:
    std::vector<PolyFace> faces_;
};

struct VoronoiCell {
    Vec3 germ;
    ConvexCell polytope;
    double volume = 0.0;
    unsigned boundary_faces = 0;  // bit k set when the cell touches window face k

    bool touches(Axis a, bool high) const { return (boundary_faces >> window_face(a, high)) & 1u; }
};

/// Interior facet shared by two cells (cell_a < cell_b).
struct Facet {
    int cell_a = -1;
    int cell_b = -1;
    std::vector<Vec3> polygon;
    std::vector<int> vertex_ids;  // welded global vertex indices, same order as polygon
    Vec3 normal;                  // unit, pointing from cell_a to cell_b
    Vec3 centroid;
    double area = 0.0;
};

struct Tessellation {
    Box window;
    double tolerance = 1e-9;
    std::vector<VoronoiCell> cells;
    std::vector<Facet> facets;
    std::vector<Vec3> vertices;                 // welded facet vertices
    std::vector<std::vector<int>> cell_facets;  // facet ids per cell

    std::size_t num_cells() const { return cells.size(); }

    double interior_facet_area() const {
        double a = 0.0;
        for (const auto& f : facets) a += f.area;
        return a;
    }

    /// Index of a cell whose polytope contains p (lowest index on ties), or -1.
    int locate(const Vec3& p) const {
        for (std::size_t i = 0; i < cells.size(); ++i)
            if (cells[i].polytope.contains(p, tolerance)) return static_cast<int>(i);
        return -1;
    }
};

namespace detail {

/// Welds vertices closer than `tol` by hashing onto a grid of cell size tol.
class VertexWelder {
public:
    explicit VertexWelder(double tol) : tol_(tol) {}

    int insert(const Vec3& p, std::vector<Vec3>& store) {
        const auto k = key(p);
        for (std::int64_t dz = -1; dz <= 1; ++dz)
            for (std::int64_t dy = -1; dy <= 1; ++dy)
                for (std::int64_t dx = -1; dx <= 1; ++dx) {
                    auto it = map_.find(pack(k[0] + dx, k[1] + dy, k[2] + dz));
                    if (it == map_.end()) continue;
                    for (int id : it->second)
                        if (norm2(store[id] - p) <= tol_ * tol_) return id;
                }
        const int id = static_cast<int>(store.size());
        store.push_back(p);
        map_[pack(k[0], k[1], k[2])].push_back(id);
        return id;
    }

private:
    std::array<std::int64_t, 3> key(const Vec3& p) const {
        return {static_cast<std::int64_t>(std::floor(p.x / tol_)), static_cast<std::int64_t>(std::floor(p.y / tol_)),
                static_cast<std::int64_t>(std::floor(p.z / tol_))};
    }
    static std::uint64_t pack(std::int64_t x, std::int64_t y, std::int64_t z) {
        std::uint64_t h = splitmix64(static_cast<std::uint64_t>(x));
        h = splitmix64(h ^ static_cast<std::uint64_t>(y));
        return splitmix64(h ^ static_cast<std::uint64_t>(z));
    }

    double tol_;
    std::unordered_map<std::uint64_t, std::vector<int>> map_;
};

}  // namespace detail

/// Voronoi tessellation of `pattern` clipped to `window`.
///
/// Each cell starts as the window box and is clipped by the bisector planes of
/// neighbouring germs, visited in growing grid shells until the shell lies
/// beyond twice the cell's current radius. Coordinates are compared with a
/// tolerance of 1e-9 times the largest window extent (at least 1e-9).
inline Tessellation build_voronoi(const PointPattern& pattern, const Box& window) {
    if (window.degenerate()) throw std::invalid_argument("tessellation window is degenerate");
    if (pattern.empty()) throw std::invalid_argument("tessellation needs at least one germ");
    const double tol = 1e-9 * std::max(1.0, window.max_extent());
    const auto& pts = pattern.points;
    const std::size_t n = pts.size();
    for (const auto& p : pts)
        if (!window.dilated(tol).contains(p)) throw std::invalid_argument("germ lies outside the tessellation window");

    Tessellation t;
    t.window = window;
    t.tolerance = tol;
    t.cells.resize(n);

    // Germ grid with roughly one germ per bucket.
    const Vec3 ext = window.extent();
    const double h = std::cbrt(window.volume() / static_cast<double>(n));
    const int gx = std::clamp(static_cast<int>(ext.x / h), 1, 1024);
    const int gy = std::clamp(static_cast<int>(ext.y / h), 1, 1024);
    const int gz = std::clamp(static_cast<int>(ext.z / h), 1, 1024);
    const double hmin = std::min({ext.x / gx, ext.y / gy, ext.z / gz});
    std::vector<std::vector<int>> grid(static_cast<std::size_t>(gx) * gy * gz);
    auto bucket = [&](const Vec3& p) {
        const int cx = std::clamp(static_cast<int>((p.x - window.lo.x) / ext.x * gx), 0, gx - 1);
        const int cy = std::clamp(static_cast<int>((p.y - window.lo.y) / ext.y * gy), 0, gy - 1);
        const int cz = std::clamp(static_cast<int>((p.z - window.lo.z) / ext.z * gz), 0, gz - 1);
        return std::array<int, 3>{cx, cy, cz};
    };
    for (std::size_t i = 0; i < n; ++i) {
        const auto b = bucket(pts[i]);
        grid[(static_cast<std::size_t>(b[2]) * gy + b[1]) * gx + b[0]].push_back(static_cast<int>(i));
    }
    const int max_ring = std::max({gx, gy, gz});

    parallel_for(0, static_cast<std::int64_t>(n), [&](std::int64_t ii) {
        const auto i = static_cast<std::size_t>(ii);
        const Vec3 pi = pts[i];
        ConvexCell cell = ConvexCell::box(window);
        const auto b = bucket(pi);
        std::vector<std::pair<double, int>> ring;
        for (int k = 0; k <= max_ring; ++k) {
            ring.clear();
            for (int z = b[2] - k; z <= b[2] + k; ++z)
                for (int y = b[1] - k; y <= b[1] + k; ++y)
                    for (int x = b[0] - k; x <= b[0] + k; ++x) {
                        if (std::max({std::abs(x - b[0]), std::abs(y - b[1]), std::abs(z - b[2])}) != k) continue;
                        if (x < 0 || y < 0 || z < 0 || x >= gx || y >= gy || z >= gz) continue;
                        for (int j : grid[(static_cast<std::size_t>(z) * gy + y) * gx + x]) {
                            if (static_cast<std::size_t>(j) == i) continue;
                            ring.emplace_back(norm2(pts[j] - pi), j);
                        }
                    }
            std::sort(ring.begin(), ring.end());
            for (const auto& [d2, j] : ring) {
                if (d2 <= tol * tol)
                    throw std::invalid_argument("duplicate germs " + std::to_string(i) + " and " + std::to_string(j));
                if (d2 > 4.0 * cell.max_dist2(pi)) continue;
                const Vec3 diff = pts[j] - pi;
                const Vec3 nrm = diff / std::sqrt(d2);
                cell.clip(nrm, dot(nrm, (pi + pts[j]) * 0.5), j, tol);
            }
            const double reach = k * hmin;
            if (reach * reach >= 4.0 * cell.max_dist2(pi)) break;
        }
        VoronoiCell& vc = t.cells[i];
        vc.germ = pi;
        vc.volume = cell.volume();
        for (const auto& f : cell.faces())
            if (f.label < 0 && detail::polygon_area(f.verts, f.normal) > tol * tol)
                vc.boundary_faces |= 1u << (-f.label - 1);
        vc.polytope = std::move(cell);
    });

    // Collect each interior facet once; prefer the lower-index cell's polygon.
    std::map<std::pair<int, int>, std::pair<int, const PolyFace*>> found;
    for (std::size_t i = 0; i < n; ++i)
        for (const auto& f : t.cells[i].polytope.faces()) {
            if (f.label < 0) continue;
            const int a = std::min<int>(static_cast<int>(i), f.label);
            const int bb = std::max<int>(static_cast<int>(i), f.label);
            if (detail::polygon_area(f.verts, f.normal) <= tol * tol) continue;
            auto it = found.find({a, bb});
            if (it == found.end() || static_cast<int>(i) == a) found[{a, bb}] = {static_cast<int>(i), &f};
        }

    detail::VertexWelder welder(tol);
    t.cell_facets.assign(n, {});
    for (const auto& [key, src] : found) {
        Facet fc;
        fc.cell_a = key.first;
        fc.cell_b = key.second;
        fc.polygon = src.second->verts;
        fc.normal = src.first == key.first ? src.second->normal : -src.second->normal;
        if (src.first != key.first) std::reverse(fc.polygon.begin(), fc.polygon.end());
        fc.area = detail::polygon_area(fc.polygon, fc.normal);
        fc.centroid = detail::centroid(fc.polygon);
        for (const auto& v : fc.polygon) fc.vertex_ids.push_back(welder.insert(v, t.vertices));
        const int id = static_cast<int>(t.facets.size());
        t.cell_facets[fc.cell_a].push_back(id);
        t.cell_facets[fc.cell_b].push_back(id);
        t.facets.push_back(std::move(fc));
    }
    return t;
}

/// Max-flow substrate: nodes are cells plus SOURCE (index n) and SINK (n + 1).
struct FacetGraph {
    struct Edge {
        int u = 0;
        int v = 0;
        double weight = 0.0;  // facet area, or +inf for terminal attachments
        int facet = -1;       // -1 for terminal edges
    };

    int num_cells = 0;
    int source = 0;
    int sink = 0;
    Axis axis = Axis::z;
    std::vector<Edge> edges;

    int num_nodes() const { return num_cells + 2; }
    std::size_t terminal_edges() const {
        return static_cast<std::size_t>(std::count_if(edges.begin(), edges.end(), [](const Edge& e) { return e.facet < 0; }));
    }
    double finite_weight() const {
        double s = 0.0;
        for (const auto& e : edges)
            if (e.facet >= 0) s += e.weight;
        return s;
    }
};

/// Cells touching the low window face along `axis` attach to SOURCE, cells
/// touching the high face to SINK, both with infinite weight; every interior
/// facet becomes an edge weighted by its area.
inline FacetGraph facet_graph(const Tessellation& t, Axis axis) {
    FacetGraph g;
    g.num_cells = static_cast<int>(t.num_cells());
    g.source = g.num_cells;
    g.sink = g.num_cells + 1;
    g.axis = axis;
    const double inf = std::numeric_limits<double>::infinity();
    bool any_low = false, any_high = false;
    for (int i = 0; i < g.num_cells; ++i) {
        if (t.cells[i].touches(axis, false)) {
            g.edges.push_back({g.source, i, inf, -1});
            any_low = true;
        }
        if (t.cells[i].touches(axis, true)) {
            g.edges.push_back({i, g.sink, inf, -1});
            any_high = true;
        }
    }
    if (!any_low || !any_high) throw std::logic_error("no cell touches a terminal window face");
    for (std::size_t f = 0; f < t.facets.size(); ++f)
        g.edges.push_back({t.facets[f].cell_a, t.facets[f].cell_b, t.facets[f].area, static_cast<int>(f)});
    return g;
}

/// Debug dump of the interior facets as an OFF polygon mesh.
inline void write_off(const Tessellation& t, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
    f.precision(17);
    f << "OFF\n" << t.vertices.size() << ' ' << t.facets.size() << " 0\n";
    for (const auto& v : t.vertices) f << v.x << ' ' << v.y << ' ' << v.z << '\n';
    for (const auto& fc : t.facets) {
        f << fc.vertex_ids.size();
        for (int id : fc.vertex_ids) f << ' ' << id;
        f << '\n';
    }
}

}  // namespace microforge
