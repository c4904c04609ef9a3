#pragma once

#include <algorithm>
#include <climits>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "microforge/core/distance.hpp"
#include "microforge/core/fft.hpp"
#include "microforge/core/geometry.hpp"
#include "microforge/core/gray_model.hpp"
#include "microforge/core/parallel.hpp"
#include "microforge/core/random.hpp"
#include "microforge/core/volume.hpp"
#include "microforge/maxflow.hpp"
#include "microforge/tessellation.hpp"

namespace microforge {

/// Set of tessellation facets forming a SOURCE/SINK separating cut, with a
/// total thickness (in voxel edge lengths) per facet.
struct CrackSurface {
    Axis axis = Axis::z;
    std::vector<int> facet_ids;  // ascending
    std::vector<int> widths;     // parallel to facet_ids, each >= 1
    double weight = 0.0;         // total facet area, summed in facet_ids order

    std::size_t size() const { return facet_ids.size(); }
    bool empty() const { return facet_ids.empty(); }
};

inline double cut_weight(const Tessellation& t, const std::vector<int>& facet_ids) {
    double w = 0.0;
    for (int f : facet_ids) w += t.facets[f].area;
    return w;
}

/// Minimum-area facet set separating the cells on the low window face from
/// those on the high face along `axis`, via max-flow on the facet graph.
/// The returned cut is the source side of the final residual graph.
inline CrackSurface min_cut_crack(const Tessellation& t, Axis axis, int initial_width = 1) {
    if (initial_width < 1) throw std::invalid_argument("crack width must be >= 1");
    const FacetGraph g = facet_graph(t, axis);
    MaxFlow mf(g.num_nodes());
    for (const auto& e : g.edges) {
        if (e.facet < 0)
            mf.add_edge(e.u, e.v, e.weight, 0.0);
        else
            mf.add_edge(e.u, e.v, e.weight, e.weight);
    }
    const double flow = mf.solve(g.source, g.sink);
    if (!std::isfinite(flow))
        throw std::invalid_argument("no finite cut: some cell touches both window faces along the crack axis");
    const auto side = mf.source_side();
    CrackSurface c;
    c.axis = axis;
    for (std::size_t f = 0; f < t.facets.size(); ++f)
        if (side[t.facets[f].cell_a] != side[t.facets[f].cell_b]) c.facet_ids.push_back(static_cast<int>(f));
    if (c.facet_ids.empty()) throw std::invalid_argument("facet graph is disconnected between the terminals");
    c.widths.assign(c.facet_ids.size(), initial_width);
    c.weight = cut_weight(t, c.facet_ids);
    return c;
}

/// Facets of the crack adjacent across a shared tessellation edge, as
/// positions into crack.facet_ids; each list ascending.
inline std::vector<std::vector<int>> crack_adjacency(const CrackSurface& c, const Tessellation& t) {
    std::map<std::pair<int, int>, std::vector<int>> by_edge;
    for (std::size_t k = 0; k < c.facet_ids.size(); ++k) {
        const auto& ids = t.facets[c.facet_ids[k]].vertex_ids;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const int a = ids[i], b = ids[(i + 1) % ids.size()];
            if (a == b) continue;
            by_edge[{std::min(a, b), std::max(a, b)}].push_back(static_cast<int>(k));
        }
    }
    std::vector<std::vector<int>> adj(c.facet_ids.size());
    for (const auto& [edge, list] : by_edge)
        for (int a : list)
            for (int b : list)
                if (a != b) adj[a].push_back(b);
    for (auto& l : adj) {
        std::sort(l.begin(), l.end());
        l.erase(std::unique(l.begin(), l.end()), l.end());
    }
    return adj;
}

/// One visit of the breadth-first facet traversal.
struct TraversalStep {
    int position;  // into crack.facet_ids
    int parent;    // -1 for a component root
};

/// Deterministic breadth-first order over the crack facets. The root is the
/// facet whose centroid is nearest the window centre (lowest index on ties);
/// neighbours are queued in ascending order; further components restart
/// from the remaining facet nearest the centre.
inline std::vector<TraversalStep> crack_traversal(const CrackSurface& c, const Tessellation& t) {
    const auto adj = crack_adjacency(c, t);
    const Vec3 centre = t.window.center();
    const std::size_t n = c.facet_ids.size();
    std::vector<int> by_distance(n);
    std::iota(by_distance.begin(), by_distance.end(), 0);
    std::stable_sort(by_distance.begin(), by_distance.end(), [&](int a, int b) {
        return norm2(t.facets[c.facet_ids[a]].centroid - centre) < norm2(t.facets[c.facet_ids[b]].centroid - centre);
    });
    std::vector<char> seen(n, 0);
    std::vector<TraversalStep> order;
    order.reserve(n);
    for (int root : by_distance) {
        if (seen[root]) continue;
        std::queue<int> q;
        q.push(root);
        seen[root] = 1;
        order.push_back({root, -1});
        while (!q.empty()) {
            const int u = q.front();
            q.pop();
            for (int v : adj[u])
                if (!seen[v]) {
                    seen[v] = 1;
                    order.push_back({v, u});
                    q.push(v);
                }
        }
    }
    return order;
}

struct WidthWalkParams {
    double p = 0.01;
    int w0 = 3;
    int w_min = 1;
    int w_max = INT_MAX;

    void validate() const {
        if (!(p >= 0.0 && p < 0.5)) throw std::invalid_argument("width walk p must lie in [0, 0.5)");
        if (w_min < 1 || w_max < w_min) throw std::invalid_argument("width walk needs 1 <= w_min <= w_max");
        if (w0 < w_min || w0 > w_max) throw std::invalid_argument("width walk w0 must lie in [w_min, w_max]");
    }
};

/// One Bernoulli step: +1 with probability p, -1 with probability p, clamped.
inline int width_step(int w, const WidthWalkParams& params, RandomStream& rng) {
    const double u = rng.uniform();
    long long next = w;
    if (u < params.p)
        next = static_cast<long long>(w) + 1;
    else if (u < 2.0 * params.p)
        next = static_cast<long long>(w) - 1;
    return static_cast<int>(std::clamp<long long>(next, params.w_min, params.w_max));
}

/// The width sequence w_0 = params.w0, w_{k+1} = width_step(w_k).
inline std::vector<int> bernoulli_width_walk(std::size_t steps, const WidthWalkParams& params, const RandomStream& rng) {
    params.validate();
    RandomStream r = rng;
    std::vector<int> w(steps + 1);
    w[0] = params.w0;
    for (std::size_t k = 0; k < steps; ++k) w[k + 1] = width_step(w[k], params, r);
    return w;
}

/// Widths by a Bernoulli random walk along the breadth-first traversal: each
/// facet takes one step from the width of the facet that discovered it.
inline CrackSurface assign_widths_random_walk(CrackSurface c, const Tessellation& t, const WidthWalkParams& params,
                                              const RandomStream& rng) {
    params.validate();
    if (c.empty()) throw std::invalid_argument("cannot assign widths to an empty crack");
    RandomStream r = rng;
    c.widths.assign(c.size(), params.w0);
    for (const auto& step : crack_traversal(c, t))
        c.widths[step.position] = step.parent < 0 ? params.w0 : width_step(c.widths[step.parent], params, r);
    return c;
}

inline CrackSurface assign_constant_width(CrackSurface c, int width) {
    if (width < 1) throw std::invalid_argument("crack width must be >= 1");
    c.widths.assign(c.size(), width);
    return c;
}

/// Split the crack into contiguous regions grown breadth-first from random
/// seed facets and give each region a width from `scales`. Scales are dealt
/// round-robin over a random permutation, so every scale is used whenever
/// there are at least as many regions as scales.
inline CrackSurface make_multiscale_widths(CrackSurface c, const Tessellation& t, const std::vector<int>& scales,
                                           const RandomStream& rng, std::size_t regions = 0) {
    if (scales.empty()) throw std::invalid_argument("multiscale widths need at least one scale");
    for (int s : scales)
        if (s < 1) throw std::invalid_argument("every scale must be >= 1");
    if (c.empty()) throw std::invalid_argument("cannot assign widths to an empty crack");
    if (scales.size() == 1) return assign_constant_width(std::move(c), scales.front());

    RandomStream r = rng;
    const std::size_t n = c.size();
    if (regions == 0) regions = 2 * scales.size();
    regions = std::min(regions, n);

    std::vector<int> perm(scales.size());
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[r.below(i + 1)]);

    // Seeds: partial Fisher-Yates over facet positions.
    std::vector<int> pool(n);
    std::iota(pool.begin(), pool.end(), 0);
    for (std::size_t i = 0; i < regions; ++i) std::swap(pool[i], pool[i + r.below(n - i)]);

    const auto adj = crack_adjacency(c, t);
    std::vector<int> region(n, -1);
    std::queue<int> q;
    std::size_t next_region = 0;
    for (; next_region < regions; ++next_region) {
        region[pool[next_region]] = static_cast<int>(next_region);
        q.push(pool[next_region]);
    }
    auto flood = [&] {
        while (!q.empty()) {
            const int u = q.front();
            q.pop();
            for (int v : adj[u])
                if (region[v] < 0) {
                    region[v] = region[u];
                    q.push(v);
                }
        }
    };
    flood();
    for (std::size_t i = 0; i < n; ++i)
        if (region[i] < 0) {  // component without a seed
            region[i] = static_cast<int>(next_region++);
            q.push(static_cast<int>(i));
            flood();
        }
    c.widths.resize(n);
    for (std::size_t i = 0; i < n; ++i) c.widths[i] = scales[perm[static_cast<std::size_t>(region[i]) % perm.size()]];
    return c;
}

/// Union of two cuts of the same tessellation; shared facets keep the larger width.
inline CrackSurface union_cracks(const CrackSurface& a, const CrackSurface& b, const Tessellation& t) {
    std::map<int, int> w;
    for (std::size_t i = 0; i < a.size(); ++i) w[a.facet_ids[i]] = a.widths[i];
    for (std::size_t i = 0; i < b.size(); ++i) {
        auto [it, inserted] = w.emplace(b.facet_ids[i], b.widths[i]);
        if (!inserted) it->second = std::max(it->second, b.widths[i]);
    }
    CrackSurface c;
    c.axis = a.axis;
    for (const auto& [f, width] : w) {
        c.facet_ids.push_back(f);
        c.widths.push_back(width);
    }
    c.weight = cut_weight(t, c.facet_ids);
    return c;
}

namespace detail {

/// Voxel edge length mapping the tessellation window onto `dims`; the window
/// must be sampled isotropically.
inline double voxel_edge(const Box& window, const Dims& dims) {
    const Vec3 e = window.extent();
    const double hx = e.x / dims.nx, hy = e.y / dims.ny, hz = e.z / dims.nz;
    if (std::fabs(hx - hy) > 1e-6 * hx || std::fabs(hx - hz) > 1e-6 * hx)
        throw std::invalid_argument("dims " + dims.str() + " do not sample the tessellation window isotropically");
    return hx;
}

inline double point_segment_dist2(const Vec3& p, const Vec3& a, const Vec3& b) {
    const Vec3 ab = b - a;
    const double len2 = norm2(ab);
    double s = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
    s = std::clamp(s, 0.0, 1.0);
    return norm2(p - (a + ab * s));
}

}  // namespace detail

/// Adaptive dilation of the cut facets: a voxel is labelled when its centre
/// lies within width/2 voxel edges of a facet polygon. Each facet is
/// rasterised over its bounding box, restricted per voxel row to the slab
/// around its plane.
inline LabelMask voxelize_crack(const CrackSurface& c, const Tessellation& t, const Dims& dims,
                                Spacing spacing_um = {1.0, 1.0, 1.0}) {
    if (!dims.valid()) throw std::invalid_argument("voxelization dims must be positive");
    const double h = detail::voxel_edge(t.window, dims);
    const std::int64_t min_dim = std::min({dims.nx, dims.ny, dims.nz});
    for (int w : c.widths)
        if (w < 1 || 2 * static_cast<std::int64_t>(w) > min_dim)
            throw std::invalid_argument("crack width " + std::to_string(w) + " is degenerate for dims " + dims.str());

    struct Prepared {
        const Facet* f;
        double r;      // world units
        Vec3 n;
        double off;
        std::int64_t lo[3], hi[3];
    };
    std::vector<Prepared> facets;
    facets.reserve(c.size());
    const Vec3 o = t.window.lo;
    for (std::size_t k = 0; k < c.size(); ++k) {
        const Facet& f = t.facets[c.facet_ids[k]];
        Prepared p{&f, 0.5 * c.widths[k] * h, f.normal, dot(f.normal, f.centroid), {}, {}};
        Vec3 bmin{1e300, 1e300, 1e300}, bmax{-1e300, -1e300, -1e300};
        for (const auto& v : f.polygon)
            for (int a = 0; a < 3; ++a) {
                bmin[a] = std::min(bmin[a], v[a]);
                bmax[a] = std::max(bmax[a], v[a]);
            }
        for (int a = 0; a < 3; ++a) {
            p.lo[a] = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil((bmin[a] - p.r - o[a]) / h - 0.5)));
            p.hi[a] = std::min<std::int64_t>(dims[a] - 1,
                                             static_cast<std::int64_t>(std::floor((bmax[a] + p.r - o[a]) / h - 0.5)));
        }
        facets.push_back(p);
    }

    LabelMask mask(dims, spacing_um);
    const double tol = t.tolerance;
    parallel_for(0, dims.nz, [&](std::int64_t z) {
        const double wz = o.z + (z + 0.5) * h;
        for (const auto& p : facets) {
            if (z < p.lo[2] || z > p.hi[2]) continue;
            const auto& poly = p.f->polygon;
            const double r2 = p.r * p.r + tol;
            for (std::int64_t y = p.lo[1]; y <= p.hi[1]; ++y) {
                const double wy = o.y + (y + 0.5) * h;
                std::int64_t x0 = p.lo[0], x1 = p.hi[0];
                const double rest = p.n.y * wy + p.n.z * wz - p.off;
                if (std::fabs(p.n.x) > 1e-12) {
                    double a = (-p.r - tol - rest) / p.n.x, b = (p.r + tol - rest) / p.n.x;
                    if (a > b) std::swap(a, b);
                    x0 = std::max(x0, static_cast<std::int64_t>(std::ceil((a - o.x) / h - 0.5)));
                    x1 = std::min(x1, static_cast<std::int64_t>(std::floor((b - o.x) / h - 0.5)));
                } else if (std::fabs(rest) > p.r + tol) {
                    continue;
                }
                for (std::int64_t x = x0; x <= x1; ++x) {
                    const std::size_t idx = mask.index(x, y, z);
                    if (mask[idx]) continue;
                    const Vec3 q{o.x + (x + 0.5) * h, wy, wz};
                    const double s = dot(p.n, q) - p.off;
                    if (s * s > r2) continue;
                    const Vec3 proj = q - p.n * s;
                    bool inside = true;
                    for (std::size_t i = 0; i < poly.size(); ++i) {
                        const Vec3& a = poly[i];
                        const Vec3& b = poly[(i + 1) % poly.size()];
                        if (dot(p.n, cross(b - a, proj - a)) < -tol) {
                            inside = false;
                            break;
                        }
                    }
                    double d2 = s * s;
                    if (!inside) {
                        d2 = std::numeric_limits<double>::infinity();
                        for (std::size_t i = 0; i < poly.size(); ++i)
                            d2 = std::min(d2, detail::point_segment_dist2(q, poly[i], poly[(i + 1) % poly.size()]));
                    }
                    if (d2 <= r2) mask[idx] = 1;
                }
            }
        }
    });
    return mask;
}

/// Fractional Brownian surface on an nx-by-ny periodic grid (x-fastest) by
/// spectral synthesis: Gaussian coefficients with power |k|^(-2H-2), Hermitian
/// symmetric, zero mean. Normalised to unit RMS.
inline std::vector<double> fbm_surface(std::int64_t nx, std::int64_t ny, double hurst, const RandomStream& rng) {
    if (!(hurst > 0.0 && hurst < 1.0)) throw std::invalid_argument("Hurst exponent must lie in (0, 1)");
    if (nx < 2 || ny < 2) throw std::invalid_argument("fBm surface needs at least 2x2 samples");
    RealFft3 fft(Dims{nx, ny, 1});
    const std::int64_t hx = fft.half_nx();
    auto* spec = fft.spectrum();
    std::fill(spec, spec + fft.spectrum_size(), std::complex<double>{});
    for (std::int64_t ky = 0; ky < ny; ++ky) {
        RandomStream row = rng.substream(static_cast<std::uint64_t>(ky));
        for (std::int64_t kx = 0; kx < hx; ++kx) {
            const double fx = double(RealFft3::frequency(kx, nx)) / nx;
            const double fy = double(RealFft3::frequency(ky, ny)) / ny;
            const double f = std::hypot(fx, fy);
            const double re = row.normal(), im = row.normal();
            if (f == 0.0) continue;
            const double amp = std::pow(f, -hurst - 1.0) / std::numbers::sqrt2;
            spec[kx + hx * ky] = {amp * re, amp * im};
        }
    }
    // Columns kx = 0 (and kx = nx/2 for even nx) must be Hermitian within themselves.
    for (std::int64_t kx : {std::int64_t{0}, nx % 2 == 0 ? nx / 2 : std::int64_t{-1}}) {
        if (kx < 0) continue;
        for (std::int64_t ky = 1; ky < ny; ++ky) {
            const std::int64_t mirror = ny - ky;
            if (ky < mirror) spec[kx + hx * mirror] = std::conj(spec[kx + hx * ky]);
            if (ky == mirror) spec[kx + hx * ky] = {spec[kx + hx * ky].real(), 0.0};
        }
        spec[kx] = {spec[kx].real(), 0.0};
    }
    spec[0] = {};
    fft.inverse();
    std::vector<double> h(static_cast<std::size_t>(nx * ny));
    double mean = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        h[i] = fft.real()[i];
        mean += h[i];
    }
    mean /= static_cast<double>(h.size());
    double ss = 0.0;
    for (auto& v : h) {
        v -= mean;
        ss += v * v;
    }
    const double rms = std::sqrt(ss / static_cast<double>(h.size()));
    if (rms > 0.0)
        for (auto& v : h) v /= rms;
    return h;
}

/// Crack along the xy-plane whose mid-surface is a fractional Brownian
/// height field with RMS `amplitude_vox`, centred on the middle voxel layer.
/// Each column covers the span between its height and the midpoints to its
/// 4-neighbours (so the surface stays 6-separating), widened by half a voxel;
/// widths above 1 are added by Euclidean dilation of (width - 1) / 2.
inline LabelMask brownian_crack(double hurst, double amplitude_vox, const Dims& dims, const RandomStream& rng,
                                int width = 1, Spacing spacing_um = {1.0, 1.0, 1.0}) {
    if (!(hurst > 0.0 && hurst < 1.0)) throw std::invalid_argument("Hurst exponent must lie in (0, 1)");
    if (dims.nx < 8 || dims.ny < 8 || dims.nz < 8) throw std::invalid_argument("Brownian crack needs dims >= 8^3");
    if (!(amplitude_vox >= 0.0)) throw std::invalid_argument("amplitude must be >= 0");
    if (width < 1 || 2 * width > std::min({dims.nx, dims.ny, dims.nz}))
        throw std::invalid_argument("crack width is degenerate for the volume");

    const double mid = std::floor(dims.nz / 2.0) + 0.5;
    std::vector<double> height(static_cast<std::size_t>(dims.nx * dims.ny), mid);
    if (amplitude_vox > 0.0) {
        const auto f = fbm_surface(dims.nx, dims.ny, hurst, rng);
        for (std::size_t i = 0; i < f.size(); ++i)
            height[i] = std::clamp(mid + amplitude_vox * f[i], 0.5, dims.nz - 0.5);
    }
    LabelMask m(dims, spacing_um);
    auto hgt = [&](std::int64_t x, std::int64_t y) { return height[static_cast<std::size_t>(x + dims.nx * y)]; };
    for (std::int64_t y = 0; y < dims.ny; ++y)
        for (std::int64_t x = 0; x < dims.nx; ++x) {
            const double h0 = hgt(x, y);
            double lo = h0, hi = h0;
            const std::int64_t nb[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
            for (const auto& q : nb) {
                if (q[0] < 0 || q[1] < 0 || q[0] >= dims.nx || q[1] >= dims.ny) continue;
                const double midpoint = 0.5 * (h0 + hgt(q[0], q[1]));
                lo = std::min(lo, midpoint);
                hi = std::max(hi, midpoint);
            }
            const auto z0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(lo - 0.5 - 0.5)));
            const auto z1 = std::min<std::int64_t>(dims.nz - 1, static_cast<std::int64_t>(std::floor(hi + 0.5 - 0.5)));
            for (std::int64_t z = z0; z <= z1; ++z) m(x, y, z) = 1;
        }
    if (width > 1) m = dilate_euclidean(m, 0.5 * (width - 1));
    return m;
}

/// Histogram (64 bins) and Gaussian fit of the gray values below `air_threshold`.
inline GrayModel estimate_air_gray_model(const GrayVolume& background, double air_threshold) {
    double mean = 0.0, m2 = 0.0;
    std::size_t n = 0;
    float lo = std::numeric_limits<float>::infinity(), hi = -std::numeric_limits<float>::infinity();
    for (float v : background.data()) {
        if (!(v < air_threshold)) continue;
        ++n;
        const double delta = v - mean;
        mean += delta / static_cast<double>(n);
        m2 += delta * (v - mean);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (n == 0) throw std::invalid_argument("no voxels below the air threshold " + std::to_string(air_threshold));
    GrayModel g;
    g.kind = GrayModel::Kind::empirical;
    g.mean = mean;
    g.stddev = std::sqrt(m2 / static_cast<double>(n));
    constexpr int bins = 64;
    if (hi > lo) {
        g.bin_edges.resize(bins + 1);
        for (int i = 0; i <= bins; ++i) g.bin_edges[i] = lo + (hi - lo) * i / double(bins);
        g.weights.assign(bins, 0.0);
        for (float v : background.data()) {
            if (!(v < air_threshold)) continue;
            const int b = std::min(bins - 1, static_cast<int>((v - lo) / (hi - lo) * bins));
            g.weights[b] += 1.0;
        }
    } else {
        g.bin_edges = {lo, lo};
        g.weights = {static_cast<double>(n)};
    }
    return g;
}

/// Impress a crack mask into a background volume.
///
/// Mask voxels take min(background, gray sample); voxel z draws from
/// substream z in x-fastest order. When pv_sigma_vox > 0, voxels in the
/// one-voxel band around the mask boundary (either side, 26-neighbourhood)
/// are replaced by a Gaussian-weighted mean of the filled volume. Everything
/// else is copied from the background unchanged.
inline GrayVolume blend_into_volume(const GrayVolume& background, const LabelMask& mask, const GrayModel& model,
                                    double pv_sigma_vox, const RandomStream& rng) {
    require_same_dims(background, mask, "blend_into_volume");
    model.validate();
    if (!(pv_sigma_vox >= 0.0)) throw std::invalid_argument("pv_sigma_vox must be >= 0");
    const Dims d = background.dims();
    GrayVolume filled = background;

    std::vector<char> row_has(static_cast<std::size_t>(d.ny * d.nz), 0);
    parallel_for(0, d.nz, [&](std::int64_t z) {
        RandomStream zr = rng.substream(static_cast<std::uint64_t>(z));
        for (std::int64_t y = 0; y < d.ny; ++y)
            for (std::int64_t x = 0; x < d.nx; ++x) {
                const std::size_t i = filled.index(x, y, z);
                if (!mask[i]) continue;
                row_has[static_cast<std::size_t>(y + d.ny * z)] = 1;
                filled[i] = std::min(background[i], static_cast<float>(model.sample(zr)));
            }
    });
    if (pv_sigma_vox == 0.0) return filled;

    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * pv_sigma_vox)));
    std::vector<double> w1(2 * radius + 1);
    for (int k = -radius; k <= radius; ++k) w1[k + radius] = std::exp(-0.5 * k * k / (pv_sigma_vox * pv_sigma_vox));

    GrayVolume out = filled;
    parallel_for(0, d.nz, [&](std::int64_t z) {
        for (std::int64_t y = 0; y < d.ny; ++y) {
            bool near = false;
            for (std::int64_t dz = -1; dz <= 1 && !near; ++dz)
                for (std::int64_t dy = -1; dy <= 1 && !near; ++dy) {
                    const std::int64_t yy = y + dy, zz = z + dz;
                    if (yy >= 0 && zz >= 0 && yy < d.ny && zz < d.nz && row_has[static_cast<std::size_t>(yy + d.ny * zz)])
                        near = true;
                }
            if (!near) continue;
            for (std::int64_t x = 0; x < d.nx; ++x) {
                const std::uint8_t label = mask(x, y, z);
                bool band = false;
                for (std::int64_t dz = -1; dz <= 1 && !band; ++dz)
                    for (std::int64_t dy = -1; dy <= 1 && !band; ++dy)
                        for (std::int64_t dx = -1; dx <= 1 && !band; ++dx) {
                            const std::int64_t xx = x + dx, yy = y + dy, zz = z + dz;
                            if (mask.in_bounds(xx, yy, zz) && mask(xx, yy, zz) != label) band = true;
                        }
                if (!band) continue;
                double acc = 0.0, wsum = 0.0;
                for (int dz = -radius; dz <= radius; ++dz) {
                    const std::int64_t zz = z + dz;
                    if (zz < 0 || zz >= d.nz) continue;
                    for (int dy = -radius; dy <= radius; ++dy) {
                        const std::int64_t yy = y + dy;
                        if (yy < 0 || yy >= d.ny) continue;
                        const double wyz = w1[dz + radius] * w1[dy + radius];
                        for (int dx = -radius; dx <= radius; ++dx) {
                            const std::int64_t xx = x + dx;
                            if (xx < 0 || xx >= d.nx) continue;
                            const double w = wyz * w1[dx + radius];
                            acc += w * filled(xx, yy, zz);
                            wsum += w;
                        }
                    }
                }
                out(x, y, z) = static_cast<float>(acc / wsum);
            }
        }
    });
    return out;
}

}  // namespace microforge
