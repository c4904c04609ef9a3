#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "microforge/core/distribution.hpp"
#include "microforge/core/error.hpp"
#include "microforge/core/geometry.hpp"
#include "microforge/core/random.hpp"

namespace microforge {

/// Germs of a tessellation or Boolean model. Every point lies in the closed window.
struct PointPattern {
    Box window;
    std::vector<Vec3> points;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
};

namespace detail {

inline void require_window(const Box& w) {
    if (w.degenerate()) throw std::invalid_argument("point process window must have positive, finite extent");
}

inline Vec3 uniform_in_box(const Box& w, RandomStream& rng) {
    return {rng.uniform(w.lo.x, w.hi.x), rng.uniform(w.lo.y, w.hi.y), rng.uniform(w.lo.z, w.hi.z)};
}

inline Vec3 uniform_in_ball(double r, RandomStream& rng) {
    for (;;) {
        const Vec3 v{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        if (norm2(v) <= 1.0) return v * r;
    }
}

}  // namespace detail

/// Homogeneous Poisson process. The count is drawn from stream key 0 and
/// point i from key i + 1.
inline PointPattern sample_poisson(double intensity, const Box& window, const RandomStream& rng) {
    if (!(intensity >= 0.0) || !std::isfinite(intensity)) throw std::invalid_argument("intensity must be >= 0");
    detail::require_window(window);
    PointPattern out{window, {}};
    RandomStream count_rng = rng.substream(0);
    const auto n = count_rng.poisson(intensity * window.volume());
    out.points.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        RandomStream prng = rng.substream(i + 1);
        out.points.push_back(detail::uniform_in_box(window, prng));
    }
    return out;
}

struct MaternParams {
    double parent_intensity = 0.0;
    double mean_points_per_cluster = 0.0;
    double cluster_radius = 0.0;

    void validate() const {
        if (!(parent_intensity >= 0.0) || !(mean_points_per_cluster >= 0.0) || !(cluster_radius >= 0.0) ||
            !std::isfinite(parent_intensity) || !std::isfinite(mean_points_per_cluster) ||
            !std::isfinite(cluster_radius))
            throw std::invalid_argument("Matern cluster parameters must be finite and >= 0");
    }
};

/// Matérn cluster process with parents plus-sampled in the window dilated by
/// the cluster radius, so the retained offspring are stationary in the window.
/// Offspring that fall outside the window are discarded.
inline PointPattern sample_matern_cluster(const MaternParams& p, const Box& window, const RandomStream& rng,
                                          std::vector<Vec3>* parents_out = nullptr) {
    p.validate();
    detail::require_window(window);
    PointPattern out{window, {}};
    if (p.parent_intensity == 0.0) return out;
    const PointPattern parents = sample_poisson(p.parent_intensity, window.dilated(p.cluster_radius), rng.substream(0));
    if (parents_out) *parents_out = parents.points;
    for (std::size_t i = 0; i < parents.size(); ++i) {
        RandomStream crng = rng.substream(i + 1);
        const auto k = crng.poisson(p.mean_points_per_cluster);
        for (std::uint64_t j = 0; j < k; ++j) {
            const Vec3 q = parents.points[i] + detail::uniform_in_ball(p.cluster_radius, crng);
            if (window.contains(q)) out.points.push_back(q);
        }
    }
    return out;
}

struct PackingParams {
    std::size_t target_count = 0;
    SizeDistribution radius = SizeDistribution::constant(1.0);
    std::size_t max_iters = 20000;
    double overlap_tol = 1e-3;
    /// Initial inflation of all radii; shrunk geometrically to 1.
    double initial_scale = 1.15;
    double shrink_rate = 0.002;
};

struct SpherePacking {
    PointPattern centers;
    std::vector<double> radii;
    std::size_t iterations = 0;
    double packing_fraction = 0.0;
};

inline double max_relative_overlap(const std::vector<Vec3>& c, const std::vector<double>& r);

/// Force-biased collective rearrangement: spheres start at uniform positions
/// with inflated radii; every iteration pushes overlapping pairs apart by
/// their overlap depth (Jacobi update, fixed pair order) and shrinks the
/// inflation towards 1. Stops once no pair overlaps by more than
/// overlap_tol times the smaller radius. Centres are kept inside the window.
inline SpherePacking sample_force_biased_packing(const PackingParams& params, const Box& window,
                                                 const RandomStream& rng) {
    detail::require_window(window);
    params.radius.validate("packing radius");
    if (!(params.overlap_tol >= 0.0)) throw std::invalid_argument("overlap_tol must be >= 0");
    if (!(params.initial_scale >= 1.0) || !(params.shrink_rate > 0.0 && params.shrink_rate < 1.0))
        throw std::invalid_argument("packing schedule needs initial_scale >= 1 and shrink_rate in (0,1)");

    SpherePacking out;
    out.centers.window = window;
    const std::size_t n = params.target_count;
    if (n == 0) return out;

    RandomStream rrng = rng.substream(0);
    out.radii.resize(n);
    double solid = 0.0;
    for (auto& r : out.radii) {
        r = params.radius.sample(rrng);
        solid += 4.0 / 3.0 * std::numbers::pi * r * r * r;
    }
    out.packing_fraction = solid / window.volume();
    if (out.packing_fraction > 0.6)
        throw std::invalid_argument("requested packing fraction " + std::to_string(out.packing_fraction) +
                                    " exceeds the supported maximum 0.6");

    auto& pts = out.centers.points;
    pts.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        RandomStream prng = rng.substream(i + 1);
        pts[i] = detail::uniform_in_box(window, prng);
    }
    if (n == 1) return out;

    const double rmax = *std::max_element(out.radii.begin(), out.radii.end());
    double scale = params.initial_scale;
    std::vector<Vec3> shift(n);

    for (std::size_t iter = 0; iter < params.max_iters; ++iter) {
        // Uniform grid over the window with cells no smaller than a contact distance.
        const double cell = 2.0 * rmax * scale;
        const Vec3 ext = window.extent();
        const int gx = std::max(1, static_cast<int>(ext.x / cell));
        const int gy = std::max(1, static_cast<int>(ext.y / cell));
        const int gz = std::max(1, static_cast<int>(ext.z / cell));
        std::vector<std::vector<std::size_t>> grid(static_cast<std::size_t>(gx) * gy * gz);
        auto cell_of = [&](const Vec3& p, int& cx, int& cy, int& cz) {
            cx = std::clamp(static_cast<int>((p.x - window.lo.x) / ext.x * gx), 0, gx - 1);
            cy = std::clamp(static_cast<int>((p.y - window.lo.y) / ext.y * gy), 0, gy - 1);
            cz = std::clamp(static_cast<int>((p.z - window.lo.z) / ext.z * gz), 0, gz - 1);
        };
        for (std::size_t i = 0; i < n; ++i) {
            int cx, cy, cz;
            cell_of(pts[i], cx, cy, cz);
            grid[(static_cast<std::size_t>(cz) * gy + cy) * gx + cx].push_back(i);
        }

        std::fill(shift.begin(), shift.end(), Vec3{});
        double worst_true = 0.0;  // max overlap / min radius at scale 1
        bool any_scaled_overlap = false;
        for (std::size_t i = 0; i < n; ++i) {
            int cx, cy, cz;
            cell_of(pts[i], cx, cy, cz);
            for (int dz = -1; dz <= 1; ++dz)
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int x = cx + dx, y = cy + dy, z = cz + dz;
                        if (x < 0 || y < 0 || z < 0 || x >= gx || y >= gy || z >= gz) continue;
                        for (std::size_t j : grid[(static_cast<std::size_t>(z) * gy + y) * gx + x]) {
                            if (j <= i) continue;
                            Vec3 d = pts[j] - pts[i];
                            double dist = norm(d);
                            const double contact = scale * (out.radii[i] + out.radii[j]);
                            if (dist >= contact) continue;
                            any_scaled_overlap = true;
                            worst_true = std::max(worst_true, (out.radii[i] + out.radii[j] - dist) /
                                                                  std::min(out.radii[i], out.radii[j]));
                            if (dist < 1e-12 * contact) {
                                RandomStream drng = rng.substream(0x5EED0000ull + iter).substream(i * n + j);
                                d = normalized(detail::uniform_in_ball(1.0, drng) + Vec3{1e-9, 0, 0});
                                dist = 0.0;
                            } else {
                                d = d / dist;
                            }
                            // Push both spheres apart by half the overlap each, slightly over-relaxed.
                            const double push = 0.5 * 1.01 * (contact - dist);
                            shift[i] -= d * push;
                            shift[j] += d * push;
                        }
                    }
        }
        out.iterations = iter + 1;
        if (scale <= 1.0 && worst_true <= params.overlap_tol) return out;
        if (!any_scaled_overlap && worst_true <= params.overlap_tol) return out;
        for (std::size_t i = 0; i < n; ++i) {
            Vec3 p = pts[i] + shift[i];
            p.x = std::clamp(p.x, window.lo.x, window.hi.x);
            p.y = std::clamp(p.y, window.lo.y, window.hi.y);
            p.z = std::clamp(p.z, window.lo.z, window.hi.z);
            pts[i] = p;
        }
        scale = std::max(1.0, scale * (1.0 - params.shrink_rate));
    }
    throw NonConvergence("force-biased packing did not converge within " + std::to_string(params.max_iters) +
                         " iterations (max relative overlap " +
                         std::to_string(max_relative_overlap(pts, out.radii)) + ")");
}

/// Largest pairwise overlap depth divided by the smaller radius (brute force).
inline double max_relative_overlap(const std::vector<Vec3>& c, const std::vector<double>& r) {
    double worst = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i)
        for (std::size_t j = i + 1; j < c.size(); ++j) {
            const double o = r[i] + r[j] - norm(c[i] - c[j]);
            if (o > 0.0) worst = std::max(worst, o / std::min(r[i], r[j]));
        }
    return worst;
}

/// Multiply coordinates and window bounds per axis.
inline PointPattern stretch_points(const PointPattern& pattern, const Vec3& scale) {
    if (!(scale.x > 0.0 && scale.y > 0.0 && scale.z > 0.0))
        throw std::invalid_argument("stretch factors must be > 0 on every axis");
    PointPattern out{{hadamard(pattern.window.lo, scale), hadamard(pattern.window.hi, scale)}, {}};
    out.points.reserve(pattern.size());
    for (const auto& p : pattern.points) out.points.push_back(hadamard(p, scale));
    return out;
}

/// CSV with a `# window` comment header followed by `x,y,z` rows.
inline std::string pattern_to_csv(const PointPattern& p) {
    std::ostringstream os;
    os.precision(17);
    os << "# window " << p.window.lo.x << ' ' << p.window.lo.y << ' ' << p.window.lo.z << ' ' << p.window.hi.x
       << ' ' << p.window.hi.y << ' ' << p.window.hi.z << "\n";
    os << "x,y,z\n";
    for (const auto& q : p.points) os << q.x << ',' << q.y << ',' << q.z << '\n';
    return os.str();
}

inline void write_pattern_csv(const PointPattern& p, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
    f << pattern_to_csv(p);
}

}  // namespace microforge
