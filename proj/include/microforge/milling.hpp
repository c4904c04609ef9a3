#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "microforge/core/fft.hpp"
#include "microforge/core/geometry.hpp"
#include "microforge/core/parallel.hpp"
#include "microforge/core/png.hpp"
#include "microforge/core/random.hpp"
#include "microforge/core/volume.hpp"

namespace microforge {

enum class MillingPath { parallel, spiral };

inline MillingPath parse_milling_path(const std::string& s) {
    if (s == "parallel") return MillingPath::parallel;
    if (s == "spiral") return MillingPath::spiral;
    throw std::invalid_argument("unknown milling path '" + s + "'");
}

/// Face-milling parameters. None of the defaults is calibrated against a
/// real machining process.
struct MillingConfig {
    double head_diameter_mm = 16.0;
    double tilt_deg = 0.05;
    double blade_width_um = 40.0;
    double feed_rate_mm_per_min = 300.0;
    double spindle_speed_rpm = 6000.0;
    double lateral_cutting_depth_mm = 1.0;
    MillingPath path = MillingPath::parallel;
    double surface_w_mm = 10.24;
    double surface_h_mm = 10.24;
    double grid_resolution_um = 10.0;
    double depth_scale_um = 4.0;
    double depth_jitter_sigma = 0.1;  // sigma of log depth
    double radius_jitter_um = 2.0;    // stddev of the ring radius
    double max_cut_depth_um = 50.0;

    void validate() const {
        const double positive[] = {head_diameter_mm,     blade_width_um, feed_rate_mm_per_min, spindle_speed_rpm,
                                   lateral_cutting_depth_mm, surface_w_mm, surface_h_mm,       grid_resolution_um,
                                   depth_scale_um,       max_cut_depth_um};
        for (double v : positive)
            if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("milling quantities must be finite and > 0");
        if (!(tilt_deg >= 0.0 && tilt_deg < 90.0)) throw std::invalid_argument("tilt must lie in [0, 90) degrees");
        if (!(depth_jitter_sigma >= 0.0) || !(radius_jitter_um >= 0.0))
            throw std::invalid_argument("jitter must be >= 0");
        if (grid_resolution_um > 0.5 * blade_width_um)
            throw std::invalid_argument("grid resolution must be at most half the blade width");
    }

    /// Feed per revolution in µm.
    double feed_per_rev_um() const { return 1000.0 * feed_rate_mm_per_min / spindle_speed_rpm; }
    std::int64_t nx() const { return std::max<std::int64_t>(1, std::llround(1000.0 * surface_w_mm / grid_resolution_um)); }
    std::int64_t ny() const { return std::max<std::int64_t>(1, std::llround(1000.0 * surface_h_mm / grid_resolution_um)); }
};

/// Head centre where one ring is dropped, with the unit feed direction (µm).
struct PathPoint {
    double x = 0.0;
    double y = 0.0;
    double dx = 1.0;
    double dy = 0.0;
};

struct ToolPath {
    std::vector<PathPoint> points;
    std::size_t rows = 0;  // parallel rows or spiral turns (rounded up)
    std::vector<std::string> warnings;
};

/// Parallel: boustrophedon rows at y = (k + 1/2) a_e, each running from
/// x = -R to x = w + R. Spiral: inward Archimedean spiral about the surface
/// centre starting at the half-diagonal, radial pitch a_e. Successive points
/// are one feed per revolution apart along the path.
inline ToolPath generate_tool_path(const MillingConfig& cfg) {
    cfg.validate();
    ToolPath tp;
    const double step = cfg.feed_per_rev_um();
    const double ae = 1000.0 * cfg.lateral_cutting_depth_mm;
    const double radius = 500.0 * cfg.head_diameter_mm;
    const double w = 1000.0 * cfg.surface_w_mm, h = 1000.0 * cfg.surface_h_mm;
    if (cfg.lateral_cutting_depth_mm > cfg.head_diameter_mm)
        tp.warnings.push_back("lateral cutting depth exceeds the head diameter; stripes stay uncut");
    if (cfg.path == MillingPath::parallel) {
        tp.rows = static_cast<std::size_t>(std::ceil(h / ae - 1e-9));
        const auto n = static_cast<std::int64_t>(std::floor((w + 2.0 * radius) / step + 1e-9));
        for (std::size_t k = 0; k < tp.rows; ++k) {
            const double y = (static_cast<double>(k) + 0.5) * ae;
            const bool forward = k % 2 == 0;
            for (std::int64_t i = 0; i <= n; ++i) {
                const double s = static_cast<double>(i) * step;
                tp.points.push_back(forward ? PathPoint{-radius + s, y, 1.0, 0.0} : PathPoint{w + radius - s, y, -1.0, 0.0});
            }
        }
        return tp;
    }
    const double cx = 0.5 * w, cy = 0.5 * h;
    const double r0 = 0.5 * std::hypot(w, h) + radius;  // enter from outside, as the parallel rows do
    const double b = ae / (2.0 * std::numbers::pi);  // r(phi) = r0 - b phi
    tp.rows = static_cast<std::size_t>(std::ceil(r0 / ae - 1e-9));
    double phi = 0.0;
    for (;;) {
        const double r = r0 - b * phi;
        if (r <= 0.0) break;
        // Position r (cos phi, sin phi); velocity d/dphi = (-b cos - r sin, -b sin + r cos).
        const double vx = -b * std::cos(phi) - r * std::sin(phi);
        const double vy = -b * std::sin(phi) + r * std::cos(phi);
        const double speed = std::hypot(vx, vy);
        tp.points.push_back({cx + r * std::cos(phi), cy + r * std::sin(phi), vx / speed, vy / speed});
        // Advance by arc length `step` with a midpoint estimate of |dP/dphi|.
        const double dphi0 = step / speed;
        const double rm = r0 - b * (phi + 0.5 * dphi0);
        phi += step / std::sqrt(rm * rm + b * b);
    }
    return tp;
}

/// Elevation map in µm: 0 is the uncut reference plane, negative values are
/// removed material. Cell (i, j) is centred at ((i + 1/2) s, (j + 1/2) s).
struct HeightMap {
    std::int64_t nx = 0;
    std::int64_t ny = 0;
    double spacing_um = 1.0;
    std::vector<double> heights;

    HeightMap() = default;
    HeightMap(std::int64_t nx_, std::int64_t ny_, double spacing)
        : nx(nx_), ny(ny_), spacing_um(spacing), heights(static_cast<std::size_t>(nx_ * ny_), 0.0) {
        if (nx_ <= 0 || ny_ <= 0 || !(spacing > 0.0)) throw std::invalid_argument("height map needs positive dims and spacing");
    }
    double& at(std::int64_t x, std::int64_t y) { return heights[static_cast<std::size_t>(x + nx * y)]; }
    double at(std::int64_t x, std::int64_t y) const { return heights[static_cast<std::size_t>(x + nx * y)]; }

    Volume<float> to_volume() const {
        Volume<float> v({nx, ny, 1}, {spacing_um, spacing_um, spacing_um});
        for (std::size_t i = 0; i < heights.size(); ++i) v[i] = static_cast<float>(heights[i]);
        return v;
    }
};

/// One ring imprint: head centre, radius, base groove depth and feed direction.
struct Ring {
    PathPoint at;
    double radius_um = 0.0;
    double depth_um = 0.0;
};

/// Ring k draws its jitter from substream k.
inline Ring make_ring(const PathPoint& p, std::size_t k, const MillingConfig& cfg, const RandomStream& rng) {
    RandomStream r = rng.substream(k);
    Ring ring{p, 500.0 * cfg.head_diameter_mm, cfg.depth_scale_um};
    const double zd = r.normal(), zr = r.normal();
    ring.depth_um *= std::exp(cfg.depth_jitter_sigma * zd);
    ring.radius_um = std::max(0.5 * cfg.blade_width_um, ring.radius_um + cfg.radius_jitter_um * zr);
    return ring;
}

/// Groove depth at azimuth cos(theta) relative to the feed direction.
inline double tilted_depth(double depth, double cos_theta, const MillingConfig& cfg) {
    const double tilt = std::tan(cfg.tilt_deg * std::numbers::pi / 180.0);
    return std::max(0.0, depth * (1.0 + tilt * cos_theta * 500.0 * cfg.head_diameter_mm / cfg.depth_scale_um));
}

/// Circular-arc groove of chord `chord` and sagitta `depth`, evaluated at
/// offset u from the groove centre line; 0 outside the chord.
inline double groove_profile(double u, double chord, double depth) {
    const double half = 0.5 * chord;
    if (std::fabs(u) > half || depth <= 0.0) return 0.0;
    const double rho = (half * half + depth * depth) / (2.0 * depth);
    return -(depth - (rho - std::sqrt(std::max(0.0, rho * rho - u * u))));
}

/// Cut one ring into the map (pointwise min) over rows [y0, y1).
inline void imprint_ring_rows(HeightMap& hm, const Ring& ring, const MillingConfig& cfg, std::int64_t y0, std::int64_t y1) {
    const double s = hm.spacing_um;
    const double half = 0.5 * cfg.blade_width_um;
    const double ri = std::max(0.0, ring.radius_um - half), ro = ring.radius_um + half;
    const double floor_h = -cfg.max_cut_depth_um;
    const auto ylo = std::max<std::int64_t>(y0, static_cast<std::int64_t>(std::ceil((ring.at.y - ro) / s - 0.5)));
    const auto yhi = std::min<std::int64_t>(y1 - 1, static_cast<std::int64_t>(std::floor((ring.at.y + ro) / s - 0.5)));
    for (std::int64_t y = ylo; y <= yhi; ++y) {
        const double py = (y + 0.5) * s - ring.at.y;
        const double xo2 = ro * ro - py * py;
        if (xo2 < 0.0) continue;
        const double xo = std::sqrt(xo2);
        const double xi = ri * ri - py * py > 0.0 ? std::sqrt(ri * ri - py * py) : 0.0;
        // The annulus meets this row in [-xo, -xi] and [xi, xo] around the centre.
        const double spans[2][2] = {{-xo, -xi}, {xi, xo}};
        for (int side = 0; side < (xi > 0.0 ? 2 : 1); ++side) {
            const double a = xi > 0.0 ? spans[side][0] : -xo, b = xi > 0.0 ? spans[side][1] : xo;
            const auto x0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil((ring.at.x + a) / s - 0.5)));
            const auto x1 = std::min<std::int64_t>(hm.nx - 1, static_cast<std::int64_t>(std::floor((ring.at.x + b) / s - 0.5)));
            for (std::int64_t x = x0; x <= x1; ++x) {
                const double px = (x + 0.5) * s - ring.at.x;
                const double r = std::hypot(px, py);
                const double u = r - ring.radius_um;
                if (std::fabs(u) > half) continue;
                const double cos_theta = r > 0.0 ? (px * ring.at.dx + py * ring.at.dy) / r : 0.0;
                const double d = tilted_depth(ring.depth_um, cos_theta, cfg);
                if (d <= 0.0) continue;
                double& h = hm.at(x, y);
                h = std::min(h, std::max(floor_h, groove_profile(u, cfg.blade_width_um, d)));
            }
        }
    }
}

/// Imprint one ring per path point. Ring k takes its depth and radius
/// jitter from substream k, and rings combine by pointwise min, so the
/// result does not depend on imprint order or thread count.
inline HeightMap imprint_rings(const ToolPath& path, const MillingConfig& cfg, const RandomStream& rng) {
    cfg.validate();
    HeightMap hm(cfg.nx(), cfg.ny(), cfg.grid_resolution_um);
    std::vector<Ring> rings;
    rings.reserve(path.points.size());
    for (std::size_t k = 0; k < path.points.size(); ++k) rings.push_back(make_ring(path.points[k], k, cfg, rng));
    constexpr std::int64_t band = 16;
    const std::int64_t nbands = (hm.ny + band - 1) / band;
    parallel_for(0, nbands, [&](std::int64_t b) {
        const std::int64_t y0 = b * band, y1 = std::min(hm.ny, y0 + band);
        for (const auto& ring : rings) imprint_ring_rows(hm, ring, cfg, y0, y1);
    });
    return hm;
}

struct ShadeParams {
    double gain = 1.0;
    double gamma = 1.0;
};

/// Lambertian shading max(0, n . l) of the height-field normals (central
/// differences, one-sided at the border), then exposure gain and gamma.
inline Volume<float> shade_preview(const HeightMap& hm, const Vec3& light, const ShadeParams& view = {}) {
    const double len = norm(light);
    if (!(std::fabs(len - 1.0) < 1e-6)) throw std::invalid_argument("light direction must be a unit vector");
    if (!(view.gain > 0.0) || !(view.gamma > 0.0)) throw std::invalid_argument("preview gain and gamma must be > 0");
    Volume<float> img({hm.nx, hm.ny, 1}, {hm.spacing_um, hm.spacing_um, hm.spacing_um});
    auto slope = [&](std::int64_t i, std::int64_t n, auto&& h) {
        if (n == 1) return 0.0;
        const std::int64_t a = std::max<std::int64_t>(0, i - 1), b = std::min(n - 1, i + 1);
        return (h(b) - h(a)) / (static_cast<double>(b - a) * hm.spacing_um);
    };
    parallel_for(0, hm.ny, [&](std::int64_t y) {
        for (std::int64_t x = 0; x < hm.nx; ++x) {
            const double gx = slope(x, hm.nx, [&](std::int64_t i) { return hm.at(i, y); });
            const double gy = slope(y, hm.ny, [&](std::int64_t j) { return hm.at(x, j); });
            const Vec3 n = normalized(Vec3{-gx, -gy, 1.0});
            const double lambert = std::max(0.0, dot(n, light));
            img(x, y, 0) = static_cast<float>(std::pow(std::clamp(view.gain * lambert, 0.0, 1.0), 1.0 / view.gamma));
        }
    });
    return img;
}

/// Five-stop colormap blue, cyan, green, yellow, red over t in [0, 1].
inline std::array<std::uint8_t, 3> height_colormap(double t) {
    static constexpr double stops[5][3] = {{0, 0, 255}, {0, 255, 255}, {0, 255, 0}, {255, 255, 0}, {255, 0, 0}};
    t = std::clamp(t, 0.0, 1.0) * 4.0;
    const int k = std::min(3, static_cast<int>(t));
    const double f = t - k;
    std::array<std::uint8_t, 3> c{};
    for (int i = 0; i < 3; ++i) c[i] = static_cast<std::uint8_t>(std::lround(stops[k][i] + f * (stops[k + 1][i] - stops[k][i])));
    return c;
}

/// Color-coded height map: deepest cell blue, highest red.
inline PngImage colorize_heights(const HeightMap& hm) {
    const auto [mn, mx] = std::minmax_element(hm.heights.begin(), hm.heights.end());
    const double lo = *mn, span = *mx - *mn;
    PngImage img;
    img.width = static_cast<std::uint32_t>(hm.nx);
    img.height = static_cast<std::uint32_t>(hm.ny);
    img.channels = 3;
    img.bit_depth = 8;
    img.samples.reserve(hm.heights.size() * 3);
    for (double h : hm.heights) {
        const auto c = height_colormap(span > 0.0 ? (h - lo) / span : 0.5);
        img.samples.insert(img.samples.end(), c.begin(), c.end());
    }
    return img;
}

/// Normalised periodic autocorrelation of the mean-free map, origin at (0, 0).
inline std::vector<double> autocorrelation(const HeightMap& hm) {
    RealFft3 fft(Dims{hm.nx, hm.ny, 1});
    double mean = 0.0;
    for (double h : hm.heights) mean += h;
    mean /= static_cast<double>(hm.heights.size());
    for (std::size_t i = 0; i < hm.heights.size(); ++i) fft.real()[i] = hm.heights[i] - mean;
    fft.forward();
    auto* s = fft.spectrum();
    for (std::size_t i = 0; i < fft.spectrum_size(); ++i) s[i] = std::norm(s[i]);
    fft.inverse();
    std::vector<double> ac(hm.heights.size());
    const double c0 = fft.real()[0];
    for (std::size_t i = 0; i < ac.size(); ++i) ac[i] = c0 > 0.0 ? fft.real()[i] / c0 : (i == 0 ? 1.0 : 0.0);
    return ac;
}

/// Elongation of the central autocorrelation lobe: sqrt of the ratio of the
/// principal second moments of the lag region connected to the origin where
/// the autocorrelation exceeds `level`. Each lag counts as a unit pixel.
inline double autocorrelation_eccentricity(const HeightMap& hm, double level = 0.5) {
    const auto ac = autocorrelation(hm);
    const std::int64_t nx = hm.nx, ny = hm.ny;
    auto wrap = [](std::int64_t v, std::int64_t n) { return ((v % n) + n) % n; };
    std::vector<char> seen(ac.size(), 0);
    std::vector<std::array<std::int64_t, 2>> stack{{0, 0}};
    seen[0] = 1;
    double sxx = 0.0, syy = 0.0, sxy = 0.0, count = 0.0;
    while (!stack.empty()) {
        const auto [lx, ly] = stack.back();
        stack.pop_back();
        sxx += lx * lx + 1.0 / 12.0;
        syy += ly * ly + 1.0 / 12.0;
        sxy += static_cast<double>(lx * ly);
        count += 1.0;
        const std::int64_t nb[4][2] = {{lx + 1, ly}, {lx - 1, ly}, {lx, ly + 1}, {lx, ly - 1}};
        for (const auto& q : nb) {
            if (std::abs(q[0]) > nx / 2 || std::abs(q[1]) > ny / 2) continue;
            const std::size_t i = static_cast<std::size_t>(wrap(q[0], nx) + nx * wrap(q[1], ny));
            if (seen[i] || ac[i] <= level) continue;
            seen[i] = 1;
            stack.push_back({q[0], q[1]});
        }
    }
    Eigen::Matrix2d m;
    m << sxx / count, sxy / count, sxy / count, syy / count;
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(m);
    return std::sqrt(es.eigenvalues()(1) / es.eigenvalues()(0));
}

}  // namespace microforge
