#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <unistd.h>

#include "microforge/core/geometry.hpp"
#include "microforge/core/random.hpp"
#include "microforge/core/volume.hpp"
#include "microforge/point_process.hpp"
#include "microforge/tessellation.hpp"

namespace testing_support {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("microforge_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

private:
    std::filesystem::path path_;
};

inline microforge::Box unit_box(double e = 1.0) { return {{0, 0, 0}, {e, e, e}}; }

/// Poisson germs conditioned on an exact count n (uniform in the window).
inline microforge::PointPattern uniform_points(std::size_t n, const microforge::Box& w, microforge::RandomStream rng) {
    microforge::PointPattern p{w, {}};
    const auto e = w.extent();
    for (std::size_t i = 0; i < n; ++i)
        p.points.push_back(w.lo + microforge::Vec3{rng.uniform() * e.x, rng.uniform() * e.y, rng.uniform() * e.z});
    return p;
}

/// Mask of an axis-aligned slab z in [z0, z0 + t).
inline microforge::LabelMask slab(const microforge::Dims& d, std::int64_t z0, std::int64_t t) {
    microforge::LabelMask m(d);
    for (std::int64_t z = z0; z < z0 + t; ++z)
        for (std::int64_t y = 0; y < d.ny; ++y)
            for (std::int64_t x = 0; x < d.nx; ++x) m(x, y, z) = 1;
    return m;
}

/// Minimum cut weight by enumerating every assignment of the free cells to
/// the low or the high side. Cells touching the low (high) face are fixed
/// to the low (high) side; +inf when a cell touches both.
inline double exhaustive_min_cut(const microforge::Tessellation& t, microforge::Axis axis) {
    const std::size_t n = t.num_cells();
    std::vector<int> fixed(n, -1), free_cells;
    for (std::size_t i = 0; i < n; ++i) {
        const bool lo = t.cells[i].touches(axis, false), hi = t.cells[i].touches(axis, true);
        if (lo && hi) return std::numeric_limits<double>::infinity();
        fixed[i] = lo ? 0 : (hi ? 1 : -1);
        if (fixed[i] < 0) free_cells.push_back(static_cast<int>(i));
    }
    if (free_cells.size() > 20) throw std::invalid_argument("too many free cells for exhaustive search");
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> side(n);
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << free_cells.size()); ++mask) {
        for (std::size_t i = 0; i < n; ++i) side[i] = fixed[i];
        for (std::size_t k = 0; k < free_cells.size(); ++k) side[free_cells[k]] = (mask >> k) & 1;
        double w = 0.0;
        for (const auto& f : t.facets)
            if (side[f.cell_a] != side[f.cell_b]) w += f.area;
        best = std::min(best, w);
    }
    return best;
}

/// Sum of random Gaussian bumps (width `sigma` voxels) plus a linear ramp.
inline microforge::Volume<double> smooth_field(const microforge::Dims& d, double sigma, microforge::RandomStream rng,
                                               int bumps = 40) {
    microforge::Volume<double> f(d);
    std::vector<std::array<double, 5>> b(static_cast<std::size_t>(bumps));
    for (auto& q : b) q = {rng.uniform() * d.nx, rng.uniform() * d.ny, rng.uniform() * d.nz, rng.normal(), 0.0};
    for (std::int64_t z = 0; z < d.nz; ++z)
        for (std::int64_t y = 0; y < d.ny; ++y)
            for (std::int64_t x = 0; x < d.nx; ++x) {
                double v = 0.01 * x;
                for (const auto& q : b) {
                    const double dx = x + 0.5 - q[0], dy = y + 0.5 - q[1], dz = z + 0.5 - q[2];
                    v += q[3] * std::exp(-(dx * dx + dy * dy + dz * dz) / (2 * sigma * sigma));
                }
                f(x, y, z) = v;
            }
    return f;
}

struct Phantom {
    microforge::GrayVolume gray;
    microforge::LabelMask truth;
};

/// Dark plane of the given width through the volume centre in a bright
/// matrix (0.6 vs 0.2) with Gaussian noise. The plane normal lies in the
/// y-z plane at `tilt_deg` from z; a voxel belongs to the plane when its
/// centre is within width/2 of it.
inline Phantom plane_phantom(const microforge::Dims& d, double width, double noise, double tilt_deg,
                             microforge::RandomStream rng) {
    Phantom p{microforge::GrayVolume(d), microforge::LabelMask(d)};
    const double t = tilt_deg * std::acos(-1.0) / 180.0;
    const double ny = std::sin(t), nz = std::cos(t);
    const double cy = 0.5 * d.ny, cz = 0.5 * d.nz;
    for (std::int64_t z = 0; z < d.nz; ++z)
        for (std::int64_t y = 0; y < d.ny; ++y)
            for (std::int64_t x = 0; x < d.nx; ++x) {
                const double s = (y + 0.5 - cy) * ny + (z + 0.5 - cz) * nz;
                const bool in = std::fabs(s) <= 0.5 * width;
                p.truth(x, y, z) = in ? 1 : 0;
                p.gray(x, y, z) = static_cast<float>((in ? 0.2 : 0.6) + noise * rng.normal());
            }
    return p;
}

}  // namespace testing_support
