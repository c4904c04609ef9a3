#pragma once

#include <cmath>
#include <cstdint>
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
#include "microforge/core/parallel.hpp"
#include "microforge/core/random.hpp"
#include "microforge/core/volume.hpp"
#include "microforge/point_process.hpp"

namespace microforge {

enum class GrainShape { sphere, cylinder, cube };

inline const char* shape_name(GrainShape s) {
    switch (s) {
        case GrainShape::sphere: return "sphere";
        case GrainShape::cylinder: return "cylinder";
        case GrainShape::cube: return "cube";
    }
    return "?";
}

inline GrainShape parse_shape(const std::string& s) {
    if (s == "sphere") return GrainShape::sphere;
    if (s == "cylinder") return GrainShape::cylinder;
    if (s == "cube") return GrainShape::cube;
    throw std::invalid_argument("unknown grain shape '" + s + "'");
}

/// Grain marks of a Boolean model. Sphere and cylinder use `radius`; the
/// cylinder also uses `height`, the cube `edge`. Non-isotropic grains keep
/// `fixed_rotation` (the cylinder axis is the rotated z axis).
struct GrainSpec {
    GrainShape shape = GrainShape::sphere;
    SizeDistribution radius = SizeDistribution::constant(1.0);
    SizeDistribution height = SizeDistribution::constant(1.0);
    SizeDistribution edge = SizeDistribution::constant(1.0);
    bool isotropic = true;
    Mat3 fixed_rotation = Mat3::identity();

    void validate() const {
        switch (shape) {
            case GrainShape::sphere: radius.validate("sphere radius"); break;
            case GrainShape::cylinder:
                radius.validate("cylinder radius");
                height.validate("cylinder height");
                break;
            case GrainShape::cube: edge.validate("cube edge"); break;
        }
    }

    /// Largest possible distance from a grain centre to its surface.
    double max_circumradius() const {
        switch (shape) {
            case GrainShape::sphere: return radius.max_value();
            case GrainShape::cylinder: return std::hypot(radius.max_value(), 0.5 * height.max_value());
            case GrainShape::cube: return 0.5 * std::sqrt(3.0) * edge.max_value();
        }
        return 0.0;
    }

    double expected_volume() const {
        switch (shape) {
            case GrainShape::sphere: return 4.0 / 3.0 * std::numbers::pi * radius.moment(3);
            case GrainShape::cylinder: return std::numbers::pi * radius.moment(2) * height.moment(1);
            case GrainShape::cube: return edge.moment(3);
        }
        return 0.0;
    }
};

struct Grain {
    GrainShape shape = GrainShape::sphere;
    Vec3 center;
    double radius = 0.0;
    double height = 0.0;
    double edge = 0.0;
    Mat3 rotation;  // body to world

    double circumradius() const {
        switch (shape) {
            case GrainShape::sphere: return radius;
            case GrainShape::cylinder: return std::hypot(radius, 0.5 * height);
            case GrainShape::cube: return 0.5 * std::sqrt(3.0) * edge;
        }
        return 0.0;
    }

    bool contains(const Vec3& p) const {
        const Vec3 d = p - center;
        if (shape == GrainShape::sphere) return norm2(d) <= radius * radius;
        const Vec3 b = rotation.transposed() * d;
        if (shape == GrainShape::cylinder) return b.x * b.x + b.y * b.y <= radius * radius && std::fabs(b.z) <= 0.5 * height;
        const double h = 0.5 * edge;
        return std::fabs(b.x) <= h && std::fabs(b.y) <= h && std::fabs(b.z) <= h;
    }
};

/// Grains whose centres lie in the observation window dilated by the
/// largest circumradius.
struct GrainList {
    Box window;
    std::vector<Grain> grains;

    std::size_t size() const { return grains.size(); }
    bool empty() const { return grains.empty(); }
};

namespace detail {

/// Uniformly distributed rotation (random unit quaternion).
inline Mat3 uniform_rotation(RandomStream& rng) {
    const double u1 = rng.uniform(), u2 = rng.uniform(), u3 = rng.uniform();
    const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
    const double t2 = 2.0 * std::numbers::pi * u2, t3 = 2.0 * std::numbers::pi * u3;
    return Mat3::from_quaternion(b * std::cos(t3), a * std::sin(t2), a * std::cos(t2), b * std::sin(t3));
}

inline Grain draw_grain(const GrainSpec& spec, const Vec3& c, RandomStream& rng) {
    Grain g;
    g.shape = spec.shape;
    g.center = c;
    switch (spec.shape) {
        case GrainShape::sphere: g.radius = spec.radius.sample(rng); break;
        case GrainShape::cylinder:
            g.radius = spec.radius.sample(rng);
            g.height = spec.height.sample(rng);
            break;
        case GrainShape::cube: g.edge = spec.edge.sample(rng); break;
    }
    g.rotation = spec.isotropic && spec.shape != GrainShape::sphere ? uniform_rotation(rng) : spec.fixed_rotation;
    return g;
}

}  // namespace detail

/// Boolean model: Poisson germs with intensity `intensity` (per unit volume)
/// plus-sampled in the dilated window, i.i.d. marks from `spec`. Germ i
/// draws its marks from mark stream i.
inline GrainList sample_boolean(const GrainSpec& spec, double intensity, const Box& window, const RandomStream& rng) {
    spec.validate();
    detail::require_window(window);
    GrainList out{window, {}};
    const PointPattern germs = sample_poisson(intensity, window.dilated(spec.max_circumradius()), rng.substream(0));
    const RandomStream marks = rng.substream(1);
    out.grains.reserve(germs.size());
    for (std::size_t i = 0; i < germs.size(); ++i) {
        RandomStream r = marks.substream(i);
        out.grains.push_back(detail::draw_grain(spec, germs.points[i], r));
    }
    return out;
}

/// Spheres centred on a Matérn cluster process, plus-sampled in the window
/// dilated by the maximal radius.
inline GrainList sample_cox_boolean_spheres(const MaternParams& cluster, const SizeDistribution& radius, const Box& window,
                                            const RandomStream& rng) {
    cluster.validate();
    radius.validate("sphere radius");
    detail::require_window(window);
    GrainSpec spec;
    spec.radius = radius;
    GrainList out{window, {}};
    const PointPattern centres = sample_matern_cluster(cluster, window.dilated(radius.max_value()), rng.substream(0));
    const RandomStream marks = rng.substream(1);
    for (std::size_t i = 0; i < centres.size(); ++i) {
        RandomStream r = marks.substream(i);
        out.grains.push_back(detail::draw_grain(spec, centres.points[i], r));
    }
    return out;
}

/// Solid mask over the grain window: a voxel is solid when its centre lies
/// in at least one grain. dims times spacing must equal the window extent.
inline LabelMask voxelize_grains(const GrainList& grains, const Dims& dims, const Spacing& spacing) {
    if (!dims.valid()) throw std::invalid_argument("voxelization dims must be positive");
    const Vec3 ext = grains.window.extent();
    for (int a = 0; a < 3; ++a)
        if (!(spacing[a] > 0.0) || std::fabs(dims[a] * spacing[a] - ext[a]) > 1e-6 * std::max(1.0, ext[a]))
            throw std::invalid_argument("dims " + dims.str() + " and spacing do not tile the grain window");
    LabelMask m(dims, spacing);
    const Vec3 o = grains.window.lo;
    struct Range {
        std::int64_t lo[3], hi[3];
    };
    std::vector<Range> ranges(grains.size());
    for (std::size_t g = 0; g < grains.size(); ++g) {
        const double r = grains.grains[g].circumradius();
        for (int a = 0; a < 3; ++a) {
            const double c = (grains.grains[g].center[a] - o[a]) / spacing[a];
            ranges[g].lo[a] = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(c - r / spacing[a] - 0.5)));
            ranges[g].hi[a] = std::min<std::int64_t>(dims[a] - 1, static_cast<std::int64_t>(std::floor(c + r / spacing[a] - 0.5)));
        }
    }
    parallel_for(0, dims.nz, [&](std::int64_t z) {
        const double wz = o.z + (z + 0.5) * spacing[2];
        for (std::size_t g = 0; g < grains.size(); ++g) {
            const Range& rg = ranges[g];
            if (z < rg.lo[2] || z > rg.hi[2]) continue;
            const Grain& grain = grains.grains[g];
            for (std::int64_t y = rg.lo[1]; y <= rg.hi[1]; ++y) {
                const double wy = o.y + (y + 0.5) * spacing[1];
                for (std::int64_t x = rg.lo[0]; x <= rg.hi[0]; ++x) {
                    const std::size_t i = m.index(x, y, z);
                    if (!m[i] && grain.contains({o.x + (x + 0.5) * spacing[0], wy, wz})) m[i] = 1;
                }
            }
        }
    });
    return m;
}

/// Coverage fraction 1 - exp(-intensity * E[grain volume]).
inline double boolean_coverage(const GrainSpec& spec, double intensity) {
    return 1.0 - std::exp(-intensity * spec.expected_volume());
}

/// Intensity giving the requested coverage fraction.
inline double intensity_for_coverage(const GrainSpec& spec, double fraction) {
    if (!(fraction >= 0.0 && fraction < 1.0)) throw std::invalid_argument("coverage fraction must lie in [0, 1)");
    return -std::log(1.0 - fraction) / spec.expected_volume();
}

inline std::string grains_to_csv(const GrainList& g) {
    std::ostringstream s;
    s.precision(17);
    s << "shape,x,y,z,radius,height,edge,r00,r01,r02,r10,r11,r12,r20,r21,r22\n";
    for (const auto& grain : g.grains) {
        s << shape_name(grain.shape) << ',' << grain.center.x << ',' << grain.center.y << ',' << grain.center.z << ','
          << grain.radius << ',' << grain.height << ',' << grain.edge;
        for (double v : grain.rotation.m) s << ',' << v;
        s << '\n';
    }
    return s.str();
}

inline void write_grains_csv(const GrainList& g, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path.string());
    f << grains_to_csv(g);
    if (!f) throw IoError("failed writing " + path.string());
}

}  // namespace microforge
