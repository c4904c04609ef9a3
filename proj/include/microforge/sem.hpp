#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "microforge/core/parallel.hpp"
#include "microforge/core/png.hpp"
#include "microforge/core/random.hpp"
#include "microforge/core/volume.hpp"

namespace microforge {

/// Parameters of the FIB-SEM proxy. Intensities are in [0, 1]; depths in voxels.
struct SemConfig {
    int slice_thickness_vox = 1;
    double attenuation_depth_vox = 10.0;
    double solid_intensity = 0.8;
    double background_intensity = 0.1;
    double noise_sigma = 0.03;
    double poisson_scale = 0.0;  // > 0: value := Poisson(value * scale) / scale before the Gaussian noise
    double edge_gain = 0.2;

    void validate() const {
        if (slice_thickness_vox < 1) throw std::invalid_argument("slice thickness must be >= 1 voxel");
        if (!(attenuation_depth_vox > 0.0)) throw std::invalid_argument("attenuation depth must be > 0");
        if (!(solid_intensity >= 0.0 && solid_intensity <= 1.0 && background_intensity >= 0.0 &&
              background_intensity <= 1.0))
            throw std::invalid_argument("SEM intensities must lie in [0, 1]");
        if (!(solid_intensity > background_intensity))
            throw std::invalid_argument("solid intensity must exceed background intensity");
        if (!(noise_sigma >= 0.0) || !(poisson_scale >= 0.0) || !(edge_gain >= 0.0))
            throw std::invalid_argument("noise and edge gain must be >= 0");
    }
};

/// Slices are stored as the z layers of 3D containers: images(x, y, k) is
/// pixel (x, y) of the slice at plane z = k * slice_thickness.
struct SemStack {
    GrayVolume images;
    LabelMask masks;
    std::vector<std::int64_t> planes;
};

/// Pre-noise intensity of a pore pixel whose first solid voxel lies `depth`
/// voxels below the imaged plane (infinite when there is none).
inline double shine_through(double depth, const SemConfig& cfg) {
    if (!std::isfinite(depth)) return cfg.background_intensity;
    return cfg.background_intensity +
           (cfg.solid_intensity - cfg.background_intensity) * std::exp(-depth / cfg.attenuation_depth_vox);
}

namespace detail {

/// Central-difference gradient magnitude of the 0/1 mask, indices clamped.
inline double mask_gradient(const LabelMask& m, std::int64_t x, std::int64_t y, std::int64_t z) {
    const Dims d = m.dims();
    auto at = [&](std::int64_t i, std::int64_t j, std::int64_t k) {
        return static_cast<double>(m(std::clamp<std::int64_t>(i, 0, d.nx - 1), std::clamp<std::int64_t>(j, 0, d.ny - 1),
                                     std::clamp<std::int64_t>(k, 0, d.nz - 1)) != 0);
    };
    const double gx = 0.5 * (at(x + 1, y, z) - at(x - 1, y, z));
    const double gy = 0.5 * (at(x, y + 1, z) - at(x, y - 1, z));
    const double gz = 0.5 * (at(x, y, z + 1) - at(x, y, z - 1));
    return std::sqrt(gx * gx + gy * gy + gz * gz);
}

}  // namespace detail

/// Noise-free slice image at plane z0.
inline std::vector<double> sem_clean_slice(const LabelMask& solid, std::int64_t z0, const SemConfig& cfg) {
    const Dims d = solid.dims();
    std::vector<double> img(static_cast<std::size_t>(d.nx * d.ny));
    const double max_grad = std::sqrt(3.0) / 2.0;
    for (std::int64_t y = 0; y < d.ny; ++y)
        for (std::int64_t x = 0; x < d.nx; ++x) {
            double v;
            if (solid(x, y, z0)) {
                v = cfg.solid_intensity + cfg.edge_gain * detail::mask_gradient(solid, x, y, z0) / max_grad;
            } else {
                double depth = std::numeric_limits<double>::infinity();
                for (std::int64_t z = z0 - 1; z >= 0; --z)
                    if (solid(x, y, z)) {
                        depth = static_cast<double>(z0 - z);
                        break;
                    }
                v = shine_through(depth, cfg);
            }
            img[static_cast<std::size_t>(x + d.nx * y)] = v;
        }
    return img;
}

/// One image per plane z0 = k * slice_thickness. Solid pixels are bright
/// with gradient-driven edge brightening; pore pixels show the solid lying
/// below the plane attenuated with depth. Noise for slice k comes from
/// substream k; values are clamped to [0, 1].
inline SemStack simulate_sem_stack(const LabelMask& solid, const SemConfig& cfg, const RandomStream& rng) {
    cfg.validate();
    const Dims d = solid.dims();
    if (!d.valid() || d.nz < cfg.slice_thickness_vox)
        throw std::invalid_argument("solid volume is thinner than one slice");
    const std::int64_t n = (d.nz + cfg.slice_thickness_vox - 1) / cfg.slice_thickness_vox;
    SemStack out{GrayVolume({d.nx, d.ny, n}, solid.spacing()), LabelMask({d.nx, d.ny, n}, solid.spacing()), {}};
    for (std::int64_t k = 0; k < n; ++k) out.planes.push_back(k * cfg.slice_thickness_vox);
    parallel_for(0, n, [&](std::int64_t k) {
        const std::int64_t z0 = out.planes[static_cast<std::size_t>(k)];
        const auto img = sem_clean_slice(solid, z0, cfg);
        RandomStream r = rng.substream(static_cast<std::uint64_t>(k));
        for (std::int64_t y = 0; y < d.ny; ++y)
            for (std::int64_t x = 0; x < d.nx; ++x) {
                double v = img[static_cast<std::size_t>(x + d.nx * y)];
                if (cfg.poisson_scale > 0.0)
                    v = static_cast<double>(r.poisson(std::max(0.0, v) * cfg.poisson_scale)) / cfg.poisson_scale;
                if (cfg.noise_sigma > 0.0) v += cfg.noise_sigma * r.normal();
                out.images(x, y, k) = static_cast<float>(std::clamp(v, 0.0, 1.0));
                out.masks(x, y, k) = solid(x, y, z0) ? 1 : 0;
            }
    });
    return out;
}

/// Map gray values so their empirical distribution follows the reference
/// image: each value goes to the reference quantile at its mid-rank.
inline GrayVolume match_histogram(const GrayVolume& stack, const PngImage& reference) {
    if (reference.samples.empty() || reference.channels != 1)
        throw std::invalid_argument("histogram reference must be a non-empty grayscale image");
    const double maxv = reference.bit_depth == 16 ? 65535.0 : 255.0;
    std::vector<double> ref(reference.samples.size());
    for (std::size_t i = 0; i < ref.size(); ++i) ref[i] = reference.samples[i] / maxv;
    std::sort(ref.begin(), ref.end());
    std::vector<float> sorted(stack.storage());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    GrayVolume out = stack;
    for (auto& v : out.storage()) {
        const auto lo = std::lower_bound(sorted.begin(), sorted.end(), v);
        const auto hi = std::upper_bound(lo, sorted.end(), v);
        const double rank = (static_cast<double>(lo - sorted.begin()) + 0.5 * static_cast<double>(hi - lo)) / n;
        const auto idx = static_cast<std::size_t>(std::lround(rank * static_cast<double>(ref.size() - 1)));
        v = static_cast<float>(ref[std::min(idx, ref.size() - 1)]);
    }
    return out;
}

}  // namespace microforge
