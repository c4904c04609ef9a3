#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <queue>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "microforge/core/parallel.hpp"
#include "microforge/core/volume.hpp"
#include "microforge/filter/gaussian.hpp"
#include "microforge/filter/riesz.hpp"

namespace microforge::filter {

/// Plate measure parameters. `contrast` is the second-derivative magnitude
/// (gray units, scale-normalised) at which the strength term saturates.
struct PlateMeasure {
    double alpha = 0.5;
    double beta = 2.0;
    double contrast = 0.05;

    void validate() const {
        if (!(alpha > 0.0) || !(beta > 0.0) || !(contrast > 0.0))
            throw std::invalid_argument("plate measure parameters must be > 0");
    }

    /// Eigenvalues sorted l1 >= l2 >= l3. Zero unless l1 > 0 (dark plate in a
    /// brighter matrix); otherwise a planarity term in (l1 / sum |li|), rescaled
    /// to reach 1 for an ideal plate, times a strength term in l1.
    double operator()(double l1, double l2, double l3) const {
        if (!(l1 > 1e-6 * contrast)) return 0.0;  // below float rounding of the filters
        const double sum = std::fabs(l1) + std::fabs(l2) + std::fabs(l3);
        const double r = l1 / sum;
        const double planarity = (1.0 - std::exp(-r * r / alpha)) / (1.0 - std::exp(-1.0 / alpha));
        const double strength = 1.0 - std::exp(-l1 * l1 / (beta * contrast * contrast));
        return std::clamp(planarity * strength, 0.0, 1.0);
    }
};

/// Symmetric 3x3 field stored as six components xx, yy, zz, xy, xz, yz.
struct TensorField {
    std::array<Volume<float>, 6> c;
};

/// Plate measure of the eigenvalues of a symmetric tensor field.
inline Volume<float> plate_measure(const TensorField& t, const PlateMeasure& pm) {
    pm.validate();
    const Dims d = t.c[0].dims();
    Volume<float> out(d, t.c[0].spacing());
    parallel_for(0, d.nz, [&](std::int64_t z) {
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es;
        for (std::int64_t y = 0; y < d.ny; ++y)
            for (std::int64_t x = 0; x < d.nx; ++x) {
                const std::size_t i = out.index(x, y, z);
                Eigen::Matrix3d m;
                m << t.c[0][i], t.c[3][i], t.c[4][i], t.c[3][i], t.c[1][i], t.c[5][i], t.c[4][i], t.c[5][i], t.c[2][i];
                if (m.isZero(0.0)) {
                    out[i] = 0.0f;
                    continue;
                }
                es.computeDirect(m, Eigen::EigenvaluesOnly);
                const auto& ev = es.eigenvalues();  // ascending
                out[i] = static_cast<float>(pm(ev(2), ev(1), ev(0)));
            }
    });
    return out;
}

/// Scale-normalised (sigma^2) Hessian by Gaussian derivative filters.
inline TensorField gaussian_hessian(const GrayVolume& v, double sigma) {
    const std::array<Kernel, 3> k{gaussian_kernel(sigma, 0), gaussian_kernel(sigma, 1), gaussian_kernel(sigma, 2)};
    const Dims d = v.dims();
    auto comp = [&](int ox, int oy, int oz) {
        const int order[3] = {ox, oy, oz};
        for (int a = 0; a < 3; ++a)
            if (d[a] == 1 && order[a] > 0) return Volume<float>(d, v.spacing());  // no variation along a singleton axis
        Volume<float> h = separable_filter(v, {k[ox], k[oy], k[oz]});
        const auto s2 = static_cast<float>(sigma * sigma);
        for (auto& x : h.storage()) x *= s2;
        return h;
    };
    return {{comp(2, 0, 0), comp(0, 2, 0), comp(0, 0, 2), comp(1, 1, 0), comp(1, 0, 1), comp(0, 1, 1)}};
}

/// Hessian plate measure in [0, 1]: high on thin dark sheets in a brighter matrix.
inline GrayVolume hessian_crackness(const GrayVolume& v, double sigma = 1.0, const PlateMeasure& pm = {}) {
    if (!(sigma >= 0.5)) throw std::invalid_argument("Hessian scale sigma must be >= 0.5");
    return plate_measure(gaussian_hessian(v, sigma), pm);
}

/// Plate measure on the second-order Riesz transforms of the Gaussian-smoothed volume.
inline GrayVolume riesz_crackness(const GrayVolume& v, double sigma = 1.0, const PlateMeasure& pm = {}) {
    if (!(sigma > 0.0)) throw std::invalid_argument("smoothing sigma must be > 0");
    Volume<double> s = convert<double>(gaussian_blur(v, sigma));
    const Dims d = v.dims();
    auto comp = [&](int j, int k) {
        if (d[j] == 1 || d[k] == 1) return Volume<float>(d, v.spacing());
        return convert<float>(riesz2(s, j, k));
    };
    TensorField t{{comp(0, 0), comp(1, 1), comp(2, 2), comp(0, 1), comp(0, 2), comp(1, 2)}};
    return plate_measure(t, pm);
}

struct PercolationParams {
    double smoothing_sigma_vox = 1.0;
    double planarity_threshold = 0.5;
    double grow_threshold = 0.2;
    std::size_t min_component_vox = 64;

    void validate() const {
        if (!(smoothing_sigma_vox > 0.0)) throw std::invalid_argument("smoothing sigma must be > 0");
        if (!(grow_threshold <= planarity_threshold)) throw std::invalid_argument("grow threshold must not exceed the seed threshold");
    }
};

/// Hysteresis region growing: 26-connected components of {measure >= grow}
/// that contain a seed voxel (measure >= planarity) and have at least
/// min_component_vox voxels.
inline LabelMask percolation_segment(const GrayVolume& crackness, const PercolationParams& p) {
    p.validate();
    const Dims d = crackness.dims();
    LabelMask out(d, crackness.spacing());
    std::vector<char> seen(crackness.size(), 0);
    std::vector<std::size_t> comp;
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < crackness.size(); ++start) {
        if (seen[start] || !(crackness[start] >= p.grow_threshold)) continue;
        comp.clear();
        stack.assign(1, start);
        seen[start] = 1;
        bool seeded = false;
        while (!stack.empty()) {
            const std::size_t i = stack.back();
            stack.pop_back();
            comp.push_back(i);
            if (crackness[i] >= p.planarity_threshold) seeded = true;
            const auto x = static_cast<std::int64_t>(i % d.nx);
            const auto y = static_cast<std::int64_t>((i / d.nx) % d.ny);
            const auto z = static_cast<std::int64_t>(i / (d.nx * d.ny));
            for (std::int64_t dz = -1; dz <= 1; ++dz)
                for (std::int64_t dy = -1; dy <= 1; ++dy)
                    for (std::int64_t dx = -1; dx <= 1; ++dx) {
                        if (!crackness.in_bounds(x + dx, y + dy, z + dz)) continue;
                        const std::size_t j = crackness.index(x + dx, y + dy, z + dz);
                        if (seen[j] || !(crackness[j] >= p.grow_threshold)) continue;
                        seen[j] = 1;
                        stack.push_back(j);
                    }
        }
        if (seeded && comp.size() >= p.min_component_vox)
            for (std::size_t i : comp) out[i] = 1;
    }
    return out;
}

using VolumeOp = std::function<GrayVolume(const GrayVolume&)>;

/// Apply `op` at dyadic scales 1, 1/2, ..., 1/2^(n-1) (2x block averaging),
/// upscale each response trilinearly and combine by pointwise max.
inline GrayVolume multiscale_apply(const GrayVolume& v, const VolumeOp& op, int n_scales) {
    if (n_scales < 1) throw std::invalid_argument("n_scales must be >= 1");
    const Dims d = v.dims();
    for (int a = 0; a < 3; ++a)
        if (d[a] > 1 && (d[a] >> (n_scales - 1)) < 4)
            throw std::invalid_argument("volume " + d.str() + " is too small for " + std::to_string(n_scales) + " scales");
    GrayVolume out = op(v);
    GrayVolume level = v;
    for (int s = 1; s < n_scales; ++s) {
        level = downscale2(level);
        const GrayVolume up = upscale_trilinear(op(level), d);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], up[i]);
    }
    return out;
}

enum class SegmentMethod { hessian, riesz_features };

inline SegmentMethod parse_segment_method(const std::string& s) {
    if (s == "hessian") return SegmentMethod::hessian;
    if (s == "riesz-features") return SegmentMethod::riesz_features;
    throw std::invalid_argument("unknown segmentation method '" + s + "'");
}

struct SegmentParams {
    SegmentMethod method = SegmentMethod::hessian;
    PercolationParams percolation;
    PlateMeasure measure;
    int n_scales = 1;
};

/// Crack measure (multiscale when n_scales > 1) followed by percolation.
inline LabelMask segment_cracks(const GrayVolume& v, const SegmentParams& p) {
    p.percolation.validate();
    const double sigma = p.percolation.smoothing_sigma_vox;
    VolumeOp op;
    if (p.method == SegmentMethod::hessian)
        op = [&](const GrayVolume& x) { return hessian_crackness(x, sigma, p.measure); };
    else
        op = [&](const GrayVolume& x) { return riesz_crackness(x, sigma, p.measure); };
    return percolation_segment(multiscale_apply(v, op, p.n_scales), p.percolation);
}

}  // namespace microforge::filter
