#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "microforge/core/parallel.hpp"
#include "microforge/core/volume.hpp"

namespace microforge {

namespace detail {

/// 1D squared distance transform of sampled function f (Felzenszwalb & Huttenlocher).
inline void edt_1d(const double* f, double* d, std::int64_t n, std::vector<std::int64_t>& v, std::vector<double>& z) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    v.resize(static_cast<std::size_t>(n));
    z.resize(static_cast<std::size_t>(n) + 1);
    std::int64_t k = -1;
    for (std::int64_t q = 0; q < n; ++q) {
        if (f[q] == inf) continue;
        if (k < 0) {
            k = 0;
            v[0] = q;
            z[0] = -inf;
            z[1] = inf;
            continue;
        }
        auto meet = [&](std::int64_t p) {
            return ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * double(q - p));
        };
        double s = meet(v[k]);
        while (s <= z[k]) {  // z[0] = -inf stops this at k = 0
            --k;
            s = meet(v[k]);
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = inf;
    }
    if (k < 0) {
        for (std::int64_t q = 0; q < n; ++q) d[q] = inf;
        return;
    }
    std::int64_t j = 0;
    for (std::int64_t q = 0; q < n; ++q) {
        while (z[j + 1] < q) ++j;
        const double dq = double(q - v[j]);
        d[q] = dq * dq + f[v[j]];
    }
}

}  // namespace detail

/// Exact squared Euclidean distance (voxel units) from every voxel to the
/// nearest voxel where `sites` is non-zero; +inf when there is no site.
inline Volume<float> squared_distance_to(const LabelMask& sites) {
    const Dims d = sites.dims();
    constexpr double inf = std::numeric_limits<double>::infinity();
    Volume<float> out(d, sites.spacing());
    auto& buf = out.storage();

    auto pass = [&](int axis) {
        const std::int64_t n = d[axis];
        const std::int64_t stride = axis == 0 ? 1 : (axis == 1 ? d.nx : d.nx * d.ny);
        const std::int64_t lines_a = axis == 0 ? d.ny : d.nx;
        const std::int64_t lines_b = axis == 2 ? d.ny : d.nz;
        parallel_for(0, lines_b, [&](std::int64_t b) {
            std::vector<double> f(static_cast<std::size_t>(n)), g(static_cast<std::size_t>(n));
            std::vector<std::int64_t> v;
            std::vector<double> z;
            for (std::int64_t a = 0; a < lines_a; ++a) {
                std::int64_t base;
                if (axis == 0)
                    base = d.nx * (a + d.ny * b);
                else if (axis == 1)
                    base = a + d.nx * d.ny * b;
                else
                    base = a + d.nx * b;
                for (std::int64_t i = 0; i < n; ++i) {
                    const auto idx = static_cast<std::size_t>(base + i * stride);
                    f[i] = axis == 0 ? (sites[idx] ? 0.0 : inf) : static_cast<double>(buf[idx]);
                }
                detail::edt_1d(f.data(), g.data(), n, v, z);
                for (std::int64_t i = 0; i < n; ++i)
                    buf[static_cast<std::size_t>(base + i * stride)] = static_cast<float>(g[i]);
            }
        });
    };
    pass(0);
    pass(1);
    pass(2);
    return out;
}

/// Voxels within Euclidean distance `radius` of the mask.
inline LabelMask dilate_euclidean(const LabelMask& m, double radius) {
    if (radius <= 0.0) return m;
    const Volume<float> d2 = squared_distance_to(m);
    LabelMask out(m.dims(), m.spacing());
    const double r2 = radius * radius + 1e-9;
    for (std::size_t i = 0; i < m.size(); ++i) out[i] = d2[i] <= r2 ? 1 : 0;
    return out;
}

}  // namespace microforge
