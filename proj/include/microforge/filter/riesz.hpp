#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "microforge/core/fft.hpp"
#include "microforge/core/volume.hpp"
#include "microforge/filter/gaussian.hpp"

namespace microforge::filter {

enum class RieszBoundary {
    mirror,   // reflect-pad each non-trivial axis, transform, crop
    periodic  // transform the field as is
};

struct RieszOptions {
    RieszBoundary boundary = RieszBoundary::mirror;
    double pad_fraction = 0.25;  // reflected margin per side, as a fraction of the axis length
};

namespace detail {

inline void require_riesz_dims(const Dims& d) {
    for (int a = 0; a < 3; ++a)
        if (d[a] != 1 && d[a] < 4) throw std::invalid_argument("Riesz transform needs >= 4 samples per axis, got " + d.str());
    if (d.nx < 4) throw std::invalid_argument("Riesz transform needs >= 4 samples along x, got " + d.str());
}

/// Padding on the low and high side of one axis; the padded length is made
/// odd so the grid has no Nyquist bin. The margin scales with the axis, so a
/// 2x downscaled field sees the same physical extension.
inline std::array<std::int64_t, 2> axis_padding(std::int64_t n, const RieszOptions& o) {
    if (n == 1 || o.boundary == RieszBoundary::periodic) return {0, 0};
    const auto pad = static_cast<std::int64_t>(std::ceil(o.pad_fraction * static_cast<double>(n)));
    const std::int64_t lo = pad, hi = pad + ((n + 2 * pad) % 2 == 0 ? 1 : 0);
    return {lo, hi};
}

/// Apply the frequency multiplier m(xi) (xi in cycles per sample) to the field.
template <class T, class Multiplier>
Volume<T> apply_multiplier(const Volume<T>& f, const RieszOptions& o, Multiplier&& m) {
    const Dims d = f.dims();
    require_riesz_dims(d);
    if (!(o.pad_fraction >= 0.0 && o.pad_fraction <= 1.0)) throw std::invalid_argument("Riesz pad fraction must lie in [0, 1]");
    std::array<std::array<std::int64_t, 2>, 3> pad{};
    for (int a = 0; a < 3; ++a) pad[a] = axis_padding(d[a], o);
    const Dims p{d.nx + pad[0][0] + pad[0][1], d.ny + pad[1][0] + pad[1][1], d.nz + pad[2][0] + pad[2][1]};

    RealFft3 fft(p);
    double* re = fft.real();
    for (std::int64_t z = 0; z < p.nz; ++z) {
        const std::int64_t sz = mirror_index(z - pad[2][0], d.nz);
        for (std::int64_t y = 0; y < p.ny; ++y) {
            const std::int64_t sy = mirror_index(y - pad[1][0], d.ny);
            for (std::int64_t x = 0; x < p.nx; ++x)
                re[x + p.nx * (y + p.ny * z)] = static_cast<double>(f(mirror_index(x - pad[0][0], d.nx), sy, sz));
        }
    }
    fft.forward();
    auto* s = fft.spectrum();
    const std::int64_t hx = fft.half_nx();
    for (std::int64_t kz = 0; kz < p.nz; ++kz)
        for (std::int64_t ky = 0; ky < p.ny; ++ky)
            for (std::int64_t kx = 0; kx < hx; ++kx) {
                const std::array<std::int64_t, 3> k{kx, RealFft3::frequency(ky, p.ny), RealFft3::frequency(kz, p.nz)};
                const std::array<bool, 3> nyquist{p.nx % 2 == 0 && kx == p.nx / 2, p.ny % 2 == 0 && ky == p.ny / 2,
                                                  p.nz % 2 == 0 && kz == p.nz / 2};
                const std::array<double, 3> xi{double(k[0]) / p.nx, double(k[1]) / p.ny, double(k[2]) / p.nz};
                auto& c = s[kx + hx * (ky + p.ny * kz)];
                if (k[0] == 0 && k[1] == 0 && k[2] == 0)
                    c = 0.0;
                else
                    c *= m(xi, nyquist);
            }
    fft.inverse();
    Volume<T> out(d, f.spacing());
    const double norm = 1.0 / static_cast<double>(p.size());
    for (std::int64_t z = 0; z < d.nz; ++z)
        for (std::int64_t y = 0; y < d.ny; ++y)
            for (std::int64_t x = 0; x < d.nx; ++x)
                out(x, y, z) = static_cast<T>(
                    norm * re[(x + pad[0][0]) + p.nx * ((y + pad[1][0]) + p.ny * (z + pad[2][0]))]);
    return out;
}

inline void require_axis(int j, const Dims& d) {
    if (j < 0 || j > 2) throw std::invalid_argument("Riesz axis must be 0, 1 or 2");
    if (d[j] == 1) throw std::invalid_argument("Riesz axis has a single sample");
}

}  // namespace detail

/// First-order Riesz transform: multiplier -i xi_j / |xi|, DC set to 0.
/// Bins on an even-length Nyquist plane are zeroed, since the odd
/// multiplier has no real-valued counterpart there.
template <class T>
Volume<T> riesz1(const Volume<T>& f, int j, const RieszOptions& o = {}) {
    detail::require_axis(j, f.dims());
    return detail::apply_multiplier(f, o, [j](const std::array<double, 3>& xi, const std::array<bool, 3>& nyq) {
        if (nyq[j]) return std::complex<double>{};
        const double r = std::sqrt(xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]);
        return std::complex<double>{0.0, -xi[j] / r};
    });
}

/// Second-order Riesz transform: multiplier -xi_j xi_k / |xi|^2, DC set to 0.
template <class T>
Volume<T> riesz2(const Volume<T>& f, int j, int k, const RieszOptions& o = {}) {
    detail::require_axis(j, f.dims());
    detail::require_axis(k, f.dims());
    return detail::apply_multiplier(f, o, [j, k](const std::array<double, 3>& xi, const std::array<bool, 3>& nyq) {
        if (j != k && (nyq[j] || nyq[k])) return std::complex<double>{};
        const double r2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
        return std::complex<double>{-xi[j] * xi[k] / r2, 0.0};
    });
}

}  // namespace microforge::filter
