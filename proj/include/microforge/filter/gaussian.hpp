#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "microforge/core/parallel.hpp"
#include "microforge/core/volume.hpp"

namespace microforge::filter {

/// Half-sample symmetric reflection of index i into [0, n).
inline std::int64_t mirror_index(std::int64_t i, std::int64_t n) {
    if (n == 1) return 0;
    const std::int64_t period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - 1 - i;
}

/// Odd-length 1D kernel centred at index radius.
struct Kernel {
    std::vector<double> taps{1.0};
    int radius() const { return static_cast<int>(taps.size() / 2); }
    bool identity() const { return taps.size() == 1 && taps[0] == 1.0; }
};

/// Sampled Gaussian derivative of the given order (0, 1 or 2), radius
/// ceil(4 sigma). Moments are normalised so the kernels act exactly on
/// polynomials: order 0 sums to 1, order 1 maps x to 1, order 2 maps x^2 to 2.
inline Kernel gaussian_kernel(double sigma, int order) {
    if (!(sigma > 0.0)) throw std::invalid_argument("Gaussian sigma must be > 0");
    if (order < 0 || order > 2) throw std::invalid_argument("Gaussian derivative order must be 0, 1 or 2");
    const int r = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
    std::vector<double> g(2 * r + 1);
    double sum = 0.0;
    for (int k = -r; k <= r; ++k) sum += g[k + r] = std::exp(-0.5 * k * k / (sigma * sigma));
    for (auto& v : g) v /= sum;
    Kernel out;
    out.taps.resize(g.size());
    if (order == 0) {
        out.taps = g;
    } else if (order == 1) {
        // (f * k)(i) = sum_j f(i - j) k(j); for f = x this is -sum_j j k(j).
        double m1 = 0.0;
        for (int k = -r; k <= r; ++k) m1 += k * (-k * g[k + r]);
        for (int k = -r; k <= r; ++k) out.taps[k + r] = -k * g[k + r] / -m1;
    } else {
        const double s2 = sigma * sigma;
        double mean = 0.0;
        for (int k = -r; k <= r; ++k) mean += out.taps[k + r] = (k * k / (s2 * s2) - 1.0 / s2) * g[k + r];
        for (int k = -r; k <= r; ++k) out.taps[k + r] -= mean * g[k + r];
        double m2 = 0.0;
        for (int k = -r; k <= r; ++k) m2 += double(k) * k * out.taps[k + r];
        for (auto& v : out.taps) v *= 2.0 / m2;
    }
    return out;
}

/// Convolve along one axis with mirror boundaries.
template <class T>
Volume<T> convolve_axis(const Volume<T>& in, const Kernel& k, int axis) {
    if (k.identity() || in.dims()[axis] == 1) return in;
    const Dims d = in.dims();
    Volume<T> out(d, in.spacing());
    const std::int64_t n = d[axis];
    const std::int64_t stride = axis == 0 ? 1 : (axis == 1 ? d.nx : d.nx * d.ny);
    const std::int64_t lines_a = axis == 0 ? d.ny : d.nx;
    const std::int64_t lines_b = axis == 2 ? d.ny : d.nz;
    const int r = k.radius();
    parallel_for(0, lines_b, [&](std::int64_t b) {
        std::vector<double> line(static_cast<std::size_t>(n));
        for (std::int64_t a = 0; a < lines_a; ++a) {
            std::int64_t base;
            if (axis == 0)
                base = d.nx * (a + d.ny * b);
            else if (axis == 1)
                base = a + d.nx * d.ny * b;
            else
                base = a + d.nx * b;
            for (std::int64_t i = 0; i < n; ++i) line[i] = static_cast<double>(in[static_cast<std::size_t>(base + i * stride)]);
            for (std::int64_t i = 0; i < n; ++i) {
                double acc = 0.0;
                for (int j = -r; j <= r; ++j) acc += line[mirror_index(i - j, n)] * k.taps[j + r];
                out[static_cast<std::size_t>(base + i * stride)] = static_cast<T>(acc);
            }
        }
    });
    return out;
}

template <class T>
Volume<T> separable_filter(const Volume<T>& in, const std::array<Kernel, 3>& k) {
    Volume<T> v = convolve_axis(in, k[0], 0);
    v = convolve_axis(v, k[1], 1);
    return convolve_axis(v, k[2], 2);
}

template <class T>
Volume<T> gaussian_blur(const Volume<T>& in, double sigma) {
    const Kernel g = gaussian_kernel(sigma, 0);
    return separable_filter(in, {g, g, g});
}

/// 2x block average along every axis longer than 1; odd trailing layers are dropped.
template <class T>
Volume<T> downscale2(const Volume<T>& in) {
    const Dims d = in.dims();
    const int fx = d.nx > 1 ? 2 : 1, fy = d.ny > 1 ? 2 : 1, fz = d.nz > 1 ? 2 : 1;
    const Dims o{d.nx / fx, d.ny / fy, d.nz / fz};
    if (!o.valid()) throw std::invalid_argument("volume " + d.str() + " is too small to downscale");
    Spacing sp = in.spacing();
    sp[0] *= fx;
    sp[1] *= fy;
    sp[2] *= fz;
    Volume<T> out(o, sp);
    const double w = 1.0 / (fx * fy * fz);
    parallel_for(0, o.nz, [&](std::int64_t z) {
        for (std::int64_t y = 0; y < o.ny; ++y)
            for (std::int64_t x = 0; x < o.nx; ++x) {
                double acc = 0.0;
                for (int c = 0; c < fz; ++c)
                    for (int b = 0; b < fy; ++b)
                        for (int a = 0; a < fx; ++a) acc += static_cast<double>(in(fx * x + a, fy * y + b, fz * z + c));
                out(x, y, z) = static_cast<T>(acc * w);
            }
    });
    return out;
}

/// Trilinear resampling onto `target` with voxel centres aligned: target
/// voxel i maps to source coordinate (i + 1/2) * n_src / n_dst - 1/2, clamped.
template <class T>
Volume<T> upscale_trilinear(const Volume<T>& in, const Dims& target) {
    const Dims s = in.dims();
    Volume<T> out(target, in.spacing());
    auto coord = [](std::int64_t i, std::int64_t ns, std::int64_t nt, std::int64_t& i0, double& f) {
        const double c = std::clamp((i + 0.5) * double(ns) / double(nt) - 0.5, 0.0, double(ns - 1));
        i0 = std::min<std::int64_t>(static_cast<std::int64_t>(c), ns - 1);
        f = c - i0;
    };
    parallel_for(0, target.nz, [&](std::int64_t z) {
        std::int64_t z0, y0, x0;
        double fz, fy, fx;
        coord(z, s.nz, target.nz, z0, fz);
        const std::int64_t z1 = std::min(z0 + 1, s.nz - 1);
        for (std::int64_t y = 0; y < target.ny; ++y) {
            coord(y, s.ny, target.ny, y0, fy);
            const std::int64_t y1 = std::min(y0 + 1, s.ny - 1);
            for (std::int64_t x = 0; x < target.nx; ++x) {
                coord(x, s.nx, target.nx, x0, fx);
                const std::int64_t x1 = std::min(x0 + 1, s.nx - 1);
                auto lerp = [](double a, double b, double t) { return a + (b - a) * t; };
                const double c00 = lerp(in(x0, y0, z0), in(x1, y0, z0), fx);
                const double c10 = lerp(in(x0, y1, z0), in(x1, y1, z0), fx);
                const double c01 = lerp(in(x0, y0, z1), in(x1, y0, z1), fx);
                const double c11 = lerp(in(x0, y1, z1), in(x1, y1, z1), fx);
                out(x, y, z) = static_cast<T>(lerp(lerp(c00, c10, fy), lerp(c01, c11, fy), fz));
            }
        }
    });
    return out;
}

}  // namespace microforge::filter
