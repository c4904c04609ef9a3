#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace microforge {

struct Dims {
    std::int64_t nx = 0, ny = 0, nz = 0;

    constexpr std::int64_t size() const { return nx * ny * nz; }
    constexpr std::int64_t operator[](int axis) const { return axis == 0 ? nx : (axis == 1 ? ny : nz); }
    constexpr bool operator==(const Dims&) const = default;
    constexpr bool valid() const { return nx > 0 && ny > 0 && nz > 0; }
    std::string str() const { return std::to_string(nx) + "x" + std::to_string(ny) + "x" + std::to_string(nz); }
};

using Spacing = std::array<double, 3>;

/// Dense 3D scalar grid with physical voxel spacing. Storage is x-fastest:
/// index(x, y, z) = x + nx * (y + ny * z). A 2D image is a volume with nz = 1.
template <class T>
class Volume {
public:
    using value_type = T;

    Volume() = default;

    explicit Volume(Dims dims, Spacing spacing_um = {1.0, 1.0, 1.0}, T fill = T{})
        : dims_(dims), spacing_(spacing_um) {
        if (!dims.valid()) throw std::invalid_argument("volume dims must be positive, got " + dims.str());
        for (double s : spacing_um)
            if (!(s > 0.0)) throw std::invalid_argument("voxel spacing must be > 0");
        data_.assign(static_cast<std::size_t>(dims.size()), fill);
    }

    Volume(Dims dims, Spacing spacing_um, std::vector<T> data) : Volume(dims, spacing_um) {
        if (data.size() != data_.size())
            throw std::invalid_argument("volume data length " + std::to_string(data.size()) + " does not match dims " +
                                        dims.str());
        data_ = std::move(data);
    }

    const Dims& dims() const { return dims_; }
    const Spacing& spacing() const { return spacing_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::size_t index(std::int64_t x, std::int64_t y, std::int64_t z) const {
        return static_cast<std::size_t>(x + dims_.nx * (y + dims_.ny * z));
    }
    bool in_bounds(std::int64_t x, std::int64_t y, std::int64_t z) const {
        return x >= 0 && y >= 0 && z >= 0 && x < dims_.nx && y < dims_.ny && z < dims_.nz;
    }

    T& operator()(std::int64_t x, std::int64_t y, std::int64_t z = 0) { return data_[index(x, y, z)]; }
    const T& operator()(std::int64_t x, std::int64_t y, std::int64_t z = 0) const { return data_[index(x, y, z)]; }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::span<T> data() { return data_; }
    std::span<const T> data() const { return data_; }
    std::vector<T>& storage() { return data_; }
    const std::vector<T>& storage() const { return data_; }

    bool operator==(const Volume&) const = default;

private:
    Dims dims_{};
    Spacing spacing_{1.0, 1.0, 1.0};
    std::vector<T> data_;
};

/// Binary mask: 1 = foreground, 0 = background.
using LabelMask = Volume<std::uint8_t>;
using GrayVolume = Volume<float>;

template <class A, class B>
void require_same_dims(const Volume<A>& a, const Volume<B>& b, const char* what) {
    if (!(a.dims() == b.dims()))
        throw std::invalid_argument(std::string(what) + ": dims mismatch " + a.dims().str() + " vs " + b.dims().str());
}

inline std::size_t count_foreground(const LabelMask& m) {
    std::size_t n = 0;
    for (auto v : m.data()) n += v != 0;
    return n;
}

template <class To, class From>
Volume<To> convert(const Volume<From>& v) {
    Volume<To> out(v.dims(), v.spacing());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<To>(v[i]);
    return out;
}

}  // namespace microforge
