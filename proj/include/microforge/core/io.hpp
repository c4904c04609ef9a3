#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "microforge/core/error.hpp"
#include "microforge/core/volume.hpp"

namespace microforge {

enum class DType { u16, f32 };

inline const char* dtype_name(DType t) { return t == DType::u16 ? "u16" : "f32"; }

/// A volume as stored on disk: either 16-bit unsigned or 32-bit float samples.
using AnyVolume = std::variant<Volume<std::uint16_t>, Volume<float>>;

/// Parsed JSON sidecar of a raw volume.
struct VolumeMetadata {
    Dims dims;
    DType dtype = DType::f32;
    Spacing spacing_um{1.0, 1.0, 1.0};

    nlohmann::json to_json() const {
        return {{"dims", {dims.nx, dims.ny, dims.nz}},
                {"dtype", dtype_name(dtype)},
                {"spacing_um", {spacing_um[0], spacing_um[1], spacing_um[2]}},
                {"endianness", "LE"}};
    }

    static VolumeMetadata from_json(const nlohmann::json& j) {
        VolumeMetadata m;
        try {
            const auto& d = j.at("dims");
            if (!d.is_array() || d.size() != 3) throw std::invalid_argument("dims must be [nx, ny, nz]");
            m.dims = {d[0].get<std::int64_t>(), d[1].get<std::int64_t>(), d[2].get<std::int64_t>()};
            const auto dt = j.at("dtype").get<std::string>();
            if (dt == "u16")
                m.dtype = DType::u16;
            else if (dt == "f32")
                m.dtype = DType::f32;
            else
                throw std::invalid_argument("unsupported dtype '" + dt + "' (expected u16 or f32)");
            const auto& s = j.at("spacing_um");
            if (!s.is_array() || s.size() != 3) throw std::invalid_argument("spacing_um must have 3 entries");
            m.spacing_um = {s[0].get<double>(), s[1].get<double>(), s[2].get<double>()};
            if (j.contains("endianness") && j.at("endianness").get<std::string>() != "LE")
                throw std::invalid_argument("only little-endian (LE) volumes are supported");
        } catch (const nlohmann::json::exception& e) {
            throw std::invalid_argument(std::string("malformed volume sidecar: ") + e.what());
        }
        if (!m.dims.valid()) throw std::invalid_argument("sidecar dims must be positive");
        for (double v : m.spacing_um)
            if (!(v > 0.0)) throw std::invalid_argument("sidecar spacing_um must be > 0");
        return m;
    }
};

/// Sidecar path convention: foo.raw -> foo.json.
inline std::filesystem::path sidecar_path(const std::filesystem::path& raw) {
    auto p = raw;
    p.replace_extension(".json");
    return p;
}

namespace detail {

template <class T>
void to_le_bytes(const std::vector<T>& in, std::vector<char>& out) {
    out.resize(in.size() * sizeof(T));
    std::memcpy(out.data(), in.data(), out.size());
    if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
        for (std::size_t i = 0; i < in.size(); ++i) std::reverse(out.begin() + i * sizeof(T), out.begin() + (i + 1) * sizeof(T));
    }
}

template <class T>
std::vector<T> from_le_bytes(std::vector<char>& bytes) {
    if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
        for (std::size_t i = 0; i < bytes.size() / sizeof(T); ++i)
            std::reverse(bytes.begin() + i * sizeof(T), bytes.begin() + (i + 1) * sizeof(T));
    }
    std::vector<T> out(bytes.size() / sizeof(T));
    std::memcpy(out.data(), bytes.data(), bytes.size());
    return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
    f << text;
    if (!f) throw IoError("failed writing '" + path.string() + "'");
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace detail

inline VolumeMetadata read_metadata(const std::filesystem::path& metadata_path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(detail::read_text(metadata_path));
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument("sidecar '" + metadata_path.string() + "' is not valid JSON: " + e.what());
    }
    return VolumeMetadata::from_json(j);
}

/// Load a raw little-endian volume described by its JSON sidecar.
inline AnyVolume read_volume(const std::filesystem::path& path, const std::filesystem::path& metadata_path) {
    const VolumeMetadata meta = read_metadata(metadata_path);
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw IoError("cannot open raw volume '" + path.string() + "'");
    const auto file_bytes = static_cast<std::uint64_t>(f.tellg());
    const std::uint64_t elem = meta.dtype == DType::u16 ? 2 : 4;
    const auto expected = static_cast<std::uint64_t>(meta.dims.size()) * elem;
    if (file_bytes != expected)
        throw IoError("raw volume '" + path.string() + "' has " + std::to_string(file_bytes) +
                                    " bytes but sidecar declares " + meta.dims.str() + " " + dtype_name(meta.dtype) +
                                    " (" + std::to_string(expected) + " bytes)");
    std::vector<char> bytes(file_bytes);
    f.seekg(0);
    f.read(bytes.data(), static_cast<std::streamsize>(file_bytes));
    if (!f) throw IoError("short read on '" + path.string() + "'");
    if (meta.dtype == DType::u16)
        return Volume<std::uint16_t>(meta.dims, meta.spacing_um, detail::from_le_bytes<std::uint16_t>(bytes));
    return Volume<float>(meta.dims, meta.spacing_um, detail::from_le_bytes<float>(bytes));
}

inline AnyVolume read_volume(const std::filesystem::path& path) { return read_volume(path, sidecar_path(path)); }

template <class T>
    requires std::same_as<T, std::uint16_t> || std::same_as<T, float>
void write_volume(const Volume<T>& v, const std::filesystem::path& path, const std::filesystem::path& metadata_path) {
    std::vector<char> bytes;
    detail::to_le_bytes(v.storage(), bytes);
    {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!f) throw IoError("failed writing '" + path.string() + "'");
    }
    VolumeMetadata meta{v.dims(), std::same_as<T, std::uint16_t> ? DType::u16 : DType::f32, v.spacing()};
    detail::write_text(metadata_path, meta.to_json().dump(2) + "\n");
}

template <class T>
void write_volume(const Volume<T>& v, const std::filesystem::path& path) {
    write_volume(v, path, sidecar_path(path));
}

inline void write_volume(const AnyVolume& v, const std::filesystem::path& path, const std::filesystem::path& metadata_path) {
    std::visit([&](const auto& vol) { write_volume(vol, path, metadata_path); }, v);
}

/// Gray values live in [0, 1] as float; u16 maps 0..65535 onto that range.
inline GrayVolume to_gray(const AnyVolume& v) {
    if (const auto* f = std::get_if<Volume<float>>(&v)) return *f;
    const auto& u = std::get<Volume<std::uint16_t>>(v);
    GrayVolume out(u.dims(), u.spacing());
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = static_cast<float>(u[i] / 65535.0);
    return out;
}

inline Volume<std::uint16_t> quantize_u16(const GrayVolume& v) {
    Volume<std::uint16_t> out(v.dims(), v.spacing());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double c = std::clamp(static_cast<double>(v[i]), 0.0, 1.0);
        out[i] = static_cast<std::uint16_t>(std::lround(c * 65535.0));
    }
    return out;
}

/// Masks are stored as u16 volumes holding 0/1.
inline void write_mask(const LabelMask& m, const std::filesystem::path& path) {
    Volume<std::uint16_t> u(m.dims(), m.spacing());
    for (std::size_t i = 0; i < m.size(); ++i) u[i] = m[i] ? 1 : 0;
    write_volume(u, path);
}

inline LabelMask read_mask(const std::filesystem::path& path, const std::filesystem::path& metadata_path) {
    const AnyVolume any = read_volume(path, metadata_path);
    return std::visit(
        [](const auto& v) {
            LabelMask m(v.dims(), v.spacing());
            for (std::size_t i = 0; i < v.size(); ++i) m[i] = v[i] != 0 ? 1 : 0;
            return m;
        },
        any);
}

inline LabelMask read_mask(const std::filesystem::path& path) { return read_mask(path, sidecar_path(path)); }

}  // namespace microforge
