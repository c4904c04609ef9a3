#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <png.h>

#include "microforge/core/error.hpp"
#include "microforge/core/geometry.hpp"
#include "microforge/core/volume.hpp"

namespace microforge {

/// 2D raster decoded from or destined for a PNG file. Samples are row-major,
/// `channels` interleaved values per pixel, each in [0, 2^bit_depth).
struct PngImage {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    int channels = 1;   // 1 = gray, 3 = RGB
    int bit_depth = 8;  // 8 or 16
    std::vector<std::uint16_t> samples;
};

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};

}  // namespace detail

inline void write_png(const PngImage& img, const std::filesystem::path& path) {
    if (img.bit_depth != 8 && img.bit_depth != 16) throw std::invalid_argument("PNG bit depth must be 8 or 16");
    if (img.channels != 1 && img.channels != 3) throw std::invalid_argument("PNG must be gray or RGB");
    if (img.samples.size() != std::size_t{img.width} * img.height * img.channels)
        throw std::invalid_argument("PNG sample count does not match size");
    std::unique_ptr<std::FILE, detail::FileCloser> fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw IoError("cannot open '" + path.string() + "' for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng failed writing '" + path.string() + "'");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.width, img.height, img.bit_depth,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    const std::size_t row_values = std::size_t{img.width} * img.channels;
    const std::size_t bytes_per = img.bit_depth / 8;
    std::vector<png_byte> row(row_values * bytes_per);
    for (std::uint32_t y = 0; y < img.height; ++y) {
        const std::uint16_t* src = img.samples.data() + y * row_values;
        for (std::size_t i = 0; i < row_values; ++i) {
            if (bytes_per == 1) {
                row[i] = static_cast<png_byte>(src[i]);
            } else {
                row[2 * i] = static_cast<png_byte>(src[i] >> 8);  // PNG is big-endian
                row[2 * i + 1] = static_cast<png_byte>(src[i] & 0xFF);
            }
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

/// Decode any PNG into gray (RGB/alpha are reduced to luminance of the
/// first channel set; palettes are expanded).
inline PngImage read_png_gray(const std::filesystem::path& path) {
    std::unique_ptr<std::FILE, detail::FileCloser> fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw IoError("cannot open '" + path.string() + "'");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("'" + path.string() + "' is not a readable PNG");
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    const auto color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE)
        png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    png_read_update_info(png, info);

    PngImage img;
    img.width = png_get_image_width(png, info);
    img.height = png_get_image_height(png, info);
    img.bit_depth = png_get_bit_depth(png, info);
    img.channels = 1;
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    std::vector<png_byte> row(rowbytes);
    img.samples.resize(std::size_t{img.width} * img.height);
    for (std::uint32_t y = 0; y < img.height; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (std::uint32_t x = 0; x < img.width; ++x) {
            img.samples[std::size_t{y} * img.width + x] =
                img.bit_depth == 16 ? static_cast<std::uint16_t>((row[2 * x] << 8) | row[2 * x + 1]) : row[x];
        }
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

/// Gray window for slice export; values are mapped linearly from [lo, hi].
struct GrayWindow {
    double lo = 0.0;
    double hi = 1.0;
};

struct SliceExportOptions {
    int bit_depth = 8;
    std::optional<GrayWindow> window;  // min-max of the whole volume when unset
    std::string prefix = "slice";
};

namespace detail {

inline std::uint16_t window_sample(double v, const GrayWindow& w, int bit_depth) {
    const double maxv = bit_depth == 16 ? 65535.0 : 255.0;
    const double span = w.hi - w.lo;
    const double t = span > 0.0 ? (v - w.lo) / span : 0.0;
    return static_cast<std::uint16_t>(std::lround(std::clamp(t, 0.0, 1.0) * maxv));
}

}  // namespace detail

/// Write one grayscale PNG per slice orthogonal to `axis`. Files are named
/// `<prefix>_<axis>_<index:04>.png`. Masks (uint8 volumes) export as 0/255.
template <class T>
std::size_t export_slices(const Volume<T>& vol, Axis axis, const std::filesystem::path& directory,
                          const SliceExportOptions& opts = {}) {
    std::error_code ec;
    std::filesystem::create_directories(directory, ec);
    if (ec || !std::filesystem::is_directory(directory))
        throw IoError("cannot create slice directory '" + directory.string() + "'");

    constexpr bool is_mask = std::is_same_v<T, std::uint8_t>;
    GrayWindow win{0.0, 1.0};
    int depth = opts.bit_depth;
    if constexpr (is_mask) {
        depth = 8;
    } else if (opts.window) {
        win = *opts.window;
    } else if (!vol.empty()) {
        const auto [mn, mx] = std::minmax_element(vol.storage().begin(), vol.storage().end());
        win = {static_cast<double>(*mn), static_cast<double>(*mx)};
    }

    const Dims d = vol.dims();
    const int a = static_cast<int>(axis);
    // In-slice axes keep x-fastest order: (u, v) = (y, z), (x, z), (x, y).
    const int ua = a == 0 ? 1 : 0;
    const int va = a == 2 ? 1 : 2;
    const std::int64_t n = d[a];
    std::size_t written = 0;
    for (std::int64_t s = 0; s < n; ++s) {
        PngImage img;
        img.width = static_cast<std::uint32_t>(d[ua]);
        img.height = static_cast<std::uint32_t>(d[va]);
        img.bit_depth = depth;
        img.samples.resize(std::size_t{img.width} * img.height);
        for (std::int64_t v = 0; v < d[va]; ++v)
            for (std::int64_t u = 0; u < d[ua]; ++u) {
                std::int64_t c[3];
                c[a] = s;
                c[ua] = u;
                c[va] = v;
                const T val = vol(c[0], c[1], c[2]);
                std::uint16_t out;
                if constexpr (is_mask)
                    out = val ? 255 : 0;
                else
                    out = detail::window_sample(static_cast<double>(val), win, depth);
                img.samples[static_cast<std::size_t>(v * d[ua] + u)] = out;
            }
        char name[64];
        std::snprintf(name, sizeof name, "%s_%c_%04lld.png", opts.prefix.c_str(), axis_name(axis),
                      static_cast<long long>(s));
        write_png(img, directory / name);
        ++written;
    }
    return written;
}

/// Gray image (nz = 1) to PNG with a fixed window.
template <class T>
void write_image_png(const Volume<T>& img, const std::filesystem::path& path, GrayWindow win = {0.0, 1.0},
                     int bit_depth = 8) {
    PngImage p;
    p.width = static_cast<std::uint32_t>(img.dims().nx);
    p.height = static_cast<std::uint32_t>(img.dims().ny);
    p.bit_depth = bit_depth;
    p.samples.resize(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) {
        if constexpr (std::is_same_v<T, std::uint8_t>)
            p.samples[i] = img[i] ? 255 : 0;
        else
            p.samples[i] = detail::window_sample(static_cast<double>(img[i]), win, bit_depth);
    }
    write_png(p, path);
}

}  // namespace microforge
