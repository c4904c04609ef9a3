#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "microforge/boolean_model.hpp"
#include "microforge/core/error.hpp"
#include "microforge/core/io.hpp"
#include "microforge/core/parallel.hpp"
#include "microforge/core/png.hpp"
#include "microforge/core/random.hpp"
#include "microforge/crack.hpp"
#include "microforge/eval.hpp"
#include "microforge/filter/crackness.hpp"
#include "microforge/job/config.hpp"
#include "microforge/job/hash.hpp"
#include "microforge/milling.hpp"
#include "microforge/point_process.hpp"
#include "microforge/sem.hpp"
#include "microforge/tessellation.hpp"

#ifndef MICROFORGE_VERSION
#define MICROFORGE_VERSION "0.1.0"
#endif

namespace microforge::job {

inline constexpr const char* tool_version = MICROFORGE_VERSION;
inline constexpr std::int64_t voxel_guard = 1'000'000'000;

/// A generation stage failed; the message carries the stage tag.
struct GenerationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Substream keys below a replicate stream.
enum StreamKey : std::uint64_t { germs = 1, packing = 2, widths = 3, background = 4, blend = 5, surface = 6, grains = 7, noise = 8 };

struct GeneratedCrack {
    GrayVolume volume;
    LabelMask mask;
    json info;
};

/// Germs of the tessellation in the voxel-unit window [0, dims].
inline PointPattern sample_germs(const CrackJob& c, const Box& window, const RandomStream& rng, json& info) {
    const double volume = window.volume();
    const double lambda = c.intensity ? *c.intensity : c.target_cells / volume;
    info["intensity_per_vox3"] = lambda;
    const Vec3 ext = window.extent();
    switch (c.germs) {
        case GermModel::poisson: return sample_poisson(lambda, window, rng.substream(germs));
        case GermModel::matern: {
            MaternParams m;
            m.mean_points_per_cluster = c.mean_points_per_cluster;
            m.cluster_radius = c.cluster_radius_fraction * std::min({ext.x, ext.y, ext.z});
            m.parent_intensity = lambda / c.mean_points_per_cluster;
            info["cluster_radius_vox"] = m.cluster_radius;
            info["parent_intensity_per_vox3"] = m.parent_intensity;
            return sample_matern_cluster(m, window, rng.substream(germs));
        }
        case GermModel::packing: {
            PackingParams p;
            p.target_count = static_cast<std::size_t>(std::max(2.0, std::round(lambda * volume)));
            const double r = std::cbrt(c.packing_fraction * volume / (p.target_count * 4.0 / 3.0 * std::numbers::pi));
            p.radius = SizeDistribution::constant(r);
            info["packing_radius_vox"] = r;
            const auto pk = sample_force_biased_packing(p, window, rng.substream(packing));
            info["packing_iterations"] = pk.iterations;
            return pk.centers;
        }
        case GermModel::stretched: {
            const Box pre{window.lo, window.lo + Vec3{ext.x / c.stretch.x, ext.y / c.stretch.y, ext.z / c.stretch.z}};
            const PointPattern p = sample_poisson(lambda * volume / pre.volume(), pre, rng.substream(germs));
            PointPattern s = stretch_points(p, c.stretch);
            s.window = window;
            return s;
        }
    }
    return {};
}

/// Constant gray level plus Gaussian noise; layer z draws from substream z.
inline GrayVolume synthetic_background(const Dims& d, const Spacing& sp, double mean, double sigma, const RandomStream& rng) {
    GrayVolume bg(d, sp);
    parallel_for(0, d.nz, [&](std::int64_t z) {
        RandomStream r = rng.substream(static_cast<std::uint64_t>(z));
        for (std::int64_t y = 0; y < d.ny; ++y)
            for (std::int64_t x = 0; x < d.nx; ++x)
                bg(x, y, z) = static_cast<float>(std::clamp(mean + sigma * r.normal(), 0.0, 1.0));
    });
    return bg;
}

inline GrayModel crack_gray_model(const CrackJob& c, const GrayVolume& bg, bool real_background) {
    if (c.gray_kind == "gaussian" || (c.gray_kind == "auto" && !real_background))
        return GrayModel::gaussian(c.gray_mean, c.gray_stddev);
    return estimate_air_gray_model(bg, c.air_threshold);
}

/// Crack mask plus the blended gray volume for one replicate stream.
/// `background` is the shared real background, or null for a synthetic one.
inline GeneratedCrack generate_crack(const CrackJob& c, const RandomStream& rng, const GrayVolume* background = nullptr) {
    GeneratedCrack g;
    const Dims d = background ? background->dims() : c.dims;
    const Spacing sp = background ? background->spacing() : c.spacing;
    json info;
    info["dims"] = {d.nx, d.ny, d.nz};
    if (c.brownian) {
        g.mask = brownian_crack(c.hurst, c.amplitude_vox, d, rng.substream(surface), c.walk.w0, sp);
        info["surface"] = "brownian";
        info["width"] = c.walk.w0;
        info["separation_axis"] = "z";
    } else {
        const Box window{{0, 0, 0}, {double(d.nx), double(d.ny), double(d.nz)}};
        const PointPattern germs_pp = sample_germs(c, window, rng, info);
        info["germs"] = germs_pp.size();
        if (germs_pp.size() < 2) throw GenerationError("germ process produced fewer than two germs");
        const Tessellation t = build_voronoi(germs_pp, window);
        info["cells"] = t.cells.size();
        info["facets"] = t.facets.size();
        auto widen = [&](CrackSurface s) {
            if (c.width_mode == "constant") return assign_constant_width(std::move(s), c.walk.w0);
            if (c.width_mode == "random_walk") return assign_widths_random_walk(std::move(s), t, c.walk, rng.substream(widths));
            return make_multiscale_widths(std::move(s), t, c.scales, rng.substream(widths));
        };
        CrackSurface crack = widen(min_cut_crack(t, c.axis));
        info["cut_weight"] = crack.weight;
        for (std::size_t k = 0; k < c.union_axes.size(); ++k)
            crack = union_cracks(crack, widen(min_cut_crack(t, c.union_axes[k])), t);
        info["cut_facets"] = crack.size();
        if (!crack.empty()) {
            const auto [mn, mx] = std::minmax_element(crack.widths.begin(), crack.widths.end());
            double mean = 0.0;
            for (int w : crack.widths) mean += w;
            info["width_min"] = *mn;
            info["width_max"] = *mx;
            info["width_mean"] = mean / static_cast<double>(crack.size());
        }
        info["surface"] = "min_cut";
        info["separation_axis"] = std::string(1, axis_name(c.axis));
        g.mask = voxelize_crack(crack, t, d, sp);
    }
    const GrayVolume bg = background ? *background
                                     : synthetic_background(d, sp, c.background_mean, c.background_noise, rng.substream(StreamKey::background));
    const GrayModel gm = crack_gray_model(c, bg, background != nullptr);
    info["gray_model"] = gm.to_json();
    g.volume = blend_into_volume(bg, g.mask, gm, c.pv_sigma_vox, rng.substream(blend));
    info["mask_voxels"] = count_foreground(g.mask);
    g.info = std::move(info);
    return g;
}

struct Artifact {
    std::string path;  // relative to the output directory, '/' separated
    std::string sha256;
    std::uintmax_t bytes = 0;
    std::optional<std::string> sha256_stable;
    std::vector<std::string> nondeterministic_columns;
};

/// Writes land below `root`; every file is recorded with its hash.
class OutputDir {
public:
    explicit OutputDir(std::filesystem::path root) : root_(std::move(root)) {
        std::error_code ec;
        std::filesystem::create_directories(root_, ec);
        if (ec || !std::filesystem::is_directory(root_)) throw IoError("cannot create output directory '" + root_.string() + "'");
    }

    const std::filesystem::path& root() const { return root_; }
    std::filesystem::path path(const std::string& rel) const { return root_ / rel; }

    void record(const std::string& rel) {
        Artifact a{rel, sha256_file(path(rel)), std::filesystem::file_size(path(rel)), std::nullopt, {}};
        std::lock_guard lock(mutex_);
        artifacts_.push_back(std::move(a));
    }
    void record(Artifact a) {
        std::lock_guard lock(mutex_);
        artifacts_.push_back(std::move(a));
    }

    void write_text(const std::string& rel, const std::string& text) {
        microforge::detail::write_text(path(rel), text);
        record(rel);
    }
    void write_json(const std::string& rel, const json& j) { write_text(rel, j.dump(2) + "\n"); }

    template <class T>
    void write_volume(const std::string& rel_raw, const Volume<T>& v) {
        const std::string rel_json = rel_raw.substr(0, rel_raw.size() - 4) + ".json";
        if constexpr (std::is_same_v<T, std::uint8_t>)
            write_mask(v, path(rel_raw));
        else
            microforge::write_volume(v, path(rel_raw), path(rel_json));
        record(rel_raw);
        record(rel_json);
    }

    /// Export slices into subdirectory `rel_dir` and record every file.
    template <class T>
    void write_slices(const std::string& rel_dir, const Volume<T>& v, const SliceExportOptions& opts) {
        const std::size_t n = export_slices(v, Axis::z, path(rel_dir), opts);
        for (std::size_t k = 0; k < n; ++k) {
            char name[64];
            std::snprintf(name, sizeof name, "%s_z_%04zu.png", opts.prefix.c_str(), k);
            record(rel_dir + "/" + name);
        }
    }

    std::vector<Artifact> artifacts() const {
        std::vector<Artifact> a = artifacts_;
        std::sort(a.begin(), a.end(), [](const Artifact& x, const Artifact& y) { return x.path < y.path; });
        return a;
    }

private:
    std::filesystem::path root_;
    std::mutex mutex_;
    std::vector<Artifact> artifacts_;
};

inline std::string replicate_tag(const std::string& task, std::int64_t r) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_r%03lld", task.c_str(), static_cast<long long>(r));
    return buf;
}

inline json provenance(const JobConfig& cfg, std::int64_t replicate, const json& params) {
    return {{"tool", "microforge"},
            {"version", tool_version},
            {"task", cfg.task},
            {"seed", cfg.seed},
            {"replicate", replicate},
            {"stream_id", replicate},
            {"params", params}};
}

inline std::string thickness_csv(const ThicknessStats& st) {
    std::ostringstream s;
    s << "thickness_lo,thickness_hi,count\n";
    for (std::size_t k = 0; k < st.histogram.size(); ++k) s << k << ',' << k + 1 << ',' << st.histogram[k] << '\n';
    return s.str();
}

inline json thickness_json(const ThicknessStats& st) {
    return {{"samples", st.samples}, {"mean", st.mean}, {"min", st.min}, {"max", st.max}};
}

inline json scores_json(const SegScores& s) {
    return {{"dice", s.dice}, {"precision", s.precision}, {"recall", s.recall},
            {"tp", s.tp},     {"fp", s.fp},               {"fn", s.fn},         {"tn", s.tn}};
}

/// Voxel count the job will allocate per volume, read from sidecars where needed.
inline std::int64_t estimate_voxels(const JobConfig& cfg) {
    const json& r = cfg.resolved;
    auto sidecar_dims = [&](const std::string& p) {
        return read_metadata(sidecar_path(cfg.input_path(p))).dims.size();
    };
    if (cfg.task == "crack" || cfg.task == "pipeline") {
        const CrackJob c = parse_crack(r["crack"]);
        return c.background_path ? sidecar_dims(*c.background_path) : c.dims.size();
    }
    if (cfg.task == "boolean") return parse_boolean(r["boolean"]).dims.size();
    if (cfg.task == "sem") {
        const SemJob s = parse_sem(r["sem"]);
        return s.solid_mask ? sidecar_dims(*s.solid_mask) : parse_boolean(r["boolean"]).dims.size();
    }
    if (cfg.task == "milling") {
        const MillingJob m = parse_milling(r["milling"]);
        return m.cfg.nx() * m.cfg.ny();
    }
    if (cfg.task == "segment") return sidecar_dims(*parse_segment(r["segment"]).input);
    return sidecar_dims(parse_eval(r["eval"]).truth);
}

namespace detail {

template <class F>
auto stage(const char* tag, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const IoError&) {
        throw;
    } catch (const std::filesystem::filesystem_error& e) {
        throw IoError(std::string("[") + tag + "] " + e.what());
    } catch (const std::exception& e) {
        throw GenerationError(std::string("[") + tag + "] " + e.what());
    }
}

inline std::optional<GrayVolume> load_background(const JobConfig& cfg, const CrackJob& c) {
    if (!c.background_path) return std::nullopt;
    return to_gray(read_volume(cfg.input_path(*c.background_path)));
}

inline void run_crack(const JobConfig& cfg, OutputDir& out) {
    const CrackJob c = parse_crack(cfg.resolved["crack"]);
    const auto bg = load_background(cfg, c);
    parallel_for(0, cfg.replicates, [&](std::int64_t r) {
        const RandomStream rng(cfg.seed, static_cast<std::uint64_t>(r));
        const std::string tag = replicate_tag("crack", r);
        const GeneratedCrack g = stage("generate", [&] { return generate_crack(c, rng, bg ? &*bg : nullptr); });
        out.write_volume(tag + "_volume.raw", g.volume);
        out.write_volume(tag + "_mask.raw", g.mask);
        json info = g.info;
        if (count_foreground(g.mask) > 0) {
            const ThicknessStats st = thickness_stats(g.mask);
            out.write_text(tag + "_thickness.csv", thickness_csv(st));
            info["thickness"] = thickness_json(st);
        }
        if (c.export_slices) {
            out.write_slices(tag + "_slices", g.volume, {8, GrayWindow{0.0, 1.0}, "volume"});
            out.write_slices(tag + "_slices", g.mask, {8, std::nullopt, "mask"});
        }
        json prov = provenance(cfg, r, cfg.resolved["crack"]);
        prov["derived"] = info;
        prov["ground_truth"] = "mask before partial-volume smoothing";
        out.write_json(tag + "_provenance.json", prov);
    });
}

inline GrainList generate_grains(const BooleanJob& b, const RandomStream& rng) {
    const Box window{{0, 0, 0}, {b.dims.nx * b.spacing[0], b.dims.ny * b.spacing[1], b.dims.nz * b.spacing[2]}};
    const double lambda = b.germ_intensity();
    if (!b.cox) return sample_boolean(b.spec, lambda, window, rng.substream(grains));
    MaternParams m;
    m.mean_points_per_cluster = b.mean_points_per_cluster;
    m.cluster_radius = b.cluster_radius;
    m.parent_intensity = lambda / b.mean_points_per_cluster;
    return sample_cox_boolean_spheres(m, b.spec.radius, window, rng.substream(grains));
}

inline void run_boolean(const JobConfig& cfg, OutputDir& out) {
    const BooleanJob b = parse_boolean(cfg.resolved["boolean"]);
    parallel_for(0, cfg.replicates, [&](std::int64_t r) {
        const RandomStream rng(cfg.seed, static_cast<std::uint64_t>(r));
        const std::string tag = replicate_tag("boolean", r);
        const GrainList g = stage("generate", [&] { return generate_grains(b, rng); });
        const LabelMask m = stage("voxelize", [&] { return voxelize_grains(g, b.dims, b.spacing); });
        out.write_volume(tag + "_mask.raw", m);
        out.write_text(tag + "_grains.csv", grains_to_csv(g));
        json prov = provenance(cfg, r, cfg.resolved["boolean"]);
        prov["derived"] = {{"intensity_per_um3", b.germ_intensity()},
                           {"grains", g.size()},
                           {"expected_grain_volume_um3", b.spec.expected_volume()},
                           {"boolean_coverage", boolean_coverage(b.spec, b.germ_intensity())},
                           {"volume_fraction", double(count_foreground(m)) / double(m.size())}};
        out.write_json(tag + "_provenance.json", prov);
    });
}

inline void run_sem(const JobConfig& cfg, OutputDir& out) {
    const SemJob s = parse_sem(cfg.resolved["sem"]);
    std::optional<LabelMask> given;
    if (s.solid_mask) given = read_mask(cfg.input_path(*s.solid_mask));
    std::optional<PngImage> reference;
    if (s.match_histogram) reference = read_png_gray(cfg.input_path(*s.match_histogram));
    parallel_for(0, cfg.replicates, [&](std::int64_t r) {
        const RandomStream rng(cfg.seed, static_cast<std::uint64_t>(r));
        const std::string tag = replicate_tag("sem", r);
        LabelMask solid = given ? *given : stage("generate", [&] {
            const BooleanJob b = parse_boolean(cfg.resolved["boolean"]);
            return voxelize_grains(generate_grains(b, rng), b.dims, b.spacing);
        });
        SemStack st = stage("simulate", [&] { return simulate_sem_stack(solid, s.cfg, rng.substream(noise)); });
        if (reference) st.images = stage("match_histogram", [&] { return match_histogram(st.images, *reference); });
        out.write_slices(tag, st.images, {8, GrayWindow{0.0, 1.0}, "sem"});
        out.write_slices(tag, st.masks, {8, std::nullopt, "mask"});
        json prov = provenance(cfg, r, cfg.resolved["sem"]);
        prov["derived"] = {{"slices", st.planes.size()},
                           {"planes", st.planes},
                           {"solid_source", given ? "mask file" : "boolean model"},
                           {"histogram_matched", reference.has_value()}};
        if (!given) prov["boolean"] = cfg.resolved["boolean"];
        prov["model_note"] =
            "shine-through is an exponential depth-attenuation proxy with gradient edge brightening, not an "
            "electron-matter interaction simulation; intensities are not calibrated to a detector";
        out.write_json(tag + "_provenance.json", prov);
    });
}

inline void run_milling(const JobConfig& cfg, OutputDir& out) {
    const MillingJob m = parse_milling(cfg.resolved["milling"]);
    const ToolPath path = generate_tool_path(m.cfg);
    parallel_for(0, cfg.replicates, [&](std::int64_t r) {
        const RandomStream rng(cfg.seed, static_cast<std::uint64_t>(r));
        const std::string tag = replicate_tag("milling", r);
        const HeightMap hm = stage("imprint", [&] { return imprint_rings(path, m.cfg, rng.substream(1)); });
        out.write_volume(tag + "_height.raw", hm.to_volume());
        write_png(colorize_heights(hm), out.path(tag + "_height.png"));
        out.record(tag + "_height.png");
        write_image_png(shade_preview(hm, m.light, m.view), out.path(tag + "_preview.png"));
        out.record(tag + "_preview.png");
        std::ostringstream csv;
        csv.precision(10);
        csv << "x_um,y_um,feed_dx,feed_dy\n";
        for (const auto& p : path.points) csv << p.x << ',' << p.y << ',' << p.dx << ',' << p.dy << '\n';
        out.write_text(tag + "_path.csv", csv.str());
        const auto [mn, mx] = std::minmax_element(hm.heights.begin(), hm.heights.end());
        json prov = provenance(cfg, r, cfg.resolved["milling"]);
        prov["derived"] = {{"rings", path.points.size()},
                           {"rows", path.rows},
                           {"feed_per_rev_um", m.cfg.feed_per_rev_um()},
                           {"grid", {hm.nx, hm.ny}},
                           {"height_min_um", *mn},
                           {"height_max_um", *mx},
                           {"colormap", "blue-cyan-green-yellow-red, min to max height"}};
        prov["warnings"] = path.warnings;
        prov["calibrated"] = false;
        prov["calibration_note"] = "machining defaults are placeholders, not fitted to a real process";
        out.write_json(tag + "_provenance.json", prov);
    });
}

inline void run_segment(const JobConfig& cfg, OutputDir& out) {
    const SegmentJob s = parse_segment(cfg.resolved["segment"]);
    const GrayVolume v = to_gray(read_volume(cfg.input_path(*s.input)));
    const LabelMask m = stage("segment", [&] { return filter::segment_cracks(v, s.params); });
    out.write_volume("segment_mask.raw", m);
    json prov = provenance(cfg, 0, cfg.resolved["segment"]);
    prov["derived"] = {{"mask_voxels", count_foreground(m)}};
    out.write_json("segment_params.json", prov);
}

inline void run_eval(const JobConfig& cfg, OutputDir& out) {
    const EvalJob e = parse_eval(cfg.resolved["eval"]);
    const LabelMask seg = read_mask(cfg.input_path(e.segmentation));
    const LabelMask truth = read_mask(cfg.input_path(e.truth));
    const SegScores s = stage("score", [&] { return dice(seg, truth); });
    std::ostringstream csv;
    csv.precision(17);
    csv << "dice,precision,recall,tp,fp,fn,tn\n"
        << s.dice << ',' << s.precision << ',' << s.recall << ',' << s.tp << ',' << s.fp << ',' << s.fn << ',' << s.tn << '\n';
    out.write_text("eval_scores.csv", csv.str());
    json summary = {{"scores", scores_json(s)}};
    if (e.thickness) {
        if (count_foreground(truth) > 0) summary["truth_thickness"] = thickness_json(thickness_stats(truth));
        if (count_foreground(seg) > 0) summary["segmentation_thickness"] = thickness_json(thickness_stats(seg));
    }
    out.write_json("eval_summary.json", summary);
}

/// CSV text with the given column blanked, for hashing without run-dependent values.
inline std::string blank_column(const std::string& csv, std::size_t column) {
    std::istringstream in(csv);
    std::ostringstream outs;
    std::string line;
    while (std::getline(in, line)) {
        std::size_t start = 0;
        for (std::size_t k = 0; k < column && start != std::string::npos; ++k) {
            start = line.find(',', start);
            if (start != std::string::npos) ++start;
        }
        if (start != std::string::npos) {
            const std::size_t end = line.find(',', start);
            line.erase(start, end == std::string::npos ? std::string::npos : end - start);
        }
        outs << line << '\n';
    }
    return outs.str();
}

inline void run_pipeline(const JobConfig& cfg, OutputDir& out) {
    const CrackJob c = parse_crack(cfg.resolved["crack"]);
    const SegmentJob s = parse_segment(cfg.resolved["segment"]);
    const auto bg = load_background(cfg, c);
    const std::string method = cfg.resolved["segment"]["method"].get<std::string>();
    const std::string model = c.brownian ? "brownian" : cfg.resolved["crack"]["germs"]["model"].get<std::string>();
    std::vector<std::string> rows(static_cast<std::size_t>(cfg.replicates));
    parallel_for(0, cfg.replicates, [&](std::int64_t r) {
        const auto t0 = std::chrono::steady_clock::now();
        const RandomStream rng(cfg.seed, static_cast<std::uint64_t>(r));
        const std::string tag = replicate_tag("pipeline", r);
        const GeneratedCrack g = stage("generate", [&] { return generate_crack(c, rng, bg ? &*bg : nullptr); });
        const LabelMask seg = stage("segment", [&] { return s.oracle ? g.mask : filter::segment_cracks(g.volume, s.params); });
        const SegScores sc = stage("score", [&] { return dice(seg, g.mask); });
        const double runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.write_volume(tag + "_volume.raw", g.volume);
        out.write_volume(tag + "_mask.raw", g.mask);
        out.write_volume(tag + "_segmentation.raw", seg);
        json prov = provenance(cfg, r, {{"crack", cfg.resolved["crack"]}, {"segment", cfg.resolved["segment"]}});
        prov["derived"] = g.info;
        prov["scores"] = scores_json(sc);
        out.write_json(tag + "_provenance.json", prov);
        std::ostringstream row;
        row.precision(10);
        row << r << ',' << cfg.seed << ',' << r << ',' << model << ',' << c.width_mode << ',' << method << ',' << sc.dice
            << ',' << sc.precision << ',' << sc.recall << ',' << runtime;
        rows[static_cast<std::size_t>(r)] = row.str();
    });
    std::string csv = "replicate,seed,stream_id,germ_model,width_mode,method,dice,precision,recall,runtime_s\n";
    for (const auto& row : rows) csv += row + "\n";
    microforge::detail::write_text(out.path("scores.csv"), csv);
    Artifact a{"scores.csv", sha256_hex(csv), csv.size(), sha256_hex(blank_column(csv, 9)), {"runtime_s"}};
    out.record(std::move(a));
}

}  // namespace detail

/// Hash over the run-independent content of all artifacts.
inline std::string content_hash(const std::vector<Artifact>& artifacts) {
    Sha256 h;
    for (const auto& a : artifacts) {
        h.update(a.path);
        h.update("\t");
        h.update(a.sha256_stable ? *a.sha256_stable : a.sha256);
        h.update("\n");
    }
    return h.hex();
}

/// Execute a resolved job: write every artifact under the output directory
/// and return the manifest (also written as manifest.json). Replicate i
/// uses stream (seed, i).
inline json run_job(const JobConfig& cfg) {
    const std::int64_t voxels = estimate_voxels(cfg);
    if (voxels > voxel_guard && !cfg.force_large)
        throw ConfigError("job needs " + std::to_string(voxels) + " voxels per volume, above the 1e9 guard; pass --force-large");
    OutputDir out(cfg.output_dir);
    if (cfg.task == "crack")
        detail::run_crack(cfg, out);
    else if (cfg.task == "boolean")
        detail::run_boolean(cfg, out);
    else if (cfg.task == "sem")
        detail::run_sem(cfg, out);
    else if (cfg.task == "milling")
        detail::run_milling(cfg, out);
    else if (cfg.task == "segment")
        detail::run_segment(cfg, out);
    else if (cfg.task == "eval")
        detail::run_eval(cfg, out);
    else
        detail::run_pipeline(cfg, out);

    const auto artifacts = out.artifacts();
    json list = json::array();
    for (const auto& a : artifacts) {
        json e = {{"path", a.path}, {"sha256", a.sha256}, {"bytes", a.bytes}};
        if (a.sha256_stable) {
            e["sha256_stable"] = *a.sha256_stable;
            e["nondeterministic_columns"] = a.nondeterministic_columns;
        }
        list.push_back(std::move(e));
    }
    json manifest = {{"tool", "microforge"},
                     {"version", tool_version},
                     {"manifest_schema", 1},
                     {"task", cfg.task},
                     {"seed", cfg.seed},
                     {"replicates", cfg.replicates},
                     {"config", cfg.resolved},
                     {"artifacts", list},
                     {"content_hash", content_hash(artifacts)}};
    microforge::detail::write_text(out.path("manifest.json"), manifest.dump(2) + "\n");
    return manifest;
}

/// Read a JSON config file, resolve it and run it.
inline json run_job(const std::filesystem::path& config_path, const Overrides& o = {}) {
    json user;
    try {
        user = json::parse(microforge::detail::read_text(config_path));
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + config_path.string() + "' is not valid JSON: " + e.what());
    }
    return run_job(resolve_config(user, o, config_path.parent_path().empty() ? "." : config_path.parent_path()));
}

}  // namespace microforge::job
