#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "microforge/boolean_model.hpp"
#include "microforge/core/distribution.hpp"
#include "microforge/core/error.hpp"
#include "microforge/core/geometry.hpp"
#include "microforge/core/volume.hpp"
#include "microforge/crack.hpp"
#include "microforge/filter/crackness.hpp"
#include "microforge/milling.hpp"
#include "microforge/sem.hpp"

namespace microforge::job {

using nlohmann::json;

inline const std::vector<std::string>& task_names() {
    static const std::vector<std::string> names{"crack", "sem", "boolean", "milling", "segment", "eval", "pipeline"};
    return names;
}

/// Every accepted key with its default. A null default marks an optional
/// value (a path, or a quantity derived from other fields when absent).
inline json default_config() {
    const json size_dist = {{"kind", "constant"}, {"value", 6.0}, {"min", 4.0}, {"max", 8.0}, {"mu", 1.8}, {"sigma", 0.2}};
    return {
        {"task", nullptr},
        {"seed", 0},
        {"replicates", 1},
        {"output_dir", "out"},
        {"force_large", false},
        {"crack",
         {{"dims", {128, 128, 128}},
          {"spacing_um", {1.0, 1.0, 1.0}},
          {"surface", "min_cut"},
          {"axis", "z"},
          {"germs",
           {{"model", "poisson"},
            {"target_cells", 300.0},
            {"intensity", nullptr},
            {"mean_points_per_cluster", 8.0},
            {"cluster_radius_fraction", 0.1},
            {"packing_fraction", 0.3},
            {"stretch", {2.0, 1.0, 2.0}}}},
          {"brownian", {{"hurst", 0.5}, {"amplitude_vox", 4.0}}},
          {"width",
           {{"mode", "random_walk"}, {"w0", 3}, {"p", 0.01}, {"w_min", 1}, {"w_max", 10}, {"scales", {1, 20}}}},
          {"union_axes", json::array()},
          {"background", {{"path", nullptr}, {"mean", 0.7}, {"noise_sigma", 0.03}}},
          {"air_threshold", 0.3},
          {"gray_model", {{"kind", "auto"}, {"mean", 0.15}, {"stddev", 0.03}}},
          {"pv_sigma_vox", 0.7},
          {"export_slices", false}}},
        {"boolean",
         {{"dims", {128, 128, 128}},
          {"spacing_um", {1.0, 1.0, 1.0}},
          {"model", "boolean"},
          {"shape", "sphere"},
          {"radius", size_dist},
          {"height", {{"kind", "constant"}, {"value", 30.0}, {"min", 20.0}, {"max", 40.0}, {"mu", 3.4}, {"sigma", 0.2}}},
          {"edge", {{"kind", "constant"}, {"value", 10.0}, {"min", 8.0}, {"max", 12.0}, {"mu", 2.3}, {"sigma", 0.2}}},
          {"orientation", "isotropic"},
          {"intensity", nullptr},
          {"target_fraction", 0.3},
          {"mean_points_per_cluster", 10.0},
          {"cluster_radius", 20.0}}},
        {"sem",
         {{"solid_mask", nullptr},
          {"slice_thickness_vox", 1},
          {"attenuation_depth_vox", 10.0},
          {"solid_intensity", 0.8},
          {"background_intensity", 0.1},
          {"noise_sigma", 0.03},
          {"poisson_scale", 0.0},
          {"edge_gain", 0.2},
          {"match_histogram", nullptr}}},
        {"milling",
         {{"head_diameter_mm", 16.0},
          {"tilt_deg", 0.05},
          {"blade_width_um", 40.0},
          {"feed_rate_mm_per_min", 300.0},
          {"spindle_speed_rpm", 6000.0},
          {"lateral_cutting_depth_mm", 1.0},
          {"path", "parallel"},
          {"surface_w_mm", 10.24},
          {"surface_h_mm", 10.24},
          {"grid_resolution_um", 10.0},
          {"depth_scale_um", 4.0},
          {"depth_jitter_sigma", 0.1},
          {"radius_jitter_um", 2.0},
          {"max_cut_depth_um", 50.0},
          {"light_direction", {-0.4, -0.4, 0.8}},
          {"preview_gain", 1.0},
          {"preview_gamma", 1.0}}},
        {"segment",
         {{"input", nullptr},
          {"method", "hessian"},
          {"sigma", 1.0},
          {"planarity_threshold", 0.5},
          {"grow_threshold", 0.2},
          {"min_component_vox", 64},
          {"n_scales", 1},
          {"alpha", 0.5},
          {"beta", 2.0},
          {"contrast", 0.05}}},
        {"eval", {{"segmentation", nullptr}, {"truth", nullptr}, {"thickness", true}}},
    };
}

namespace detail {

inline std::string kind_of(const json& v) {
    if (v.is_null()) return "null";
    if (v.is_boolean()) return "boolean";
    if (v.is_number()) return "number";
    if (v.is_string()) return "string";
    if (v.is_array()) return "array";
    return "object";
}

/// Overlay `user` onto `defaults`: unknown keys and type changes are schema violations.
inline void merge_into(json& defaults, const json& user, const std::string& where) {
    if (!user.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, value] : user.items()) {
        const std::string path = where.empty() ? key : where + "." + key;
        if (!defaults.contains(key)) throw ConfigError("unknown key '" + path + "'");
        json& slot = defaults[key];
        if (slot.is_object()) {
            merge_into(slot, value, path);
        } else if (slot.is_null()) {
            if (!value.is_null() && !value.is_number() && !value.is_string())
                throw ConfigError("'" + path + "' must be a number, string or null");
            slot = value;
        } else {
            if (kind_of(slot) != kind_of(value))
                throw ConfigError("'" + path + "' must be of type " + kind_of(slot) + ", got " + kind_of(value));
            if (slot.is_number_integer() && !value.is_number_integer())
                throw ConfigError("'" + path + "' must be an integer");
            slot = value;
        }
    }
}

template <class T>
T get(const json& j, const char* key, const std::string& where) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("'" + where + "." + key + "': " + e.what());
    }
}

inline Dims get_dims(const json& j, const std::string& where) {
    const auto v = get<std::vector<std::int64_t>>(j, "dims", where);
    if (v.size() != 3 || v[0] <= 0 || v[1] <= 0 || v[2] <= 0)
        throw ConfigError("'" + where + ".dims' must hold three positive integers");
    return {v[0], v[1], v[2]};
}

inline Spacing get_spacing(const json& j, const std::string& where) {
    const auto v = get<std::vector<double>>(j, "spacing_um", where);
    if (v.size() != 3 || !(v[0] > 0.0 && v[1] > 0.0 && v[2] > 0.0))
        throw ConfigError("'" + where + ".spacing_um' must hold three positive numbers");
    return {v[0], v[1], v[2]};
}

inline std::optional<std::string> get_path(const json& j, const char* key, const std::string& where) {
    const json& v = j.at(key);
    if (v.is_null()) return std::nullopt;
    if (!v.is_string() || v.get<std::string>().empty()) throw ConfigError("'" + where + "." + key + "' must be a path");
    return v.get<std::string>();
}

inline std::optional<double> get_optional_number(const json& j, const char* key, const std::string& where) {
    const json& v = j.at(key);
    if (v.is_null()) return std::nullopt;
    if (!v.is_number()) throw ConfigError("'" + where + "." + key + "' must be a number or null");
    return v.get<double>();
}

inline Axis get_axis(const std::string& s, const std::string& where) {
    if (s.size() != 1 || (s[0] != 'x' && s[0] != 'y' && s[0] != 'z'))
        throw ConfigError("'" + where + "' must be one of x, y, z");
    return parse_axis(s[0]);
}

inline SizeDistribution get_size_dist(const json& j, const std::string& where) {
    const auto kind = get<std::string>(j, "kind", where);
    SizeDistribution d;
    if (kind == "constant")
        d = SizeDistribution::constant(get<double>(j, "value", where));
    else if (kind == "uniform")
        d = SizeDistribution::uniform(get<double>(j, "min", where), get<double>(j, "max", where));
    else if (kind == "lognormal")
        d = SizeDistribution::lognormal(get<double>(j, "mu", where), get<double>(j, "sigma", where), get<double>(j, "max", where));
    else
        throw ConfigError("'" + where + ".kind' must be constant, uniform or lognormal");
    try {
        d.validate(where);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return d;
}

/// Run a validate() that throws invalid_argument, reporting it as a schema violation.
template <class F>
void check(F&& f) {
    try {
        f();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

}  // namespace detail

enum class GermModel { poisson, matern, packing, stretched };

struct CrackJob {
    Dims dims{128, 128, 128};
    Spacing spacing{1.0, 1.0, 1.0};
    bool brownian = false;
    Axis axis = Axis::z;
    GermModel germs = GermModel::poisson;
    double target_cells = 300.0;
    std::optional<double> intensity;
    double mean_points_per_cluster = 8.0;
    double cluster_radius_fraction = 0.1;
    double packing_fraction = 0.3;
    Vec3 stretch{2.0, 1.0, 2.0};
    double hurst = 0.5;
    double amplitude_vox = 4.0;
    std::string width_mode = "random_walk";
    WidthWalkParams walk;
    std::vector<int> scales{1, 20};
    std::vector<Axis> union_axes;
    std::optional<std::string> background_path;
    double background_mean = 0.7;
    double background_noise = 0.03;
    double air_threshold = 0.3;
    std::string gray_kind = "auto";
    double gray_mean = 0.15;
    double gray_stddev = 0.03;
    double pv_sigma_vox = 0.7;
    bool export_slices = false;
};

inline CrackJob parse_crack(const json& j) {
    const std::string w = "crack";
    CrackJob c;
    c.dims = detail::get_dims(j, w);
    c.spacing = detail::get_spacing(j, w);
    const auto surface = detail::get<std::string>(j, "surface", w);
    if (surface != "min_cut" && surface != "brownian") throw ConfigError("'crack.surface' must be min_cut or brownian");
    c.brownian = surface == "brownian";
    c.axis = detail::get_axis(detail::get<std::string>(j, "axis", w), w + ".axis");

    const json& g = j.at("germs");
    const auto model = detail::get<std::string>(g, "model", w + ".germs");
    if (model == "poisson")
        c.germs = GermModel::poisson;
    else if (model == "matern")
        c.germs = GermModel::matern;
    else if (model == "packing")
        c.germs = GermModel::packing;
    else if (model == "stretched")
        c.germs = GermModel::stretched;
    else
        throw ConfigError("'crack.germs.model' must be poisson, matern, packing or stretched");
    c.target_cells = detail::get<double>(g, "target_cells", w + ".germs");
    c.intensity = detail::get_optional_number(g, "intensity", w + ".germs");
    c.mean_points_per_cluster = detail::get<double>(g, "mean_points_per_cluster", w + ".germs");
    c.cluster_radius_fraction = detail::get<double>(g, "cluster_radius_fraction", w + ".germs");
    c.packing_fraction = detail::get<double>(g, "packing_fraction", w + ".germs");
    const auto st = detail::get<std::vector<double>>(g, "stretch", w + ".germs");
    if (st.size() != 3 || !(st[0] > 0 && st[1] > 0 && st[2] > 0))
        throw ConfigError("'crack.germs.stretch' must hold three positive factors");
    c.stretch = {st[0], st[1], st[2]};
    if (!(c.target_cells >= 2.0)) throw ConfigError("'crack.germs.target_cells' must be >= 2");
    if (c.intensity && !(*c.intensity > 0.0)) throw ConfigError("'crack.germs.intensity' must be > 0");
    if (!(c.mean_points_per_cluster > 0.0) || !(c.cluster_radius_fraction > 0.0))
        throw ConfigError("Matern cluster parameters must be > 0");
    if (!(c.packing_fraction > 0.0 && c.packing_fraction <= 0.6))
        throw ConfigError("'crack.germs.packing_fraction' must lie in (0, 0.6]");

    const json& b = j.at("brownian");
    c.hurst = detail::get<double>(b, "hurst", w + ".brownian");
    c.amplitude_vox = detail::get<double>(b, "amplitude_vox", w + ".brownian");
    if (!(c.hurst > 0.0 && c.hurst < 1.0)) throw ConfigError("'crack.brownian.hurst' must lie in (0, 1)");
    if (!(c.amplitude_vox >= 0.0)) throw ConfigError("'crack.brownian.amplitude_vox' must be >= 0");

    const json& wd = j.at("width");
    c.width_mode = detail::get<std::string>(wd, "mode", w + ".width");
    if (c.width_mode != "constant" && c.width_mode != "random_walk" && c.width_mode != "multiscale")
        throw ConfigError("'crack.width.mode' must be constant, random_walk or multiscale");
    c.walk.w0 = detail::get<int>(wd, "w0", w + ".width");
    c.walk.p = detail::get<double>(wd, "p", w + ".width");
    c.walk.w_min = detail::get<int>(wd, "w_min", w + ".width");
    c.walk.w_max = detail::get<int>(wd, "w_max", w + ".width");
    c.scales = detail::get<std::vector<int>>(wd, "scales", w + ".width");
    detail::check([&] { c.walk.validate(); });
    if (c.scales.empty()) throw ConfigError("'crack.width.scales' must not be empty");
    for (int s : c.scales)
        if (s < 1) throw ConfigError("'crack.width.scales' entries must be >= 1");

    for (const auto& a : detail::get<std::vector<std::string>>(j, "union_axes", w))
        c.union_axes.push_back(detail::get_axis(a, w + ".union_axes"));

    const json& bg = j.at("background");
    c.background_path = detail::get_path(bg, "path", w + ".background");
    c.background_mean = detail::get<double>(bg, "mean", w + ".background");
    c.background_noise = detail::get<double>(bg, "noise_sigma", w + ".background");
    if (!(c.background_noise >= 0.0)) throw ConfigError("'crack.background.noise_sigma' must be >= 0");
    c.air_threshold = detail::get<double>(j, "air_threshold", w);

    const json& gm = j.at("gray_model");
    c.gray_kind = detail::get<std::string>(gm, "kind", w + ".gray_model");
    if (c.gray_kind != "auto" && c.gray_kind != "gaussian" && c.gray_kind != "empirical")
        throw ConfigError("'crack.gray_model.kind' must be auto, gaussian or empirical");
    c.gray_mean = detail::get<double>(gm, "mean", w + ".gray_model");
    c.gray_stddev = detail::get<double>(gm, "stddev", w + ".gray_model");
    if (!(c.gray_stddev >= 0.0)) throw ConfigError("'crack.gray_model.stddev' must be >= 0");
    if (c.gray_kind == "empirical" && !c.background_path)
        throw ConfigError("an empirical gray model needs 'crack.background.path'");
    c.pv_sigma_vox = detail::get<double>(j, "pv_sigma_vox", w);
    if (!(c.pv_sigma_vox >= 0.0)) throw ConfigError("'crack.pv_sigma_vox' must be >= 0");
    c.export_slices = detail::get<bool>(j, "export_slices", w);

    if (c.brownian && (c.dims.nx < 8 || c.dims.ny < 8 || c.dims.nz < 8))
        throw ConfigError("Brownian cracks need dims >= 8 on every axis");
    return c;
}

struct BooleanJob {
    Dims dims{128, 128, 128};
    Spacing spacing{1.0, 1.0, 1.0};
    bool cox = false;
    GrainSpec spec;
    std::optional<double> intensity;
    double target_fraction = 0.3;
    double mean_points_per_cluster = 10.0;
    double cluster_radius = 20.0;

    /// Germ intensity per µm^3 (for cox: offspring intensity).
    double germ_intensity() const { return intensity ? *intensity : intensity_for_coverage(spec, target_fraction); }
};

inline BooleanJob parse_boolean(const json& j) {
    const std::string w = "boolean";
    BooleanJob b;
    b.dims = detail::get_dims(j, w);
    b.spacing = detail::get_spacing(j, w);
    const auto model = detail::get<std::string>(j, "model", w);
    if (model != "boolean" && model != "cox") throw ConfigError("'boolean.model' must be boolean or cox");
    b.cox = model == "cox";
    detail::check([&] { b.spec.shape = parse_shape(detail::get<std::string>(j, "shape", w)); });
    b.spec.radius = detail::get_size_dist(j.at("radius"), w + ".radius");
    b.spec.height = detail::get_size_dist(j.at("height"), w + ".height");
    b.spec.edge = detail::get_size_dist(j.at("edge"), w + ".edge");
    const auto orient = detail::get<std::string>(j, "orientation", w);
    if (orient != "isotropic" && orient != "fixed") throw ConfigError("'boolean.orientation' must be isotropic or fixed");
    b.spec.isotropic = orient == "isotropic";
    b.intensity = detail::get_optional_number(j, "intensity", w);
    b.target_fraction = detail::get<double>(j, "target_fraction", w);
    b.mean_points_per_cluster = detail::get<double>(j, "mean_points_per_cluster", w);
    b.cluster_radius = detail::get<double>(j, "cluster_radius", w);
    if (b.intensity && !(*b.intensity >= 0.0)) throw ConfigError("'boolean.intensity' must be >= 0");
    if (!(b.target_fraction >= 0.0 && b.target_fraction < 1.0)) throw ConfigError("'boolean.target_fraction' must lie in [0, 1)");
    if (b.cox && b.spec.shape != GrainShape::sphere) throw ConfigError("the cox model uses spheres only");
    if (!(b.mean_points_per_cluster > 0.0) || !(b.cluster_radius >= 0.0))
        throw ConfigError("'boolean' cluster parameters must be positive");
    return b;
}

struct SemJob {
    std::optional<std::string> solid_mask;
    SemConfig cfg;
    std::optional<std::string> match_histogram;
};

inline SemJob parse_sem(const json& j) {
    const std::string w = "sem";
    SemJob s;
    s.solid_mask = detail::get_path(j, "solid_mask", w);
    s.match_histogram = detail::get_path(j, "match_histogram", w);
    s.cfg.slice_thickness_vox = detail::get<int>(j, "slice_thickness_vox", w);
    s.cfg.attenuation_depth_vox = detail::get<double>(j, "attenuation_depth_vox", w);
    s.cfg.solid_intensity = detail::get<double>(j, "solid_intensity", w);
    s.cfg.background_intensity = detail::get<double>(j, "background_intensity", w);
    s.cfg.noise_sigma = detail::get<double>(j, "noise_sigma", w);
    s.cfg.poisson_scale = detail::get<double>(j, "poisson_scale", w);
    s.cfg.edge_gain = detail::get<double>(j, "edge_gain", w);
    detail::check([&] { s.cfg.validate(); });
    return s;
}

struct MillingJob {
    MillingConfig cfg;
    Vec3 light{0.0, 0.0, 1.0};
    ShadeParams view;
};

inline MillingJob parse_milling(const json& j) {
    const std::string w = "milling";
    MillingJob m;
    auto& c = m.cfg;
    c.head_diameter_mm = detail::get<double>(j, "head_diameter_mm", w);
    c.tilt_deg = detail::get<double>(j, "tilt_deg", w);
    c.blade_width_um = detail::get<double>(j, "blade_width_um", w);
    c.feed_rate_mm_per_min = detail::get<double>(j, "feed_rate_mm_per_min", w);
    c.spindle_speed_rpm = detail::get<double>(j, "spindle_speed_rpm", w);
    c.lateral_cutting_depth_mm = detail::get<double>(j, "lateral_cutting_depth_mm", w);
    detail::check([&] { c.path = parse_milling_path(detail::get<std::string>(j, "path", w)); });
    c.surface_w_mm = detail::get<double>(j, "surface_w_mm", w);
    c.surface_h_mm = detail::get<double>(j, "surface_h_mm", w);
    c.grid_resolution_um = detail::get<double>(j, "grid_resolution_um", w);
    c.depth_scale_um = detail::get<double>(j, "depth_scale_um", w);
    c.depth_jitter_sigma = detail::get<double>(j, "depth_jitter_sigma", w);
    c.radius_jitter_um = detail::get<double>(j, "radius_jitter_um", w);
    c.max_cut_depth_um = detail::get<double>(j, "max_cut_depth_um", w);
    detail::check([&] { c.validate(); });
    const auto l = detail::get<std::vector<double>>(j, "light_direction", w);
    if (l.size() != 3) throw ConfigError("'milling.light_direction' must hold three numbers");
    const Vec3 lv{l[0], l[1], l[2]};
    if (!(norm(lv) > 1e-12)) throw ConfigError("'milling.light_direction' must be non-zero");
    m.light = normalized(lv);
    m.view.gain = detail::get<double>(j, "preview_gain", w);
    m.view.gamma = detail::get<double>(j, "preview_gamma", w);
    if (!(m.view.gain > 0.0) || !(m.view.gamma > 0.0)) throw ConfigError("preview gain and gamma must be > 0");
    return m;
}

struct SegmentJob {
    std::optional<std::string> input;
    bool oracle = false;
    filter::SegmentParams params;
};

inline SegmentJob parse_segment(const json& j) {
    const std::string w = "segment";
    SegmentJob s;
    s.input = detail::get_path(j, "input", w);
    const auto method = detail::get<std::string>(j, "method", w);
    if (method == "oracle")
        s.oracle = true;
    else
        detail::check([&] { s.params.method = filter::parse_segment_method(method); });
    auto& p = s.params;
    p.percolation.smoothing_sigma_vox = detail::get<double>(j, "sigma", w);
    p.percolation.planarity_threshold = detail::get<double>(j, "planarity_threshold", w);
    p.percolation.grow_threshold = detail::get<double>(j, "grow_threshold", w);
    const auto min_comp = detail::get<std::int64_t>(j, "min_component_vox", w);
    if (min_comp < 0) throw ConfigError("'segment.min_component_vox' must be >= 0");
    p.percolation.min_component_vox = static_cast<std::size_t>(min_comp);
    p.n_scales = detail::get<int>(j, "n_scales", w);
    p.measure.alpha = detail::get<double>(j, "alpha", w);
    p.measure.beta = detail::get<double>(j, "beta", w);
    p.measure.contrast = detail::get<double>(j, "contrast", w);
    detail::check([&] {
        p.percolation.validate();
        p.measure.validate();
    });
    if (!s.oracle && p.method == filter::SegmentMethod::hessian && p.percolation.smoothing_sigma_vox < 0.5)
        throw ConfigError("'segment.sigma' must be >= 0.5 for the Hessian method");
    if (p.n_scales < 1) throw ConfigError("'segment.n_scales' must be >= 1");
    return s;
}

struct EvalJob {
    std::string segmentation;
    std::string truth;
    bool thickness = true;
};

inline EvalJob parse_eval(const json& j) {
    const std::string w = "eval";
    EvalJob e;
    const auto seg = detail::get_path(j, "segmentation", w);
    const auto truth = detail::get_path(j, "truth", w);
    if (!seg || !truth) throw ConfigError("eval needs 'eval.segmentation' and 'eval.truth' mask paths");
    e.segmentation = *seg;
    e.truth = *truth;
    e.thickness = detail::get<bool>(j, "thickness", w);
    return e;
}

/// Fully resolved job: defaults overlaid by the file, then by command-line overrides.
struct JobConfig {
    std::string task;
    std::uint64_t seed = 0;
    std::int64_t replicates = 1;
    std::filesystem::path output_dir;
    std::filesystem::path base_dir;  // relative input paths resolve against this
    bool force_large = false;
    json resolved;

    std::filesystem::path input_path(const std::string& p) const {
        const std::filesystem::path q(p);
        return q.is_absolute() ? q : base_dir / q;
    }
};

struct Overrides {
    std::optional<std::string> task;
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> output_dir;
    std::optional<bool> force_large;
    std::optional<std::string> match_histogram;
};

/// Validate and resolve a configuration document. Every violation throws ConfigError.
inline JobConfig resolve_config(const json& user, const Overrides& o = {}, const std::filesystem::path& base_dir = ".") {
    json r = default_config();
    detail::merge_into(r, user, "");
    if (o.task) {
        if (!r["task"].is_null() && r["task"] != *o.task)
            throw ConfigError("config task '" + r["task"].get<std::string>() + "' differs from requested task '" + *o.task + "'");
        r["task"] = *o.task;
    }
    if (o.seed) r["seed"] = *o.seed;
    if (o.output_dir) r["output_dir"] = o.output_dir->string();
    if (o.force_large) r["force_large"] = *o.force_large;
    if (o.match_histogram) r["sem"]["match_histogram"] = *o.match_histogram;

    JobConfig c;
    if (!r["task"].is_string()) throw ConfigError("'task' is required");
    c.task = r["task"].get<std::string>();
    if (std::find(task_names().begin(), task_names().end(), c.task) == task_names().end())
        throw ConfigError("unknown task '" + c.task + "'");
    if (!r["seed"].is_number_unsigned() && !(r["seed"].is_number_integer() && r["seed"].get<std::int64_t>() >= 0))
        throw ConfigError("'seed' must be a non-negative integer");
    c.seed = r["seed"].get<std::uint64_t>();
    c.replicates = r["replicates"].get<std::int64_t>();
    if (c.replicates < 1) throw ConfigError("'replicates' must be >= 1");
    c.output_dir = r["output_dir"].get<std::string>();
    if (c.output_dir.empty()) throw ConfigError("'output_dir' must not be empty");
    c.force_large = r["force_large"].get<bool>();
    c.base_dir = base_dir;

    // Parse every block the task uses, so violations surface before any work.
    if (c.task == "crack" || c.task == "pipeline") parse_crack(r["crack"]);
    if (c.task == "boolean") parse_boolean(r["boolean"]);
    if (c.task == "sem") {
        const auto s = parse_sem(r["sem"]);
        if (!s.solid_mask) parse_boolean(r["boolean"]);
    }
    if (c.task == "milling") parse_milling(r["milling"]);
    if (c.task == "segment" || c.task == "pipeline") {
        const auto s = parse_segment(r["segment"]);
        if (c.task == "segment" && !s.input) throw ConfigError("segment needs 'segment.input'");
        if (c.task == "segment" && s.oracle) throw ConfigError("the oracle segmenter is only available in pipelines");
    }
    if (c.task == "eval") parse_eval(r["eval"]);
    c.resolved = std::move(r);
    return c;
}

}  // namespace microforge::job
