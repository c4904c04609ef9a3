// Acceptance checks: one PASS/FAIL line per check, nonzero exit on any failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/poisson.hpp>

#include "microforge/boolean_model.hpp"
#include "microforge/crack.hpp"
#include "microforge/eval.hpp"
#include "microforge/filter/crackness.hpp"
#include "microforge/job/run.hpp"
#include "microforge/milling.hpp"
#include "microforge/sem.hpp"
#include "../support.hpp"

using namespace microforge;
namespace ts = testing_support;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Box cube(double e) { return {{0, 0, 0}, {e, e, e}}; }

job::CrackJob crack_job(std::int64_t n, const std::string& width_mode, job::GermModel germs = job::GermModel::poisson) {
    job::CrackJob c;
    c.dims = {n, n, n};
    c.germs = germs;
    c.width_mode = width_mode;
    c.walk.w0 = 3;
    c.walk.p = 0.01;
    c.walk.w_min = 1;
    c.walk.w_max = 10;
    return c;
}

// 1
Outcome min_cut_exact() {
    const auto t0 = Clock::now();
    int checked = 0, exact = 0;
    std::string worst;
    for (std::uint64_t s = 0; checked < 50; ++s) {
        const std::size_t n = 2 + s % 11;
        const auto t = build_voronoi(ts::uniform_points(n, cube(1), RandomStream(1000 + s, 0)), cube(1));
        const double oracle = ts::exhaustive_min_cut(t, Axis::z);
        if (!std::isfinite(oracle)) continue;  // some cell spans both faces; no cut exists
        const double got = min_cut_crack(t, Axis::z).weight;
        ++checked;
        if (got == oracle)
            ++exact;
        else if (worst.empty())
            worst = fmt(" first mismatch at seed %llu: %.17g vs %.17g", (unsigned long long)s, got, oracle);
    }
    const double dt = seconds_since(t0);
    return {exact == 50 && dt < 10.0, fmt("%d/50 exact, %.2f s", exact, dt) + worst};
}

// 2
Outcome separation() {
    const auto t0 = Clock::now();
    const job::GermModel models[] = {job::GermModel::poisson, job::GermModel::matern, job::GermModel::packing,
                                     job::GermModel::stretched};
    const char* modes[] = {"constant", "random_walk", "multiscale"};
    int ok = 0;
    for (int i = 0; i < 100; ++i) {
        auto c = crack_job(128, modes[i % 3], models[i % 4]);
        c.walk.w0 = 1 + (i / 12) % 4;  // constant widths 1..4
        c.scales = {1, 5};
        const auto g = job::generate_crack(c, RandomStream(2000, static_cast<std::uint64_t>(i)));
        ok += separation_check(g.mask, c.axis).separated ? 1 : 0;
    }
    const double dt = seconds_since(t0);
    return {ok == 100 && dt < 300.0, fmt("%d/100 separated, %.1f s", ok, dt)};
}

// 3
Outcome width_control() {
    double worst_mean = 3.0;
    bool means_ok = true;
    for (std::uint64_t r = 0; r < 3; ++r) {
        const auto g = job::generate_crack(crack_job(128, "constant"), RandomStream(3000, r));
        const double m = thickness_stats(g.mask).mean;
        if (!(m >= 2.5 && m <= 3.5)) means_ok = false;
        if (std::fabs(m - 3.0) > std::fabs(worst_mean - 3.0)) worst_mean = m;
    }
    auto c = crack_job(128, "multiscale");
    c.scales = {1, 20};
    const auto st = thickness_stats(job::generate_crack(c, RandomStream(3001, 0)).mask);
    const double lo = st.mode_value_in(0.0, 10.0), hi = st.mode_value_in(10.0, 40.0);
    const bool bimodal = std::fabs(lo - 1.0) <= 0.6 && std::fabs(hi - 20.0) <= 2.0;
    return {means_ok && bimodal, fmt("width-3 mean (worst of 3) %.3f; multiscale modes %.3f and %.3f", worst_mean, lo, hi)};
}

// 4
Outcome walk_frequency() {
    const auto w = bernoulli_width_walk(100000, WidthWalkParams{0.01, 1000, 1, INT_MAX}, RandomStream(4000, 0));
    std::size_t changes = 0;
    for (std::size_t k = 1; k < w.size(); ++k) changes += w[k] != w[k - 1];
    const double f = static_cast<double>(changes) / 1e5;
    return {f >= 0.015 && f <= 0.025, fmt("change frequency %.5f", f)};
}

// 5
Outcome point_laws() {
    // Poisson counts: chi-square goodness of fit against Poisson(lambda V).
    const double mean = 50.0;
    std::vector<std::size_t> counts;
    for (std::uint64_t r = 0; r < 1000; ++r)
        counts.push_back(sample_poisson(mean, cube(1), RandomStream(5000, r)).size());
    const boost::math::poisson_distribution<> law(mean);
    std::vector<std::pair<std::size_t, std::size_t>> bins;  // [lo, hi] ranges with expected >= 5
    std::size_t lo = 0;
    for (std::size_t k = 0; k < 200; ++k) {
        const double e = 1000.0 * (boost::math::cdf(law, double(k)) - (lo ? boost::math::cdf(law, double(lo) - 1) : 0.0));
        const double tail = 1000.0 * boost::math::cdf(boost::math::complement(law, double(k)));
        if (e >= 5.0 && tail >= 5.0) {
            bins.push_back({lo, k});
            lo = k + 1;
        }
    }
    bins.push_back({lo, SIZE_MAX});
    double chi = 0.0;
    for (const auto& [a, b] : bins) {
        const double pa = a ? boost::math::cdf(law, double(a) - 1) : 0.0;
        const double pb = b == SIZE_MAX ? 1.0 : boost::math::cdf(law, double(b));
        const double e = 1000.0 * (pb - pa);
        double o = 0;
        for (auto n : counts) o += n >= a && n <= b;
        chi += (o - e) * (o - e) / e;
    }
    const double pval = boost::math::cdf(boost::math::complement(boost::math::chi_squared(double(bins.size() - 1)), chi));
    const bool poisson_ok = pval > 0.01;

    // Matern cluster mean count.
    const MaternParams mp{20.0, 8.0, 0.08};
    double sum = 0.0, sum2 = 0.0;
    const int reps = 1000;
    for (int r = 0; r < reps; ++r) {
        const double n = double(sample_matern_cluster(mp, cube(1), RandomStream(5001, std::uint64_t(r))).size());
        sum += n;
        sum2 += n * n;
    }
    const double m = sum / reps, se = std::sqrt((sum2 / reps - m * m) / (reps - 1));
    const double expect = mp.parent_intensity * mp.mean_points_per_cluster;
    const bool matern_ok = std::fabs(m - expect) <= 3.0 * se;

    // Boolean spheres at 256^3.
    GrainSpec s;
    s.radius = SizeDistribution::constant(6.0);
    const double lambda = intensity_for_coverage(s, 0.3);
    const auto mask = voxelize_grains(sample_boolean(s, lambda, cube(256), RandomStream(5002, 0)), {256, 256, 256}, {1, 1, 1});
    const double frac = double(count_foreground(mask)) / double(mask.size());
    const double theory = 1.0 - std::exp(-lambda * 4.0 / 3.0 * std::numbers::pi * 216.0);
    const bool boolean_ok = std::fabs(frac - theory) < 0.01;
    return {poisson_ok && matern_ok && boolean_ok,
            fmt("Poisson chi2 %.2f on %zu dof, p = %.3f; Matern mean %.2f vs %.2f (SE %.3f); Boolean %.4f vs %.4f", chi,
                bins.size() - 1, pval, m, expect, se, frac, theory)};
}

// 6
Outcome riesz() {
    using filter::riesz1;
    using filter::riesz2;
    const filter::RieszOptions periodic{filter::RieszBoundary::periodic, 0};
    double worst_const = 0.0;
    Volume<double> c({24, 20, 18}, {1, 1, 1}, 2.5);
    auto track = [&](const Volume<double>& r) {
        for (double x : r.data()) worst_const = std::max(worst_const, std::fabs(x));
    };
    for (int j = 0; j < 3; ++j) {
        track(riesz1(c, j));
        for (int k = 0; k < 3; ++k) track(riesz2(c, j, k));
    }

    const auto f = ts::smooth_field({33, 31, 29}, 2.0, RandomStream(6000, 0));
    double mean = 0;
    for (double x : f.data()) mean += x;
    mean /= double(f.size());
    double ref = 0, energy = 0, trace_err = 0;
    for (double x : f.data()) ref += (x - mean) * (x - mean);
    std::vector<double> trace(f.size(), 0.0);
    for (int j = 0; j < 3; ++j) {
        const auto r1 = riesz1(f, j, periodic);
        for (double x : r1.data()) energy += x * x;
        const auto r = riesz2(f, j, j, periodic);
        for (std::size_t i = 0; i < f.size(); ++i) trace[i] += r[i];
    }
    for (std::size_t i = 0; i < f.size(); ++i) trace_err += (trace[i] + f[i] - mean) * (trace[i] + f[i] - mean);
    const double energy_rel = std::fabs(energy / ref - 1.0), trace_rel = std::sqrt(trace_err / ref);

    const auto g = ts::smooth_field({64, 64, 64}, 4.0, RandomStream(6001, 0));
    const auto gs = filter::downscale2(g);
    auto rel = [](const Volume<double>& a, const Volume<double>& b) {
        double num = 0, den = 0;
        const Dims d = a.dims();
        for (std::int64_t z = 4; z < d.nz - 4; ++z)
            for (std::int64_t y = 4; y < d.ny - 4; ++y)
                for (std::int64_t x = 4; x < d.nx - 4; ++x) {
                    num += (a(x, y, z) - b(x, y, z)) * (a(x, y, z) - b(x, y, z));
                    den += b(x, y, z) * b(x, y, z);
                }
        return std::sqrt(num / den);
    };
    double worst_scale = 0.0;
    for (int j = 0; j < 3; ++j) {
        worst_scale = std::max(worst_scale, rel(riesz1(gs, j), filter::downscale2(riesz1(g, j))));
        for (int k = j; k < 3; ++k) worst_scale = std::max(worst_scale, rel(riesz2(gs, j, k), filter::downscale2(riesz2(g, j, k))));
    }
    return {worst_const <= 1e-9 && energy_rel <= 1e-6 && trace_rel <= 1e-6 && worst_scale < 0.05,
            fmt("constant max %.2e; energy rel %.2e; trace rel %.2e; scale rel L2 max %.4f", worst_const, energy_rel,
                trace_rel, worst_scale)};
}

// 7
Outcome sem() {
    SemConfig c;
    c.noise_sigma = 0.0;
    // Staircase: column x is solid below z = 30 - x, so the depth to solid from plane 34 grows with x.
    LabelMask stairs({24, 3, 40});
    for (std::int64_t x = 0; x < 24; ++x)
        for (std::int64_t z = 0; z < 30 - x; ++z)
            for (std::int64_t y = 0; y < 3; ++y) stairs(x, y, z) = 1;
    int violations = 0;
    for (std::int64_t z0 = 31; z0 < 40; ++z0) {
        const auto img = sem_clean_slice(stairs, z0, c);
        for (std::int64_t x = 1; x < 24; ++x)
            for (std::int64_t y = 0; y < 3; ++y) {
                if (stairs(x, y, z0) || stairs(x - 1, y, z0)) continue;
                if (img[x + 24 * y] > img[(x - 1) + 24 * y]) ++violations;
            }
    }
    GrainSpec s;
    s.shape = GrainShape::cylinder;
    s.radius = SizeDistribution::constant(3);
    s.height = SizeDistribution::constant(14);
    const auto solid = voxelize_grains(sample_boolean(s, intensity_for_coverage(s, 0.3), cube(64), RandomStream(7000, 0)),
                                       {64, 64, 64}, {1, 1, 1});
    c.attenuation_depth_vox = 1e-6;
    const auto st = simulate_sem_stack(solid, c, RandomStream(7001, 0));
    const double thr = 0.5 * (c.solid_intensity + c.background_intensity);
    std::size_t wrong = 0;
    for (std::int64_t k = 0; k < st.images.dims().nz; ++k)
        for (std::int64_t y = 0; y < 64; ++y)
            for (std::int64_t x = 0; x < 64; ++x) wrong += (st.images(x, y, k) > thr) != (st.masks(x, y, k) != 0);
    return {violations == 0 && wrong == 0, fmt("%d monotonicity violations; %zu threshold mismatches", violations, wrong)};
}

// 8
Outcome milling() {
    MillingConfig base;
    double worst_spacing = 0.0;
    for (MillingPath kind : {MillingPath::parallel, MillingPath::spiral}) {
        MillingConfig c = base;
        c.path = kind;
        const auto p = generate_tool_path(c);
        for (std::size_t k = 1; k < p.points.size(); ++k) {
            if (kind == MillingPath::parallel && p.points[k].y != p.points[k - 1].y) continue;
            const double d = std::hypot(p.points[k].x - p.points[k - 1].x, p.points[k].y - p.points[k - 1].y);
            worst_spacing = std::max(worst_spacing, std::fabs(d - c.feed_per_rev_um()));
        }
    }
    const bool spacing_ok = worst_spacing <= base.grid_resolution_um;

    // Min-combination: re-check random cells after every block of rings.
    MillingConfig small = base;
    small.surface_w_mm = small.surface_h_mm = 2.56;
    const auto path = generate_tool_path(small);
    const RandomStream rng(8000, 0);
    HeightMap hm(small.nx(), small.ny(), small.grid_resolution_um);
    RandomStream pick(8001, 0);
    std::size_t probes = 0, violations = 0;
    const std::size_t block = std::max<std::size_t>(1, path.points.size() / 100);
    for (std::size_t k0 = 0; k0 < path.points.size(); k0 += block) {
        const HeightMap before = hm;
        for (std::size_t k = k0; k < std::min(path.points.size(), k0 + block); ++k)
            imprint_ring_rows(hm, make_ring(path.points[k], k, small, rng), small, 0, hm.ny);
        for (int j = 0; j < 100; ++j, ++probes) {
            const auto i = pick.below(hm.heights.size());
            violations += hm.heights[i] > before.heights[i];
        }
    }

    MillingConfig par = base, spi = base;
    spi.path = MillingPath::spiral;
    const double e_par = autocorrelation_eccentricity(imprint_rings(generate_tool_path(par), par, RandomStream(8002, 0)));
    const double e_spi = autocorrelation_eccentricity(imprint_rings(generate_tool_path(spi), spi, RandomStream(8002, 0)));
    return {spacing_ok && violations == 0 && probes >= 10000 && e_par > 1.5 && e_spi < 1.2,
            fmt("spacing error max %.3f um; %zu/%zu monotonicity violations; eccentricity parallel %.3f, spiral %.3f",
                worst_spacing, violations, probes, e_par, e_spi)};
}

// 9
Outcome closed_loop() {
    double worst = 1.0;
    for (std::uint64_t r = 0; r < 5; ++r) {
        const auto g = job::generate_crack(crack_job(128, "constant"), RandomStream(9000, r));
        worst = std::min(worst, dice(filter::segment_cracks(g.volume, {}), g.mask).dice);
    }
    return {worst >= 0.90, fmt("worst Dice over 5 cracks %.4f", worst)};
}

// 10
Outcome determinism() {
    ts::TempDir dir("acceptance_det");
    const nlohmann::json user = {{"task", "pipeline"},
                                 {"seed", 10},
                                 {"replicates", 3},
                                 {"crack", {{"dims", {96, 96, 96}}, {"width", {{"mode", "random_walk"}}}}}};
    const int saved = thread_count();
    auto run = [&](int threads, const char* sub) {
        set_thread_count(threads);
        job::Overrides o;
        o.output_dir = dir / sub;
        return job::run_job(job::resolve_config(user, o, dir.path()));
    };
    const auto a = run(1, "a"), b = run(4, "b"), c = run(1, "c");
    set_thread_count(saved);
    const bool same = a["content_hash"] == b["content_hash"] && a["content_hash"] == c["content_hash"];
    return {same, fmt("content hash %s at 1 thread, %s at 4 threads, %s on re-run",
                      a["content_hash"].get<std::string>().substr(0, 12).c_str(),
                      b["content_hash"].get<std::string>().substr(0, 12).c_str(),
                      c["content_hash"].get<std::string>().substr(0, 12).c_str())};
}

// 11
Outcome performance() {
    auto time_one = [](std::int64_t n) {
        const auto t0 = Clock::now();
        const auto g = job::generate_crack(crack_job(n, "random_walk"), RandomStream(11000, std::uint64_t(n)));
        (void)g;
        return seconds_since(t0);
    };
    const double t256 = time_one(256), t400 = time_one(400);
    return {t256 < 60.0 && t400 < 300.0,
            fmt("256^3 %.1f s, 400^3 %.1f s on %d thread(s)", t256, t400, thread_count())};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> checks = {
        {"min-cut matches exhaustive bipartition", min_cut_exact},
        {"voxelized cracks separate the volume", separation},
        {"crack width control", width_control},
        {"random-walk change frequency", walk_frequency},
        {"point-process and Boolean laws", point_laws},
        {"Riesz transform properties", riesz},
        {"SEM shine-through", sem},
        {"milling texture", milling},
        {"generate-segment-score loop", closed_loop},
        {"pipeline determinism", determinism},
        {"generation performance", performance},
    };
    int failed = 0;
    for (std::size_t i = 0; i < checks.size(); ++i) {
        Outcome o;
        try {
            o = checks[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::printf("[%s] %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, checks[i].first.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%zu/%zu passed\n", checks.size() - failed, checks.size());
    return failed == 0 ? 0 : 1;
}
