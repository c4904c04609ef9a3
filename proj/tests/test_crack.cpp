#include <gtest/gtest.h>

#include <set>

#include "microforge/crack.hpp"
#include "microforge/eval.hpp"
#include "support.hpp"

using namespace microforge;
using testing_support::exhaustive_min_cut;

namespace {

Box cube(double e) { return {{0, 0, 0}, {e, e, e}}; }

Tessellation tess(std::size_t n, std::uint64_t seed, double e = 1.0) {
    return build_voronoi(testing_support::uniform_points(n, cube(e), RandomStream(seed, 0)), cube(e));
}

bool subset(const LabelMask& a, const LabelMask& b) {
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] && !b[i]) return false;
    return true;
}

}  // namespace

TEST(MinCut, TwoCellsCutTheBisector) {
    const auto t = build_voronoi(PointPattern{cube(1), {{0.5, 0.5, 0.4}, {0.5, 0.5, 0.6}}}, cube(1));
    const auto c = min_cut_crack(t, Axis::z);
    ASSERT_EQ(c.facet_ids, std::vector<int>{0});
    EXPECT_NEAR(c.weight, 1.0, 1e-12);
}

TEST(MinCut, MatchesExhaustiveSearch) {
    int checked = 0;
    for (std::uint64_t s = 0; checked < 15; ++s) {
        const auto t = tess(6 + s % 7, 100 + s);
        const double oracle = exhaustive_min_cut(t, Axis::z);
        if (!std::isfinite(oracle)) {
            EXPECT_THROW(min_cut_crack(t, Axis::z), std::invalid_argument);
            continue;
        }
        const auto c = min_cut_crack(t, Axis::z);
        EXPECT_EQ(c.weight, oracle) << "seed " << s;
        ++checked;
    }
}

TEST(MinCut, RemovingTheCutDisconnectsTerminals) {
    const auto t = tess(200, 5);
    const auto c = min_cut_crack(t, Axis::y);
    const auto g = facet_graph(t, Axis::y);
    std::set<int> cut(c.facet_ids.begin(), c.facet_ids.end());
    std::vector<std::vector<int>> adj(g.num_nodes());
    for (const auto& e : g.edges) {
        if (e.facet >= 0 && cut.count(e.facet)) continue;
        adj[e.u].push_back(e.v);
        adj[e.v].push_back(e.u);
    }
    std::vector<char> seen(g.num_nodes(), 0);
    std::vector<int> stack{g.source};
    seen[g.source] = 1;
    while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        for (int v : adj[u])
            if (!seen[v]) {
                seen[v] = 1;
                stack.push_back(v);
            }
    }
    EXPECT_FALSE(seen[g.sink]);
    EXPECT_TRUE(std::is_sorted(c.facet_ids.begin(), c.facet_ids.end()));
}

TEST(WidthWalk, ZeroProbabilityKeepsW0) {
    const auto t = tess(150, 6);
    WidthWalkParams p{0.0, 4, 1, 10};
    const auto c = assign_widths_random_walk(min_cut_crack(t, Axis::z), t, p, RandomStream(1, 0));
    for (int w : c.widths) EXPECT_EQ(w, 4);
}

TEST(WidthWalk, ChangeFrequencyIsTwoP) {
    WidthWalkParams p{0.01, 10, 1, INT_MAX};
    const auto w = bernoulli_width_walk(100000, p, RandomStream(7, 0));
    std::size_t changes = 0;
    for (std::size_t k = 1; k < w.size(); ++k) changes += w[k] != w[k - 1];
    const double f = changes / 1e5;
    EXPECT_GE(f, 0.015);
    EXPECT_LE(f, 0.025);
}

TEST(WidthWalk, ClampsAndValidates) {
    WidthWalkParams p{0.45, 2, 1, 3};
    const auto w = bernoulli_width_walk(5000, p, RandomStream(8, 0));
    for (int x : w) {
        EXPECT_GE(x, 1);
        EXPECT_LE(x, 3);
    }
    EXPECT_THROW((WidthWalkParams{0.5, 2, 1, 3}.validate()), std::invalid_argument);
    EXPECT_THROW((WidthWalkParams{0.1, 5, 1, 3}.validate()), std::invalid_argument);
    EXPECT_THROW((WidthWalkParams{0.1, 1, 0, 3}.validate()), std::invalid_argument);
}

TEST(WidthWalk, NeighbouringFacetsDifferByAtMostOne) {
    const auto t = tess(300, 9, 64);
    WidthWalkParams p{0.2, 5, 1, 20};
    const auto c = assign_widths_random_walk(min_cut_crack(t, Axis::z), t, p, RandomStream(2, 0));
    for (const auto& s : crack_traversal(c, t))
        if (s.parent >= 0) EXPECT_LE(std::abs(c.widths[s.position] - c.widths[s.parent]), 1);
}

TEST(Traversal, RootIsNearestTheCentreAndOrderCoversAll) {
    const auto t = tess(250, 10);
    const auto c = min_cut_crack(t, Axis::x);
    const auto order = crack_traversal(c, t);
    ASSERT_EQ(order.size(), c.size());
    ASSERT_EQ(order[0].parent, -1);
    const Vec3 centre = t.window.center();
    const double d0 = norm(t.facets[c.facet_ids[order[0].position]].centroid - centre);
    for (int f : c.facet_ids) EXPECT_LE(d0, norm(t.facets[f].centroid - centre));
    std::set<int> seen;
    for (const auto& s : order) EXPECT_TRUE(seen.insert(s.position).second);
    EXPECT_EQ(crack_traversal(c, t).size(), order.size());
}

TEST(Multiscale, SingleScaleIsConstant) {
    const auto t = tess(150, 11);
    const auto c = min_cut_crack(t, Axis::z);
    const auto a = make_multiscale_widths(c, t, {3}, RandomStream(1, 0));
    EXPECT_EQ(a.widths, assign_constant_width(c, 3).widths);
    EXPECT_THROW(make_multiscale_widths(c, t, {}, RandomStream(1, 0)), std::invalid_argument);
    EXPECT_THROW(make_multiscale_widths(c, t, {0, 2}, RandomStream(1, 0)), std::invalid_argument);
}

TEST(Multiscale, EveryScaleUsed) {
    const auto t = tess(300, 12);
    const auto c = make_multiscale_widths(min_cut_crack(t, Axis::z), t, {1, 5, 9}, RandomStream(2, 0));
    std::set<int> used(c.widths.begin(), c.widths.end());
    EXPECT_EQ(used, (std::set<int>{1, 5, 9}));
}

TEST(Voxelize, EmptyCrackIsEmptyMask) {
    const auto t = tess(20, 13, 32);
    EXPECT_EQ(count_foreground(voxelize_crack(CrackSurface{}, t, {32, 32, 32})), 0u);
}

TEST(Voxelize, PlaneThicknessWidthOneAndThree) {
    // Two germs either side of z = 16.3: one horizontal facet.
    const auto t = build_voronoi(PointPattern{cube(48), {{24, 24, 10.3}, {24, 24, 22.3}}}, cube(48));
    const auto c = min_cut_crack(t, Axis::z);
    const auto m1 = voxelize_crack(c, t, {48, 48, 48});
    const auto s1 = thickness_stats(m1);
    EXPECT_GE(s1.mean, 1.0);
    EXPECT_LE(s1.mean, 1.6);
    const auto m3 = voxelize_crack(assign_constant_width(c, 3), t, {48, 48, 48});
    EXPECT_NEAR(thickness_stats(m3).mean, 3.0, 0.5);
    EXPECT_EQ(count_foreground(m3), 3u * 48 * 48);
}

TEST(Voxelize, TiltedPlaneWidthThree) {
    const auto t = build_voronoi(PointPattern{cube(64), {{20, 25, 28}, {40, 35, 36}}}, cube(64));
    const auto c = assign_constant_width(min_cut_crack(t, Axis::x), 3);
    // Oblique sheets read thinner than axis-aligned ones: the nearest background
    // centre can sit closer than half a voxel beyond the surface.
    const double mean = thickness_stats(voxelize_crack(c, t, {64, 64, 64})).mean;
    EXPECT_GE(mean, 2.0);
    EXPECT_LE(mean, 3.5);
    // The voxel count per unit facet area stays at the nominal width.
    EXPECT_NEAR(double(count_foreground(voxelize_crack(c, t, {64, 64, 64}))) / c.weight, 3.0, 0.15);
}

TEST(Voxelize, MatchesBruteForceDistance) {
    std::uint64_t seed = 14;
    while (!std::isfinite(exhaustive_min_cut(tess(12, seed, 24), Axis::z))) ++seed;
    const auto t = tess(12, seed, 24);
    auto c = min_cut_crack(t, Axis::z);
    RandomStream r(3, 0);
    for (auto& w : c.widths) w = 1 + static_cast<int>(r.below(4));
    const auto m = voxelize_crack(c, t, {24, 24, 24});
    // Oracle: distance from voxel centre to the facet polygon (plane or boundary edges).
    for (std::int64_t z = 0; z < 24; ++z)
        for (std::int64_t y = 0; y < 24; ++y)
            for (std::int64_t x = 0; x < 24; ++x) {
                const Vec3 p{x + 0.5, y + 0.5, z + 0.5};
                bool inside = false;
                for (std::size_t k = 0; k < c.size() && !inside; ++k) {
                    const auto& f = t.facets[c.facet_ids[k]];
                    const double rad = 0.5 * c.widths[k];
                    const double dp = dot(p - f.centroid, f.normal);
                    const Vec3 q = p - f.normal * dp;
                    bool in_poly = true;
                    const std::size_t nv = f.polygon.size();
                    double edge = 1e300;
                    for (std::size_t v = 0; v < nv; ++v) {
                        const Vec3 a = f.polygon[v], b = f.polygon[(v + 1) % nv];
                        if (dot(cross(b - a, q - a), f.normal) < 0) in_poly = false;
                        edge = std::min(edge, detail::point_segment_dist2(p, a, b));
                    }
                    const double d2 = in_poly ? dp * dp : edge;
                    // Skip centres within 1e-9 of the threshold.
                    if (std::fabs(d2 - rad * rad) < 1e-9) {
                        inside = m(x, y, z) != 0;
                        break;
                    }
                    inside = d2 <= rad * rad;
                }
                ASSERT_EQ(m(x, y, z) != 0, inside) << x << ' ' << y << ' ' << z;
            }
}

TEST(Voxelize, MonotoneInWidth) {
    const auto t = tess(60, 15, 48);
    auto a = min_cut_crack(t, Axis::z);
    auto b = a;
    RandomStream r(4, 0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a.widths[i] = 1 + static_cast<int>(r.below(3));
        b.widths[i] = a.widths[i] + static_cast<int>(r.below(3));
    }
    EXPECT_TRUE(subset(voxelize_crack(a, t, {48, 48, 48}), voxelize_crack(b, t, {48, 48, 48})));
}

TEST(Voxelize, RejectsDegenerateWidthAndAnisotropicDims) {
    const auto t = tess(20, 16, 16);
    const auto c = assign_constant_width(min_cut_crack(t, Axis::z), 9);
    EXPECT_THROW(voxelize_crack(c, t, {16, 16, 16}), std::invalid_argument);
    EXPECT_THROW(voxelize_crack(assign_constant_width(c, 1), t, {16, 16, 32}), std::invalid_argument);
}

TEST(Voxelize, CutSeparatesFaces) {
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto t = tess(80, 200 + s, 48);
        const auto c = min_cut_crack(t, Axis::z);
        EXPECT_TRUE(separation_check(voxelize_crack(c, t, {48, 48, 48}), Axis::z).separated) << s;
    }
}

TEST(Union, KeepsLargerWidthOnSharedFacets) {
    const auto t = tess(100, 17);
    const auto a = assign_constant_width(min_cut_crack(t, Axis::z), 2);
    const auto b = assign_constant_width(min_cut_crack(t, Axis::x), 5);
    const auto u = union_cracks(a, b, t);
    std::set<int> all(a.facet_ids.begin(), a.facet_ids.end());
    all.insert(b.facet_ids.begin(), b.facet_ids.end());
    EXPECT_EQ(std::set<int>(u.facet_ids.begin(), u.facet_ids.end()), all);
    for (std::size_t i = 0; i < u.size(); ++i)
        if (std::binary_search(b.facet_ids.begin(), b.facet_ids.end(), u.facet_ids[i])) EXPECT_EQ(u.widths[i], 5);
}

TEST(Brownian, ZeroAmplitudeIsMidPlane) {
    const auto m = brownian_crack(0.5, 0.0, {16, 12, 20}, RandomStream(1, 0));
    EXPECT_EQ(m, testing_support::slab({16, 12, 20}, 10, 1));
}

TEST(Brownian, StructureFunctionSlope) {
    const std::int64_t n = 256;
    const std::vector<int> lags{1, 2, 4, 8, 16};
    for (double hurst : {0.3, 0.5, 0.8}) {
        std::vector<double> s(lags.size(), 0.0);
        for (std::uint64_t seed = 0; seed < 4; ++seed) {
            const auto f = fbm_surface(n, n, hurst, RandomStream(seed, 0));
            for (std::size_t k = 0; k < lags.size(); ++k)
                for (std::int64_t y = 0; y < n; ++y)
                    for (std::int64_t x = 0; x < n; ++x) {
                        const double a = f[x + n * y];
                        const double dx = f[(x + lags[k]) % n + n * y] - a;
                        const double dy = f[x + n * ((y + lags[k]) % n)] - a;
                        s[k] += dx * dx + dy * dy;
                    }
        }
        // Least-squares slope of log S against log h.
        double mx = 0, my = 0;
        for (std::size_t k = 0; k < lags.size(); ++k) {
            mx += std::log(lags[k]);
            my += std::log(s[k]);
        }
        mx /= lags.size();
        my /= lags.size();
        double sxy = 0, sxx = 0;
        for (std::size_t k = 0; k < lags.size(); ++k) {
            sxy += (std::log(lags[k]) - mx) * (std::log(s[k]) - my);
            sxx += (std::log(lags[k]) - mx) * (std::log(lags[k]) - mx);
        }
        EXPECT_NEAR(sxy / sxx, 2.0 * hurst, 0.2) << "H = " << hurst;
    }
}

TEST(Brownian, SeparatesAndValidates) {
    const auto m = brownian_crack(0.5, 6.0, {64, 64, 64}, RandomStream(3, 0));
    EXPECT_TRUE(separation_check(m, Axis::z).separated);
    const auto w = brownian_crack(0.5, 6.0, {64, 64, 64}, RandomStream(3, 0), 3);
    EXPECT_TRUE(subset(m, w));
    EXPECT_THROW(brownian_crack(1.0, 1.0, {16, 16, 16}, RandomStream(1, 0)), std::invalid_argument);
    EXPECT_THROW(brownian_crack(0.5, 1.0, {16, 16, 7}, RandomStream(1, 0)), std::invalid_argument);
}

TEST(AirModel, TwoLevelImage) {
    GrayVolume bg({8, 8, 8}, {1, 1, 1}, 0.8f);
    for (std::size_t i = 0; i < bg.size(); i += 3) bg[i] = 0.125f;
    const auto g = estimate_air_gray_model(bg, 0.5);
    EXPECT_EQ(g.mean, 0.125);
    EXPECT_EQ(g.stddev, 0.0);
    EXPECT_THROW(estimate_air_gray_model(GrayVolume({4, 4, 4}, {1, 1, 1}, 0.9f), 0.5), std::invalid_argument);
}

TEST(AirModel, GaussianPhantom) {
    GrayVolume bg({64, 64, 64}, {1, 1, 1}, 0.9f);
    RandomStream r(9, 0);
    for (std::size_t i = 0; i < bg.size() / 2; ++i) bg[i] = static_cast<float>(0.2 + 0.05 * r.normal());
    const auto g = estimate_air_gray_model(bg, 0.5);
    EXPECT_NEAR(g.mean, 0.2, 0.005);
    EXPECT_NEAR(g.stddev, 0.05, 0.01);
}

TEST(Blend, EmptyMaskLeavesBackground) {
    GrayVolume bg({10, 9, 8});
    RandomStream r(1, 0);
    for (auto& v : bg.storage()) v = static_cast<float>(r.uniform());
    EXPECT_EQ(blend_into_volume(bg, LabelMask(bg.dims()), GrayModel::gaussian(0.1, 0.02), 0.7, RandomStream(2, 0)), bg);
}

TEST(Blend, InteriorMeanAndLocality) {
    const Dims d{40, 40, 40};
    GrayVolume bg(d, {1, 1, 1}, 0.9f);
    RandomStream r(3, 0);
    for (auto& v : bg.storage()) v = static_cast<float>(0.8 + 0.03 * r.normal());
    const LabelMask m = testing_support::slab(d, 18, 3);
    const auto model = GrayModel::gaussian(0.15, 0.03);

    const auto raw = blend_into_volume(bg, m, model, 0.0, RandomStream(4, 0));
    double s = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < m.size(); ++i)
        if (m[i]) {
            s += raw[i];
            ++n;
        }
    EXPECT_NEAR(s / n, 0.15, 2.0 * 0.03 / std::sqrt(double(n)));

    const double sigma = 0.7;
    const auto out = blend_into_volume(bg, m, model, sigma, RandomStream(4, 0));
    const double reach = 3.0 * sigma + 1.0;
    for (std::int64_t z = 0; z < d.nz; ++z) {
        const double dist = z < 18 ? 18 - z : (z > 20 ? z - 20 : 0);
        if (dist <= reach) continue;
        for (std::int64_t y = 0; y < d.ny; ++y)
            for (std::int64_t x = 0; x < d.nx; ++x) ASSERT_EQ(out(x, y, z), bg(x, y, z));
    }
    EXPECT_THROW(blend_into_volume(bg, LabelMask({4, 4, 4}), model, sigma, RandomStream(4, 0)), std::invalid_argument);
}

TEST(Blend, DeterministicAcrossThreadCounts) {
    const Dims d{32, 32, 32};
    GrayVolume bg(d, {1, 1, 1}, 0.7f);
    const LabelMask m = testing_support::slab(d, 10, 4);
    const auto model = GrayModel::gaussian(0.15, 0.03);
    const int before = thread_count();
    set_thread_count(1);
    const auto a = blend_into_volume(bg, m, model, 0.7, RandomStream(5, 0));
    set_thread_count(4);
    const auto b = blend_into_volume(bg, m, model, 0.7, RandomStream(5, 0));
    set_thread_count(before);
    EXPECT_EQ(a, b);
}
