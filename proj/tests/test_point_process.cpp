#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/poisson.hpp>

#include "microforge/point_process.hpp"
#include "support.hpp"

using namespace microforge;
using testing_support::unit_box;

namespace {

void expect_inside(const PointPattern& p) {
    for (const auto& q : p.points) ASSERT_TRUE(p.window.contains(q));
}

double mean_of(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double var_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

}  // namespace

TEST(Poisson, ZeroIntensityIsEmpty) {
    EXPECT_TRUE(sample_poisson(0.0, unit_box(), RandomStream(1, 0)).empty());
}

TEST(Poisson, RejectsNegativeIntensityAndDegenerateWindow) {
    EXPECT_THROW(sample_poisson(-1.0, unit_box(), RandomStream(1, 0)), std::invalid_argument);
    EXPECT_THROW(sample_poisson(1.0, Box{{0, 0, 0}, {1, 0, 1}}, RandomStream(1, 0)), std::invalid_argument);
}

TEST(Poisson, CountMeanAndDispersion) {
    std::vector<double> counts;
    for (std::uint64_t r = 0; r < 1000; ++r) {
        const auto p = sample_poisson(100.0, unit_box(), RandomStream(11, r));
        expect_inside(p);
        counts.push_back(static_cast<double>(p.size()));
    }
    EXPECT_NEAR(mean_of(counts), 100.0, 3.0 * std::sqrt(100.0 / 1000.0));
    const double dispersion = var_of(counts) / mean_of(counts);
    EXPECT_GE(dispersion, 0.85);
    EXPECT_LE(dispersion, 1.15);
}

TEST(Poisson, CoordinatesUniformPerAxis) {
    const auto p = sample_poisson(20000.0, Box{{0, 0, 0}, {2, 1, 4}}, RandomStream(12, 0));
    const double lim[3] = {2, 1, 4};
    for (int a = 0; a < 3; ++a) {
        // Chi-square over 10 equal bins along each axis.
        std::vector<double> bins(10, 0.0);
        for (const auto& q : p.points) {
            const double c = a == 0 ? q.x : (a == 1 ? q.y : q.z);
            bins[std::min<std::size_t>(9, static_cast<std::size_t>(c / lim[a] * 10))] += 1;
        }
        const double e = p.size() / 10.0;
        double chi = 0;
        for (double b : bins) chi += (b - e) * (b - e) / e;
        EXPECT_LT(chi, boost::math::quantile(boost::math::chi_squared(9), 0.999));
    }
}

TEST(Poisson, DeterministicPerStream) {
    const auto a = sample_poisson(50.0, unit_box(), RandomStream(3, 4));
    const auto b = sample_poisson(50.0, unit_box(), RandomStream(3, 4));
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.points[i], b.points[i]);
}

TEST(Matern, ZeroParentsIsEmpty) {
    MaternParams m{0.0, 5.0, 0.1};
    EXPECT_TRUE(sample_matern_cluster(m, unit_box(), RandomStream(1, 0)).empty());
    EXPECT_THROW(sample_matern_cluster(MaternParams{1.0, -1.0, 0.1}, unit_box(), RandomStream(1, 0)),
                 std::invalid_argument);
}

TEST(Matern, MeanRetainedCount) {
    const MaternParams m{20.0, 5.0, 0.15};
    std::vector<double> counts;
    for (std::uint64_t r = 0; r < 1000; ++r) {
        const auto p = sample_matern_cluster(m, unit_box(), RandomStream(21, r));
        expect_inside(p);
        counts.push_back(static_cast<double>(p.size()));
    }
    const double expected = 20.0 * 5.0;
    const double se = std::sqrt(var_of(counts) / counts.size());
    EXPECT_NEAR(mean_of(counts), expected, 3.0 * se);
}

TEST(Matern, OffspringWithinClusterRadiusOfSomeParent) {
    const MaternParams m{30.0, 6.0, 0.1};
    std::vector<Vec3> parents;
    const auto p = sample_matern_cluster(m, unit_box(), RandomStream(22, 0), &parents);
    ASSERT_FALSE(p.empty());
    for (const auto& q : p.points) {
        double best = 1e300;
        for (const auto& c : parents) best = std::min(best, norm(q - c));
        EXPECT_LE(best, m.cluster_radius + 1e-12);
    }
}

TEST(Packing, SinglePoint) {
    PackingParams pp;
    pp.target_count = 1;
    pp.radius = SizeDistribution::constant(0.1);
    const auto s = sample_force_biased_packing(pp, unit_box(), RandomStream(1, 0));
    ASSERT_EQ(s.centers.size(), 1u);
    EXPECT_TRUE(unit_box().contains(s.centers.points[0]));
}

TEST(Packing, NoPairOverlapsBeyondTolerance) {
    PackingParams pp;
    pp.target_count = 200;
    const double r = std::cbrt(0.3 / (200 * 4.0 / 3.0 * std::numbers::pi));
    pp.radius = SizeDistribution::constant(r);
    const auto s = sample_force_biased_packing(pp, unit_box(), RandomStream(31, 0));
    ASSERT_EQ(s.centers.size(), 200u);
    EXPECT_NEAR(s.packing_fraction, 0.3, 1e-12);
    expect_inside(s.centers);
    const auto& c = s.centers.points;
    for (std::size_t i = 0; i < c.size(); ++i)
        for (std::size_t j = i + 1; j < c.size(); ++j) ASSERT_GE(norm(c[i] - c[j]), (1.0 - pp.overlap_tol) * 2.0 * r);
}

TEST(Packing, RejectsDenseRequests) {
    PackingParams pp;
    pp.target_count = 100;
    pp.radius = SizeDistribution::constant(std::cbrt(0.65 / (100 * 4.0 / 3.0 * std::numbers::pi)));
    EXPECT_THROW(sample_force_biased_packing(pp, unit_box(), RandomStream(1, 0)), std::invalid_argument);
}

TEST(Packing, ReportsNonConvergence) {
    PackingParams pp;
    pp.target_count = 300;
    pp.radius = SizeDistribution::constant(std::cbrt(0.55 / (300 * 4.0 / 3.0 * std::numbers::pi)));
    pp.max_iters = 3;
    EXPECT_THROW(sample_force_biased_packing(pp, unit_box(), RandomStream(1, 0)), NonConvergence);
}

TEST(Stretch, IdentityScale) {
    const auto p = sample_poisson(40.0, unit_box(), RandomStream(41, 0));
    const auto s = stretch_points(p, {1, 1, 1});
    ASSERT_EQ(s.size(), p.size());
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(s.points[i], p.points[i]);
    EXPECT_EQ(s.window.hi, p.window.hi);
}

TEST(Stretch, VarianceRatios) {
    const auto p = testing_support::uniform_points(10000, unit_box(), RandomStream(42, 0));
    const auto s = stretch_points(p, {2, 1, 2});
    expect_inside(s);
    std::vector<double> c[3];
    for (const auto& q : s.points) {
        c[0].push_back(q.x);
        c[1].push_back(q.y);
        c[2].push_back(q.z);
    }
    const double vy = var_of(c[1]);
    EXPECT_NEAR(var_of(c[0]) / vy, 4.0, 0.4);
    EXPECT_NEAR(var_of(c[2]) / vy, 4.0, 0.4);
    EXPECT_THROW(stretch_points(p, {0, 1, 1}), std::invalid_argument);
}

TEST(PatternCsv, HeaderAndRows) {
    PointPattern p{unit_box(), {{0.5, 0.25, 0.125}}};
    const std::string csv = pattern_to_csv(p);
    EXPECT_EQ(csv, "# window 0 0 0 1 1 1\nx,y,z\n0.5,0.25,0.125\n");
}
