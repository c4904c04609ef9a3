#include <gtest/gtest.h>

#include "microforge/boolean_model.hpp"
#include "support.hpp"

using namespace microforge;

namespace {

Box box(double e) { return {{0, 0, 0}, {e, e, e}}; }

double fraction(const LabelMask& m) { return double(count_foreground(m)) / double(m.size()); }

}  // namespace

TEST(Boolean, ZeroIntensityIsEmpty) {
    GrainSpec s;
    s.radius = SizeDistribution::constant(3.0);
    EXPECT_TRUE(sample_boolean(s, 0.0, box(32), RandomStream(1, 0)).empty());
    EXPECT_THROW(sample_boolean(s, -1.0, box(32), RandomStream(1, 0)), std::invalid_argument);
    EXPECT_EQ(count_foreground(voxelize_grains(GrainList{box(32), {}}, {32, 32, 32}, {1, 1, 1})), 0u);
}

TEST(Boolean, RejectsUnboundedSizes) {
    GrainSpec s;
    s.radius = SizeDistribution::lognormal(1.0, 0.5, std::numeric_limits<double>::infinity());
    EXPECT_THROW(sample_boolean(s, 1e-3, box(32), RandomStream(1, 0)), std::invalid_argument);
}

TEST(Boolean, CentresInDilatedWindow) {
    GrainSpec s;
    s.shape = GrainShape::cylinder;
    s.radius = SizeDistribution::uniform(2, 4);
    s.height = SizeDistribution::constant(10);
    const auto g = sample_boolean(s, 1e-3, box(40), RandomStream(2, 0));
    ASSERT_FALSE(g.empty());
    const Box dil = box(40).dilated(s.max_circumradius());
    for (const auto& x : g.grains) EXPECT_TRUE(dil.contains(x.center));
}

TEST(Voxelize, CentredSphereVolume) {
    Grain sphere;
    sphere.center = {32, 32, 32};
    sphere.radius = 10;
    const auto m = voxelize_grains(GrainList{box(64), {sphere}}, {64, 64, 64}, {1, 1, 1});
    const double exact = 4.0 / 3.0 * std::numbers::pi * 1000.0;
    EXPECT_NEAR(double(count_foreground(m)), exact, 0.02 * exact);
}

TEST(Voxelize, CylinderAxisAndHeight) {
    Grain c;
    c.shape = GrainShape::cylinder;
    c.center = {24, 24, 24};
    c.radius = 6;
    c.height = 20;
    const auto m = voxelize_grains(GrainList{box(48), {c}}, {48, 48, 48}, {1, 1, 1});
    const double exact = std::numbers::pi * 36 * 20;
    EXPECT_NEAR(double(count_foreground(m)), exact, 0.03 * exact);
    EXPECT_TRUE(m(24, 24, 33));
    EXPECT_FALSE(m(24, 24, 35));
    EXPECT_FALSE(m(31, 24, 24));
}

TEST(Voxelize, RotatedCubeKeepsVolume) {
    Grain c;
    c.shape = GrainShape::cube;
    c.center = {32, 32, 32};
    c.edge = 20;
    const auto axis_aligned = count_foreground(voxelize_grains(GrainList{box(64), {c}}, {64, 64, 64}, {1, 1, 1}));
    EXPECT_EQ(axis_aligned, 8000u);
    RandomStream r(5, 0);
    for (int k = 0; k < 5; ++k) {
        c.rotation = detail::uniform_rotation(r);
        const auto n = count_foreground(voxelize_grains(GrainList{box(64), {c}}, {64, 64, 64}, {1, 1, 1}));
        EXPECT_NEAR(double(n), 8000.0, 0.02 * 8000.0);
    }
}

TEST(Voxelize, RejectsMismatchedWindow) {
    EXPECT_THROW(voxelize_grains(GrainList{box(64), {}}, {32, 32, 32}, {1, 1, 1}), std::invalid_argument);
    EXPECT_NO_THROW(voxelize_grains(GrainList{box(64), {}}, {32, 32, 32}, {2, 2, 2}));
}

TEST(Coverage, SpheresAndCubes) {
    for (GrainShape shape : {GrainShape::sphere, GrainShape::cube}) {
        GrainSpec s;
        s.shape = shape;
        s.radius = SizeDistribution::constant(5);
        s.edge = SizeDistribution::constant(8);
        const double lambda = intensity_for_coverage(s, 0.3);
        EXPECT_NEAR(boolean_coverage(s, lambda), 0.3, 1e-12);
        double f = 0;
        for (std::uint64_t r = 0; r < 3; ++r)
            f += fraction(voxelize_grains(sample_boolean(s, lambda, box(128), RandomStream(10, r)), {128, 128, 128}, {1, 1, 1}));
        EXPECT_NEAR(f / 3, 0.3, 0.015) << shape_name(shape);
    }
}

TEST(Coverage, NoEdgeTrend) {
    GrainSpec s;
    s.radius = SizeDistribution::constant(6);
    const auto m = voxelize_grains(sample_boolean(s, intensity_for_coverage(s, 0.3), box(160), RandomStream(11, 0)),
                                   {160, 160, 160}, {1, 1, 1});
    auto band = [&](std::int64_t z0, std::int64_t z1) {
        std::size_t n = 0;
        for (std::int64_t z = z0; z < z1; ++z)
            for (std::int64_t y = 0; y < 160; ++y)
                for (std::int64_t x = 0; x < 160; ++x) n += m(x, y, z);
        return double(n) / double((z1 - z0) * 160 * 160);
    };
    // Plus-sampling keeps the boundary slabs at the bulk fraction.
    EXPECT_NEAR(band(0, 16), 0.3, 0.03);
    EXPECT_NEAR(band(144, 160), 0.3, 0.03);
}

TEST(Cox, ZeroParentsAndOffspringContainment) {
    const SizeDistribution r = SizeDistribution::constant(2.0);
    EXPECT_TRUE(sample_cox_boolean_spheres(MaternParams{0.0, 5, 8}, r, box(64), RandomStream(1, 0)).empty());
    const auto g = sample_cox_boolean_spheres(MaternParams{2e-4, 10, 8}, r, box(64), RandomStream(2, 0));
    ASSERT_FALSE(g.empty());
    for (const auto& x : g.grains) {
        EXPECT_EQ(x.shape, GrainShape::sphere);
        EXPECT_EQ(x.radius, 2.0);
    }
}

TEST(GrainCsv, HeaderAndDeterminism) {
    GrainSpec s;
    s.shape = GrainShape::cube;
    s.edge = SizeDistribution::uniform(3, 5);
    const auto a = sample_boolean(s, 1e-3, box(30), RandomStream(3, 0));
    const auto b = sample_boolean(s, 1e-3, box(30), RandomStream(3, 0));
    const std::string csv = grains_to_csv(a);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "shape,x,y,z,radius,height,edge,r00,r01,r02,r10,r11,r12,r20,r21,r22");
    EXPECT_EQ(csv, grains_to_csv(b));
}
