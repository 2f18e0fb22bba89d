#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "lake/geometry.hpp"

using namespace lake;

TEST(DefiningFunction, DiskValueGradientHessian)
{
    const auto phi = DefiningFunction::unit_disk();
    EXPECT_DOUBLE_EQ(phi({0.5, 0.0}), 0.75);
    EXPECT_NEAR(phi({0.6, 0.8}), 0.0, 1e-15);
    const Vec2 g = phi.grad({0.5, -0.25});
    EXPECT_DOUBLE_EQ(g.x, -1.0);
    EXPECT_DOUBLE_EQ(g.y, 0.5);
    const Sym2 H = phi.hess({0.3, 0.1});
    EXPECT_DOUBLE_EQ(H.xx, -2.0);
    EXPECT_DOUBLE_EQ(H.xy, 0.0);
    EXPECT_DOUBLE_EQ(H.yy, -2.0);
}

TEST(DefiningFunction, PolynomialMixedTerm)
{
    // phi = 1 - x^2 - y^2 + 0.5 x y
    const DefiningFunction phi("p", {{0, 0, 1.0}, {2, 0, -1.0}, {0, 2, -1.0}, {1, 1, 0.5}}, Box{-2, 2, -2, 2});
    EXPECT_DOUBLE_EQ(phi({0.5, 0.5}), 0.625);
    const Vec2 g = phi.grad({0.5, 0.5});
    EXPECT_DOUBLE_EQ(g.x, -0.75);
    EXPECT_DOUBLE_EQ(g.y, -0.75);
    EXPECT_DOUBLE_EQ(phi.hess({0.0, 0.0}).xy, 0.5);
}

TEST(DefiningFunction, RejectsBadParameters)
{
    EXPECT_THROW(DefiningFunction::ellipse(0.0, 1.0), Error);
    EXPECT_THROW(DefiningFunction("bad", {{-1, 0, 1.0}}, Box{-1, 1, -1, 1}), Error);
}

TEST(DepthProfile, PowerOfDefiningFunction)
{
    const DepthProfile b(DefiningFunction::unit_disk(), 2.0);
    EXPECT_DOUBLE_EQ(b({0.5, 0.0}), 0.5625);
    EXPECT_DOUBLE_EQ(b({1.5, 0.0}), 0.0);
    const DepthProfile unit(DefiningFunction::unit_disk(), 0.0);
    EXPECT_DOUBLE_EQ(unit({0.9, 0.0}), 1.0);
    EXPECT_DOUBLE_EQ(unit({1.1, 0.0}), 0.0);
    try {
        DepthProfile(DefiningFunction::unit_disk(), -1.0);
        FAIL() << "negative exponent accepted";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::config_validation);
    }
}

TEST(Grid, MaskCountsMatchHandCount)
{
    const auto g4 = build_grid({DefiningFunction::unit_disk(), 1.0}, 0.25);
    EXPECT_EQ(g4->nx(), 8);
    EXPECT_EQ(g4->ny(), 8);
    EXPECT_EQ(g4->size(), 52u);
    EXPECT_EQ(build_grid({DefiningFunction::unit_disk(), 1.0}, 0.125)->size(), 208u);
    EXPECT_EQ(build_grid({DefiningFunction::ellipse(2.0, 1.0), 1.0}, 0.25)->size(), 100u);
}

TEST(Grid, IndexNeighborConsistency)
{
    const auto g = build_grid({DefiningFunction::unit_disk(), 1.0}, 1.0 / 16.0);
    for (std::size_t k = 0; k < g->size(); ++k) {
        const auto [i, j] = g->cell(k);
        EXPECT_EQ(g->index(i, j), static_cast<int>(k));
        EXPECT_GT(g->phi(k), 0.0);
        const int e = g->neighbor(k, Dir::east);
        if (e >= 0) {
            EXPECT_EQ(g->neighbor(static_cast<std::size_t>(e), Dir::west), static_cast<int>(k));
        }
        const int n = g->neighbor(k, Dir::north);
        if (n >= 0) {
            EXPECT_EQ(g->neighbor(static_cast<std::size_t>(n), Dir::south), static_cast<int>(k));
        }
    }
    EXPECT_EQ(g->index(-1, 0), -1);
    EXPECT_EQ(g->index(0, 0), -1);
}

TEST(Grid, RejectsEmptyAndBadSpacing)
{
    EXPECT_THROW(build_grid({DefiningFunction::unit_disk(), 1.0}, 0.0), Error);
    const DefiningFunction empty("neg", {{0, 0, -1.0}}, Box{-1, 1, -1, 1});
    try {
        build_grid({empty, 1.0}, 0.25);
        FAIL() << "empty mask accepted";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::configuration);
    }
}

TEST(Interpolate, ReproducesLinearFunctionsInside)
{
    const auto g = build_grid({DefiningFunction::unit_disk(), 1.0}, 1.0 / 32.0);
    const auto f = sample(g, [](Vec2 p) { return 2.0 * p.x - 3.0 * p.y + 1.0; });
    for (Vec2 p : {Vec2{0.1, 0.2}, Vec2{-0.43, 0.37}, Vec2{0.0, -0.6}})
        EXPECT_NEAR(interpolate(*g, f.values, p), 2.0 * p.x - 3.0 * p.y + 1.0, 1e-12);
    EXPECT_TRUE(std::isnan(interpolate(*g, f.values, {3.0, 3.0})));
}

TEST(BoundaryChart, DiskShoreAndInwardNormal)
{
    const BoundaryChart chart(DefiningFunction::unit_disk(), 0.1);
    for (double t : {0.0, 0.7, 2.0, 4.5}) {
        const Vec2 g = chart.gamma(t);
        EXPECT_NEAR(g.x, std::cos(t), 1e-12);
        EXPECT_NEAR(g.y, std::sin(t), 1e-12);
        const Vec2 n = chart.normal(t);
        EXPECT_NEAR(n.x, -std::cos(t), 1e-12);
        EXPECT_NEAR(n.y, -std::sin(t), 1e-12);
        const Vec2 p = chart.point(t, 0.1);
        EXPECT_NEAR(p.x, 0.9 * std::cos(t), 1e-12);
    }
    EXPECT_NEAR(chart.gradient_floor(64), 1.8, 1e-9);
    try {
        chart.point(0.0, 0.2);
        FAIL() << "point outside collar accepted";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::precondition);
    }
}

TEST(BoundaryChart, EllipseShore)
{
    const BoundaryChart chart(DefiningFunction::ellipse(2.0, 0.5), 0.05);
    EXPECT_NEAR(chart.gamma(0.0).x, 2.0, 1e-12);
    EXPECT_NEAR(chart.gamma(std::numbers::pi / 2).y, 0.5, 1e-12);
    EXPECT_NEAR(chart.normal(0.0).x, -1.0, 1e-12);
}
