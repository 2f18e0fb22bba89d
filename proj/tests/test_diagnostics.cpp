#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "lake/diagnostics.hpp"

using namespace lake;

namespace {

GridPtr disk(double h) { return build_grid({DefiningFunction::unit_disk(), 1.0}, h); }

} // namespace

TEST(RandomPairs, SeededAndInside)
{
    const auto phi = DefiningFunction::unit_disk();
    const auto a = random_pairs(phi, 500, 11);
    const auto b = random_pairs(phi, 500, 11);
    const auto c = random_pairs(phi, 500, 12);
    ASSERT_EQ(a.size(), 500u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].first.x, b[i].first.x);
        EXPECT_GT(phi(a[i].first), 0.0);
        EXPECT_GT(phi(a[i].second), 0.0);
    }
    EXPECT_NE(a[0].first.x, c[0].first.x);
    for (const auto& [p, q] : random_pairs(phi, 100, 3, 0.5)) {
        EXPECT_GT(phi(p), 0.5);
        EXPECT_GT(phi(q), 0.5);
    }
}

TEST(Holder, QuotientOfKnownFunctions)
{
    // |x|^(1/2) along the x axis: the 1/2-quotient is 1 for pairs (0, t).
    const std::vector<PointPair> pairs{{{0.0, 0.0}, {0.25, 0.0}}, {{0.0, 0.0}, {0.01, 0.0}}};
    const auto est = holder_quotient([](Vec2 p) { return std::sqrt(std::abs(p.x)); }, 0.5, pairs);
    EXPECT_NEAR(est.quotient, 1.0, 1e-15);
    // A linear function has quotient d^(1 - mu) <= 0.25^(3/4) on these pairs.
    const auto lin = holder_quotient([](Vec2 p) { return p.x; }, 0.25, pairs);
    EXPECT_NEAR(lin.quotient, std::pow(0.25, 0.75), 1e-15);
    EXPECT_THROW(holder_quotient([](Vec2) { return 0.0; }, 1.0, pairs), Error);
}

TEST(Holder, GridFieldSkipsPointsOutsideTheMask)
{
    const auto g = disk(1.0 / 32.0);
    const auto f = sample(g, [](Vec2 p) { return 2.0 * p.x; });
    const std::vector<PointPair> pairs{{{0.0, 0.0}, {0.5, 0.0}}, {{0.0, 0.0}, {5.0, 5.0}}};
    EXPECT_NEAR(holder_quotient(f, 0.5, pairs).quotient, 1.0 / std::sqrt(0.5), 1e-12);
}

TEST(Envelope, ClosedFormAndOde)
{
    EXPECT_EQ(osgood_envelope(0.0, 1.0, 2.0, 5.0).value, 0.0);
    EXPECT_NEAR(osgood_envelope(1e-6, 1.0, 0.0, 3.0).value, 1e-6, 1e-18);
    // y' = e C y / ln(M^2 / y)
    const double M = 0.8, C = 0.3, y0 = 1e-8;
    for (double t : {0.5, 2.0, 5.0}) {
        const double dt = 1e-5;
        const double y = osgood_envelope(y0, M, C, t).value;
        const double dy = (osgood_envelope(y0, M, C, t + dt).value - osgood_envelope(y0, M, C, t - dt).value) / (2 * dt);
        EXPECT_NEAR(dy, std::numbers::e * C * y / std::log(M * M / y), 1e-6 * dy);
    }
    // Saturation past u0^2 / (2 e C).
    const double u0 = std::log(M * M / y0);
    const auto sat = osgood_envelope(y0, M, C, 1.01 * u0 * u0 / (2.0 * std::numbers::e * C));
    EXPECT_TRUE(sat.saturated);
    EXPECT_DOUBLE_EQ(sat.value, M * M);
    EXPECT_THROW(osgood_envelope(2.0, 1.0, 1.0, 1.0), Error);
}

TEST(Velocity, GapAndWeightedSpeed)
{
    const auto g = disk(1.0 / 16.0);
    VectorField a(g), b(g);
    double depth = 0.0;
    for (std::size_t k = 0; k < g->size(); ++k) {
        a.set(k, {1.0, 0.0});
        depth += g->depth(k);
    }
    EXPECT_NEAR(velocity_gap(a, b), depth * g->cell_area(), 1e-14);
    EXPECT_EQ(velocity_gap(a, a), 0.0);
    double bmax = 0.0;
    for (std::size_t k = 0; k < g->size(); ++k)
        bmax = std::max(bmax, g->depth(k));
    EXPECT_DOUBLE_EQ(weighted_speed_max(a).first, std::sqrt(bmax));
    EXPECT_LE(weighted_speed_max(a).second, weighted_speed_max(a).first);
}

TEST(GradientConstant, FitOnSmoothData)
{
    const auto g = disk(1.0 / 32.0);
    const auto bw = random_smooth_field(g, 4);
    const FactorizedStreamSolver solver(g);
    const auto sol = solver.solve(bw.values);
    const std::vector<double> ps{3, 4, 8, 16, 32, 64};
    const auto fit = fit_gradient_constant(sol, bw.values, ps);
    EXPECT_EQ(fit.ratios.size(), 6u);
    EXPECT_TRUE(fit.uniform);
    EXPECT_GT(fit.constant, 0.0);
    EXPECT_EQ(fit.constant, fit.ratios.front());
    const std::vector<double> bad{2.0};
    EXPECT_THROW(fit_gradient_constant(sol, bw.values, bad), Error);
    const std::vector<double> zero(g->size(), 0.0);
    EXPECT_THROW(fit_gradient_constant(sol, zero, ps), Error);
}

TEST(RandomField, SeededAndSmooth)
{
    const auto g = disk(1.0 / 32.0);
    const auto a = random_smooth_field(g, 9);
    const auto b = random_smooth_field(g, 9);
    const auto c = random_smooth_field(g, 10);
    EXPECT_EQ(a.values, b.values);
    EXPECT_NE(a.values, c.values);
}

TEST(Uniqueness, IdenticalRunsHaveZeroGap)
{
    const auto g = disk(1.0 / 32.0);
    TransportConfig cfg;
    cfg.end_time = 0.2;
    cfg.output_every = 0.1;
    const auto w = random_smooth_field(g, 1);
    const auto a = simulate(w, cfg);
    const auto b = simulate(w, cfg);
    const std::vector<double> ps{3, 4, 8};
    const auto rep = uniqueness_report(a, b, ps);
    EXPECT_TRUE(rep.pass);
    for (double y : rep.gap)
        EXPECT_EQ(y, 0.0);
    EXPECT_GT(rep.M, 0.0);
    EXPECT_GT(rep.C, 0.0);

    auto shifted = b;
    shifted.records[1].time += 0.01;
    try {
        uniqueness_report(a, shifted, ps);
        FAIL() << "time mismatch accepted";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::configuration);
    }
}

TEST(Uniqueness, PerturbedRunsStayUnderEnvelope)
{
    const auto g = disk(1.0 / 32.0);
    TransportConfig cfg;
    cfg.end_time = 0.3;
    cfg.output_every = 0.1;
    const auto w = sample(g, [](Vec2 p) { return std::exp(-4.0 * ((p.x - 0.3) * (p.x - 0.3) + p.y * p.y)); });
    auto wp = w;
    const auto noise = random_smooth_field(g, 2);
    for (std::size_t k = 0; k < w.size(); ++k)
        wp[k] += 1e-6 * noise[k];
    const std::vector<double> ps{3, 4, 8, 16, 32, 64};
    const auto rep = uniqueness_report(simulate(w, cfg), simulate(wp, cfg), ps, 10.0);
    EXPECT_TRUE(rep.pass);
    EXPECT_GT(rep.gap.front(), 0.0);
}
