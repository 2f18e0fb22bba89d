#include <gtest/gtest.h>

#include <cmath>

#include "lake/transport.hpp"

using namespace lake;

namespace {

GridPtr disk(double h, double a = 1.0) { return build_grid({DefiningFunction::unit_disk(), a}, h); }

ScalarField blob(const GridPtr& g)
{
    return sample(g, [](Vec2 p) { return std::exp(-4.0 * ((p.x - 0.3) * (p.x - 0.3) + p.y * p.y)) + 0.3 * p.y; });
}

TransportConfig config(double eps, double T)
{
    TransportConfig c;
    c.viscosity = eps;
    c.end_time = T;
    c.output_every = T / 4.0;
    return c;
}

} // namespace

TEST(Transport, FaceFluxesAreDivergenceFreeAndVanishAtShore)
{
    const auto g = disk(1.0 / 32.0);
    const TransportContext ctx(g, 0.0);
    const auto psi = ctx.stream_function(blob(g).values);
    const auto U = ctx.face_fluxes(psi);
    double scale = 0.0;
    for (double u : U)
        scale = std::max(scale, std::abs(u));
    ASSERT_GT(scale, 0.0);
    for (std::size_t k = 0; k < g->size(); ++k) {
        double net = 0.0;
        for (Dir d : all_dirs) {
            const double u = U[4 * k + static_cast<std::size_t>(d)];
            net += u;
            const int nb = g->neighbor(k, d);
            if (nb < 0) {
                EXPECT_EQ(u, 0.0);
            }
        }
        EXPECT_NEAR(net, 0.0, 1e-14 * scale);
        const int e = g->neighbor(k, Dir::east);
        if (e >= 0) {
            EXPECT_EQ(U[4 * k + static_cast<std::size_t>(Dir::east)],
                      -U[4 * static_cast<std::size_t>(e) + static_cast<std::size_t>(Dir::west)]);
        }
    }
}

TEST(Transport, ConstantVorticityIsStationaryWithoutViscosity)
{
    const auto g = disk(1.0 / 32.0);
    const auto traj = simulate(ScalarField(g, 0.7), config(0.0, 0.2));
    for (double w : traj.snapshots.back().omega.values)
        EXPECT_NEAR(w, 0.7, 1e-13);
}

TEST(Transport, InviscidRunConservesMassAndObeysMaximumPrinciple)
{
    const auto g = disk(1.0 / 64.0);
    const auto w0 = blob(g);
    const auto traj = simulate(w0, config(0.0, 0.5));
    const auto& first = traj.records.front();
    double abs_mass = 0.0;
    for (std::size_t k = 0; k < g->size(); ++k)
        abs_mass += std::abs(w0[k]) * g->depth(k);
    abs_mass *= g->cell_area();
    for (const auto& r : traj.records) {
        EXPECT_LE(std::abs(r.mass - first.mass), 1e-12 * abs_mass);
        EXPECT_LE(r.max_abs, first.max_abs + 1e-10);
    }
    EXPECT_LE(std::abs(traj.records.back().norm_b[1] - first.norm_b[1]), 0.03 * first.norm_b[1]);
    EXPECT_EQ(traj.records.size(), 5u);
    EXPECT_DOUBLE_EQ(traj.records.back().time, 0.5);
}

class ViscousRun : public ::testing::TestWithParam<double> {};

TEST_P(ViscousRun, NormsAndMaximumDoNotGrow)
{
    const auto g = disk(1.0 / 32.0);
    auto cfg = config(GetParam(), 0.2);
    cfg.truncation = 10.0;  // above max |w0|, so T_R w = w
    const auto traj = simulate(blob(g), cfg);
    for (std::size_t i = 1; i < traj.records.size(); ++i) {
        const auto& a = traj.records[i - 1];
        const auto& b = traj.records[i];
        EXPECT_LE(b.max_abs, a.max_abs + 1e-10);
        for (std::size_t p = 0; p < 4; ++p) {
            EXPECT_LE(b.norm_b[p], a.norm_b[p] * (1.0 + 1e-12)) << "p index " << p;
            EXPECT_LE(b.norm_beps[p], a.norm_beps[p] * (1.0 + 1e-12)) << "p index " << p;
        }
        for (std::size_t p = 0; p < 2; ++p) {
            EXPECT_DOUBLE_EQ(b.truncated_b[p], b.norm_b[p + 1]);
            EXPECT_LE(b.truncated_beps[p], a.truncated_beps[p] * (1.0 + 1e-12));
        }
    }
}

INSTANTIATE_TEST_SUITE_P(Viscosities, ViscousRun, ::testing::Values(0.01, 0.001));

TEST(Transport, TruncationClamps)
{
    const auto g = disk(0.25);
    ScalarField w(g, 0.0);
    w[0] = 3.0;
    w[1] = -5.0;
    w[2] = 0.5;
    const auto t = truncate(w, 1.0);
    EXPECT_EQ(t[0], 1.0);
    EXPECT_EQ(t[1], -1.0);
    EXPECT_EQ(t[2], 0.5);
    EXPECT_THROW(truncate(w, 0.0), Error);
}

TEST(Transport, WeightedNormOfOneIsTotalDepth)
{
    const auto g = disk(1.0 / 16.0, 2.0);
    double total = 0.0;
    for (std::size_t k = 0; k < g->size(); ++k)
        total += g->depth(k);
    total *= g->cell_area();
    const ScalarField one(g, 1.0);
    EXPECT_NEAR(weighted_norm(one, 1.0), total, 1e-14);
    EXPECT_NEAR(weighted_norm(one, 2.0), std::sqrt(total), 1e-14);
    EXPECT_EQ(weighted_norm(one, infinity), 1.0);
}

TEST(Transport, ConfigValidation)
{
    auto cfg = config(0.0, 1.0);
    cfg.cfl = 2.0;
    try {
        cfg.validate();
        FAIL() << "cfl = 2 accepted";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::config_validation);
    }
    cfg = config(-0.1, 1.0);
    EXPECT_THROW(cfg.validate(), Error);
    cfg = config(0.0, 1.0);
    cfg.truncation = -1.0;
    EXPECT_THROW(cfg.validate(), Error);

    const auto g = disk(1.0 / 16.0);
    const TransportContext ctx(g, 0.01);
    try {
        simulate(ScalarField(g, 1.0), config(0.0, 0.1), ctx);
        FAIL() << "viscosity mismatch accepted";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::configuration);
    }
}

TEST(Transport, CollapsingStepAbortsWithLastState)
{
    const auto g = disk(1.0 / 16.0);
    auto cfg = config(0.0, 1.0);
    cfg.min_dt_fraction = 0.5;
    try {
        simulate(blob(g), cfg);
        FAIL() << "expected an abort";
    } catch (const TransportAbort& e) {
        EXPECT_EQ(e.kind(), ErrorKind::numerical);
        EXPECT_EQ(e.last_state().time, 0.0);
        EXPECT_EQ(e.last_state().omega.size(), g->size());
    }
}

TEST(Transport, ThreadCountDoesNotChangeResults)
{
    const auto g = disk(1.0 / 32.0);
    auto c1 = config(0.01, 0.1);
    auto c3 = c1;
    c3.threads = 3;
    const auto a = simulate(blob(g), c1);
    const auto b = simulate(blob(g), c3);
    EXPECT_EQ(a.snapshots.back().omega.values, b.snapshots.back().omega.values);
}

TEST(Transport, ShiftedEllipticWeightRuns)
{
    const auto g = disk(1.0 / 32.0);
    auto cfg = config(0.01, 0.1);
    cfg.shifted_elliptic = true;
    const auto traj = simulate(blob(g), cfg);
    EXPECT_LE(traj.records.back().max_abs, traj.records.front().max_abs + 1e-10);
}
