#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lake/elliptic.hpp"

using namespace lake;

namespace {

struct Manufactured {
    double a;
    double h;
    GridPtr grid;
    StreamSolution sol;
    double rel_l2 = 0.0;
};

Manufactured manufactured(double a, double h)
{
    Manufactured m{a, h, build_grid({DefiningFunction::unit_disk(), a}, h), {}};
    const WeightedPoissonProblem prob{m.grid, ScalarField(m.grid, -4.0 * (a + 1.0))};
    m.sol = solve(prob, 1e-12, 0);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < m.grid->size(); ++k) {
        const Vec2 c = m.grid->center(k);
        const double ex = std::pow(1.0 - dot(c, c), a + 1.0);
        num += (m.sol.psi[k] - ex) * (m.sol.psi[k] - ex);
        den += ex * ex;
    }
    m.rel_l2 = std::sqrt(num / den);
    return m;
}

} // namespace

class ManufacturedDisk : public ::testing::TestWithParam<double> {};

TEST_P(ManufacturedDisk, ErrorAndOrder)
{
    const double a = GetParam();
    const auto coarse = manufactured(a, 1.0 / 32.0);
    const auto fine = manufactured(a, 1.0 / 64.0);
    EXPECT_LE(fine.rel_l2, 0.02);
    EXPECT_GE(std::log2(coarse.rel_l2 / fine.rel_l2), 1.0);
    EXPECT_LE(fine.sol.residual, 1e-12);
}

TEST_P(ManufacturedDisk, ShoreTraceShrinks)
{
    const double a = GetParam();
    const auto coarse = manufactured(a, 1.0 / 32.0);
    const auto fine = manufactured(a, 1.0 / 64.0);
    const double rc = normal_trace_residual(coarse.sol.velocity, BoundaryChart::for_grid(*coarse.grid), 64);
    const double rf = normal_trace_residual(fine.sol.velocity, BoundaryChart::for_grid(*fine.grid), 64);
    EXPECT_LE(rf, 5.0 * fine.h);
    EXPECT_LT(rf, rc);
}

INSTANTIATE_TEST_SUITE_P(Exponents, ManufacturedDisk, ::testing::Values(0.5, 1.0, 2.0));

TEST(Elliptic, RecoveredVelocityIsRigidRotation)
{
    // Psi = (1 - r^2)^2, b = 1 - r^2: (1/b) grad Psi = -4 (x, y), v = (-4 y, 4 x).
    const auto m = manufactured(1.0, 1.0 / 64.0);
    double worst = 0.0;
    for (std::size_t k = 0; k < m.grid->size(); ++k) {
        const Vec2 c = m.grid->center(k);
        if (dot(c, c) > 0.8 * 0.8)
            continue;
        const Vec2 d = m.sol.velocity[k] - Vec2{-4.0 * c.y, 4.0 * c.x};
        worst = std::max(worst, norm(d));
    }
    EXPECT_LT(worst, 0.04);
}

TEST(Elliptic, OperatorIsSymmetricNegative)
{
    const auto g = build_grid({DefiningFunction::ellipse(1.5, 1.0), 2.0}, 1.0 / 24.0);
    const WeightedLaplacian op(g);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    std::vector<double> u(g->size()), w(g->size());
    for (auto& x : u)
        x = nd(rng);
    for (auto& x : w)
        x = nd(rng);
    const auto Au = op.apply(u);
    const auto Aw = op.apply(w);
    double uAw = 0.0, wAu = 0.0, uAu = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        uAw += u[k] * Aw[k];
        wAu += w[k] * Au[k];
        uAu += u[k] * Au[k];
    }
    EXPECT_NEAR(uAw, wAu, 1e-9 * std::abs(uAw));
    EXPECT_LT(uAu, 0.0);
}

TEST(Elliptic, UnitDepthReducesToFivePointLaplacian)
{
    const auto g = build_grid({DefiningFunction::unit_disk(), 0.0}, 1.0 / 32.0);
    const WeightedLaplacian op(g);
    const auto u = sample(g, [](Vec2 p) { return dot(p, p); });
    const auto Au = op.apply(u.values);
    for (std::size_t k = 0; k < g->size(); ++k) {
        const Vec2 c = g->center(k);
        if (dot(c, c) < 0.5) {
            EXPECT_NEAR(Au[k], 4.0, 1e-9);
        }
    }
}

TEST(Elliptic, FactorizedMatchesConjugateGradients)
{
    const auto g = build_grid({DefiningFunction::unit_disk(), 1.0}, 1.0 / 32.0);
    const auto f = sample(g, [](Vec2 p) { return std::sin(3.0 * p.x) + p.y; });
    const auto cg = solve(WeightedPoissonProblem{g, f}, 1e-13, 0);
    const FactorizedStreamSolver direct(g);
    const auto ld = direct.solve(f.values);
    EXPECT_LT(ld.residual, 1e-10);
    for (std::size_t k = 0; k < g->size(); ++k)
        EXPECT_NEAR(cg.psi[k], ld.psi[k], 1e-9);
}

TEST(Elliptic, SolutionMinimizesEnergy)
{
    const auto g = build_grid({DefiningFunction::unit_disk(), 1.0}, 1.0 / 32.0);
    const auto f = ScalarField(g, -8.0);
    const WeightedPoissonProblem prob{g, f};
    const auto sol = solve(prob, 1e-13, 0);
    const auto op = assemble(prob);
    const double e0 = discrete_energy(op, sol.psi.values, f.values);
    auto bumped = sol.psi.values;
    for (std::size_t k = 0; k < bumped.size(); k += 7)
        bumped[k] += 1e-3;
    EXPECT_LT(e0, discrete_energy(op, bumped, f.values));
}

TEST(Elliptic, ShiftedWeightsStayConsistent)
{
    const auto g = build_grid({DefiningFunction::unit_disk(), 1.0}, 1.0 / 32.0);
    EXPECT_THROW(WeightedLaplacian(g, -0.1), Error);
    const FactorizedStreamSolver plain(g);
    const FactorizedStreamSolver shifted(g, 0.01);
    const auto f = ScalarField(g, -8.0);
    const auto a = plain.solve(f.values);
    const auto b = shifted.solve(f.values);
    // A larger depth makes the weights 1/b smaller, so |Psi| grows.
    double sa = 0.0, sb = 0.0;
    for (std::size_t k = 0; k < g->size(); ++k) {
        sa += a.psi[k];
        sb += b.psi[k];
    }
    EXPECT_GT(sb, sa);
    EXPECT_LT(b.residual, 1e-10);
}

TEST(Elliptic, NonConvergenceReportsResidual)
{
    const auto g = build_grid({DefiningFunction::unit_disk(), 2.0}, 1.0 / 64.0);
    try {
        solve(WeightedPoissonProblem{g, ScalarField(g, 1.0)}, 1e-12, 3);
        FAIL() << "expected a solver error";
    } catch (const SolverError& e) {
        EXPECT_EQ(e.kind(), ErrorKind::solver);
        EXPECT_EQ(e.iterations(), 3);
        EXPECT_GT(e.residual(), 1e-12);
    }
}

TEST(Elliptic, ZeroDataGivesZeroField)
{
    const auto g = build_grid({DefiningFunction::unit_disk(), 1.0}, 1.0 / 16.0);
    const auto sol = solve(WeightedPoissonProblem{g, ScalarField(g, 0.0)});
    for (double v : sol.psi.values)
        EXPECT_EQ(v, 0.0);
    EXPECT_THROW(lp_gradient_ratio(sol, WeightedPoissonProblem{g, ScalarField(g, 0.0)}, 4.0), Error);
    EXPECT_THROW(lp_gradient_ratio(sol, WeightedPoissonProblem{g, ScalarField(g, 0.0)}, 1.0), Error);
}
