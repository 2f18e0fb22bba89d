#pragma once

// Degenerate weighted Poisson problem div((1/b) grad Psi) = f, Psi = 0 on the
// shore, discretized on the masked grid. Psi is the minimizer of the weighted
// Dirichlet energy and is found by diagonally preconditioned CG; the bounded
// profile Phi = Psi / phi^(a+1) and the velocity v = (1/b) perp(grad Psi) are
// recovered from it.

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "lake/error.hpp"
#include "lake/geometry.hpp"
#include "lake/norms.hpp"

namespace lake {

struct WeightedPoissonProblem {
    GridPtr grid;
    ScalarField rhs;

    const DepthProfile& depth() const { return grid->profile(); }
};

/// Matrix-free u -> div_h((1/b) grad_h u) with homogeneous Dirichlet data.
///
/// Each face carries the harmonic mean of 1/b along the segment joining the
/// two centers, 1 / mean(b), which makes the 1D flux (1/b) du/ds exact when it
/// is constant across the segment; for b linear along the segment this is the
/// two-point value 2 / (b_i + b_j). A face towards the shore integrates b from
/// the zero of phi to the center, so only the diagonal changes and the operator
/// stays symmetric.
class WeightedLaplacian {
public:
    /// depth_shift > 0 replaces b by b + depth_shift in the weights.
    explicit WeightedLaplacian(GridPtr grid, double depth_shift = 0.0) : grid_(std::move(grid)), shift_(depth_shift)
    {
        require(depth_shift >= 0.0, ErrorKind::precondition, "depth shift must be non-negative");
        const Grid& g = *grid_;
        const std::size_t n = g.size();
        neighbor_.resize(4 * n);
        weight_.resize(4 * n);
        diag_.assign(n, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            const double bk = g.depth(k);
            if (!(bk > 0.0) || !std::isfinite(bk))
                fail(ErrorKind::configuration, "assembly: depth vanishes at an interior cell center");
            for (Dir d : all_dirs) {
                const std::size_t slot = 4 * k + static_cast<std::size_t>(d);
                const int nb = g.neighbor(k, d);
                neighbor_[slot] = nb;
                if (nb >= 0) {
                    const double w = 1.0 / (g.h() * (segment_depth_integral(g, k, d) + shift_ * g.h()));
                    weight_[slot] = w;
                    diag_[k] -= w;
                } else {
                    weight_[slot] = 0.0;
                    const double ds = std::max(shore_fraction(g, k, d), 1e-6) * g.h();
                    diag_[k] -= 1.0 / (g.h() * (shore_depth_integral(g, k, d) + shift_ * ds));
                }
            }
        }
    }

    /// Integral of b along the segment from center k to the next center in direction d.
    static double segment_depth_integral(const Grid& g, std::size_t k, Dir d)
    {
        const Vec2 c = g.center(k);
        const Vec2 step = g.h() * unit(d);
        const auto& prof = g.profile();
        double s = 0.0;
        for (std::size_t q = 0; q < gauss_nodes.size(); ++q)
            s += gauss_weights[q] * prof(c + gauss_nodes[q] * step);
        return s * g.h();
    }

    /// Integral of b from the shore crossing to center k along direction d.
    /// With b ~ s^a at the shore the substitution u = s^(a+1) leaves a smooth
    /// integrand; for phi linear along the segment it returns b_k d / (a + 1).
    static double shore_depth_integral(const Grid& g, std::size_t k, Dir d)
    {
        const double a = g.profile().exponent();
        const Vec2 c = g.center(k);
        const Vec2 e = unit(d);
        const double dist = std::max(shore_fraction(g, k, d), 1e-6) * g.h();
        const auto& phi = g.defining();
        // s measured from the shore towards the center.
        const Vec2 shore = c + dist * e;
        double acc = 0.0;
        for (std::size_t q = 0; q < gauss_nodes.size(); ++q) {
            const double u = gauss_nodes[q];
            const double s = dist * std::pow(u, 1.0 / (a + 1.0));
            const double ph = std::max(phi(shore - s * e), 0.0);
            // b ds = phi^a ds, ds = dist u^(-a/(a+1)) du / (a+1), and s^a = dist^a u^(a/(a+1)).
            const double ratio = s > 0.0 ? ph / s : norm(phi.grad(shore));
            acc += gauss_weights[q] * std::pow(ratio, a);
        }
        return acc * std::pow(dist, a + 1.0) / (a + 1.0);
    }

    /// Fraction theta in (0, 1] of the segment from center k to the neighbor
    /// center in direction d at which phi first vanishes.
    static double shore_fraction(const Grid& g, std::size_t k, Dir d)
    {
        const Vec2 c = g.center(k);
        const Vec2 step = g.h() * unit(d);
        const auto& phi = g.defining();
        if (phi(c + step) > 0.0)
            return 1.0;  // the neighbor is only outside the bounding box
        double lo = 0.0;
        double hi = 1.0;
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            (phi(c + mid * step) > 0.0 ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    }

    static Vec2 unit(Dir d)
    {
        switch (d) {
        case Dir::east: return {1.0, 0.0};
        case Dir::west: return {-1.0, 0.0};
        case Dir::north: return {0.0, 1.0};
        case Dir::south: return {0.0, -1.0};
        }
        return {};
    }

    const GridPtr& grid() const { return grid_; }
    double depth_shift() const { return shift_; }
    std::size_t size() const { return diag_.size(); }
    double diagonal(std::size_t k) const { return diag_[k]; }

    /// Face weight (already divided by h^2) towards direction d; 0 on shore faces.
    double face_weight(std::size_t k, Dir d) const { return weight_[4 * k + static_cast<std::size_t>(d)]; }

    void apply(std::span<const double> u, std::span<double> out) const
    {
        for (std::size_t k = 0; k < diag_.size(); ++k) {
            double s = diag_[k] * u[k];
            for (std::size_t d = 0; d < 4; ++d) {
                const int nb = neighbor_[4 * k + d];
                if (nb >= 0)
                    s += weight_[4 * k + d] * u[static_cast<std::size_t>(nb)];
            }
            out[k] = s;
        }
    }

    std::vector<double> apply(std::span<const double> u) const
    {
        std::vector<double> out(u.size());
        apply(u, out);
        return out;
    }

    /// Assembled copy of the operator, used by the factorized backend.
    Eigen::SparseMatrix<double> matrix() const
    {
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(5 * size());
        for (std::size_t k = 0; k < size(); ++k) {
            trip.emplace_back(static_cast<int>(k), static_cast<int>(k), diag_[k]);
            for (std::size_t d = 0; d < 4; ++d)
                if (neighbor_[4 * k + d] >= 0)
                    trip.emplace_back(static_cast<int>(k), neighbor_[4 * k + d], weight_[4 * k + d]);
        }
        Eigen::SparseMatrix<double> A(static_cast<int>(size()), static_cast<int>(size()));
        A.setFromTriplets(trip.begin(), trip.end());
        return A;
    }

private:
    // 8-point Gauss-Legendre on [0, 1].
    static constexpr std::array<double, 8> gauss_nodes{
        0.019855071751231912, 0.10166676129318664, 0.2372337950418355,  0.40828267875217511,
        0.59171732124782483,  0.7627662049581645,  0.89833323870681336, 0.98014492824876809};
    static constexpr std::array<double, 8> gauss_weights{
        0.050614268145188344, 0.11119051722668717, 0.15685332293894352, 0.18134189168918088,
        0.18134189168918088,  0.15685332293894352, 0.11119051722668717, 0.050614268145188344};

    GridPtr grid_;
    double shift_ = 0.0;
    std::vector<int> neighbor_;
    std::vector<double> weight_;
    std::vector<double> diag_;
};

inline WeightedLaplacian assemble(const WeightedPoissonProblem& problem)
{
    return WeightedLaplacian(problem.grid);
}

struct StreamSolution {
    GridPtr grid;
    ScalarField psi;
    /// Phi = Psi / phi^(a+1), with the denominator floored in the outermost ring.
    ScalarField phi_scaled;
    VectorField velocity;
    /// Cells where the floor was active; excluded from Phi-based reports.
    std::vector<std::uint8_t> flagged;
    double residual = 0.0;
    int iterations = 0;
};

/// Discrete energy 1/2 <(1/b) grad Psi, grad Psi> + <f, Psi> whose minimizer
/// solves div((1/b) grad Psi) = f.
inline double discrete_energy(const WeightedLaplacian& op, std::span<const double> psi, std::span<const double> f)
{
    const auto Apsi = op.apply(psi);
    double e = 0.0;
    for (std::size_t k = 0; k < psi.size(); ++k)
        e += -0.5 * psi[k] * Apsi[k] + f[k] * psi[k];
    return e * op.grid()->cell_area();
}

struct SolveOptions {
    double tol = 1e-10;
    /// 0 selects the default 20 * sqrt(cells).
    int max_iter = 0;
    std::span<const double> initial_guess = {};
    /// Called after every iteration with (iteration, current iterate).
    std::function<void(int, std::span<const double>)> on_iterate = {};
};

inline int default_max_iter(std::size_t cells)
{
    return static_cast<int>(std::ceil(20.0 * std::sqrt(static_cast<double>(cells))));
}

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k)
        s += a[k] * b[k];
    return s;
}

/// Common post-processing: Phi with the ring floor, then the velocity.
inline StreamSolution finish_solution(GridPtr grid, std::vector<double> psi, double residual, int iterations);

} // namespace detail

/// Solves -A psi = -f by Jacobi-preconditioned conjugate gradients, where A is
/// the (negative semidefinite) weighted Laplacian. Returns psi and the final
/// relative residual ||f - A psi|| / ||f||.
inline std::vector<double> pcg(const WeightedLaplacian& op, std::span<const double> f, const SolveOptions& opt,
                               double& residual, int& iterations)
{
    require(opt.tol > 0.0, ErrorKind::precondition, "solver tolerance must be positive");
    const std::size_t n = op.size();
    const int max_iter = opt.max_iter > 0 ? opt.max_iter : default_max_iter(n);
    std::vector<double> x(n, 0.0);
    if (!opt.initial_guess.empty())
        std::copy(opt.initial_guess.begin(), opt.initial_guess.end(), x.begin());

    const double fnorm = std::sqrt(detail::dot(f, f));
    iterations = 0;
    if (fnorm == 0.0) {
        std::fill(x.begin(), x.end(), 0.0);
        residual = 0.0;
        return x;
    }

    // Work with K = -A (SPD) and rhs g = -f.
    std::vector<double> r(n), z(n), p(n), Kp(n);
    op.apply(x, Kp);
    for (std::size_t k = 0; k < n; ++k)
        r[k] = -f[k] + Kp[k];
    double rnorm = std::sqrt(detail::dot(r, r));
    residual = rnorm / fnorm;
    if (residual <= opt.tol)
        return x;

    for (std::size_t k = 0; k < n; ++k)
        z[k] = r[k] / -op.diagonal(k);
    p = z;
    double rz = detail::dot(r, z);
    for (int it = 1; it <= max_iter; ++it) {
        op.apply(p, Kp);
        for (auto& v : Kp)
            v = -v;
        const double curvature = detail::dot(p, Kp);
        if (!(curvature > 0.0))
            throw SolverError("conjugate gradients met non-positive curvature: operator is not definite",
                              residual, it);
        const double alpha = rz / curvature;
        for (std::size_t k = 0; k < n; ++k) {
            x[k] += alpha * p[k];
            r[k] -= alpha * Kp[k];
        }
        iterations = it;
        if (opt.on_iterate)
            opt.on_iterate(it, x);
        rnorm = std::sqrt(detail::dot(r, r));
        residual = rnorm / fnorm;
        if (residual <= opt.tol)
            return x;
        for (std::size_t k = 0; k < n; ++k)
            z[k] = r[k] / -op.diagonal(k);
        const double rz_new = detail::dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t k = 0; k < n; ++k)
            p[k] = z[k] + beta * p[k];
    }
    throw SolverError("conjugate gradients did not converge: relative residual " + std::to_string(residual),
                      residual, max_iter);
}

inline StreamSolution solve(const WeightedPoissonProblem& problem, const SolveOptions& opt = {})
{
    require(problem.rhs.grid == problem.grid, ErrorKind::precondition, "rhs lives on a different grid");
    const WeightedLaplacian op = assemble(problem);
    double residual = 0.0;
    int iterations = 0;
    auto psi = pcg(op, problem.rhs.values, opt, residual, iterations);
    return detail::finish_solution(problem.grid, std::move(psi), residual, iterations);
}

inline StreamSolution solve(const WeightedPoissonProblem& problem, double tol, int max_iter)
{
    SolveOptions opt;
    opt.tol = tol;
    opt.max_iter = max_iter;
    return solve(problem, opt);
}

/// Sparse LDL^T factorization of the weighted Laplacian, factored once and
/// reused for every right-hand side (the transport loop solves the same
/// operator at every step).
class FactorizedStreamSolver {
public:
    explicit FactorizedStreamSolver(GridPtr grid, double depth_shift = 0.0) : op_(std::move(grid), depth_shift)
    {
        Eigen::SparseMatrix<double> K = -op_.matrix();
        chol_.compute(K);
        if (chol_.info() != Eigen::Success)
            throw SolverError("sparse factorization of the weighted Laplacian failed", 1.0, 0);
    }

    const WeightedLaplacian& op() const { return op_; }

    std::vector<double> solve_psi(std::span<const double> f, double& residual) const
    {
        const Eigen::Map<const Eigen::VectorXd> fv(f.data(), static_cast<Eigen::Index>(f.size()));
        Eigen::VectorXd psi = chol_.solve(-fv);
        std::vector<double> out(psi.data(), psi.data() + psi.size());
        const auto Apsi = op_.apply(out);
        double rr = 0.0;
        double ff = 0.0;
        for (std::size_t k = 0; k < f.size(); ++k) {
            rr += (Apsi[k] - f[k]) * (Apsi[k] - f[k]);
            ff += f[k] * f[k];
        }
        residual = ff > 0.0 ? std::sqrt(rr / ff) : 0.0;
        return out;
    }

    StreamSolution solve(std::span<const double> f) const
    {
        double residual = 0.0;
        auto psi = solve_psi(f, residual);
        return detail::finish_solution(op_.grid(), std::move(psi), residual, 1);
    }

private:
    WeightedLaplacian op_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> chol_;
};

/// Centered difference of cell values at cell k. Where a neighbor is unmasked
/// (or excluded by `usable`) the difference becomes one-sided; with a ghost
/// rule the missing value is ghost_sign * u_k instead.
template <class Usable>
Vec2 cell_gradient(const Grid& g, std::span<const double> u, std::size_t k, std::optional<double> ghost_sign,
                   Usable&& usable)
{
    auto value = [&](int nb) { return u[static_cast<std::size_t>(nb)]; };
    auto axis = [&](Dir plus, Dir minus) {
        int ip = g.neighbor(k, plus);
        int im = g.neighbor(k, minus);
        if (ip >= 0 && !usable(static_cast<std::size_t>(ip)))
            ip = -1;
        if (im >= 0 && !usable(static_cast<std::size_t>(im)))
            im = -1;
        const double uk = u[k];
        if (ghost_sign) {
            const double up = ip >= 0 ? value(ip) : *ghost_sign * uk;
            const double um = im >= 0 ? value(im) : *ghost_sign * uk;
            return (up - um) / (2.0 * g.h());
        }
        if (ip >= 0 && im >= 0)
            return (value(ip) - value(im)) / (2.0 * g.h());
        if (ip >= 0)
            return (value(ip) - uk) / g.h();
        if (im >= 0)
            return (uk - value(im)) / g.h();
        return 0.0;
    };
    return {axis(Dir::east, Dir::west), axis(Dir::north, Dir::south)};
}

inline Vec2 cell_gradient(const Grid& g, std::span<const double> u, std::size_t k,
                          std::optional<double> ghost_sign = std::nullopt)
{
    return cell_gradient(g, u, k, ghost_sign, [](std::size_t) { return true; });
}

/// Phi with flagged ring cells replaced by the mean of their unflagged
/// neighbors (the floored quotient is kept where no such neighbor exists).
inline std::vector<double> extended_profile(const StreamSolution& sol)
{
    const Grid& g = *sol.grid;
    std::vector<double> phi = sol.phi_scaled.values;
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (!sol.flagged[k])
            continue;
        auto [i, j] = g.cell(k);
        double acc = 0.0;
        int count = 0;
        for (int dj = -1; dj <= 1; ++dj) {
            for (int di = -1; di <= 1; ++di) {
                const int nb = g.index(i + di, j + dj);
                if (nb >= 0 && !sol.flagged[static_cast<std::size_t>(nb)]) {
                    acc += sol.phi_scaled[static_cast<std::size_t>(nb)];
                    ++count;
                }
            }
        }
        if (count > 0)
            phi[k] = acc / count;
    }
    return phi;
}

/// v = phi perp(grad_h Phi) + (a+1) Phi perp(grad phi). This form stays finite
/// at the shore where (1/b) perp(grad Psi) is 0/0. Flagged ring cells use the
/// extended Phi and never enter a neighbor's difference stencil.
inline VectorField recover_velocity(const StreamSolution& sol, const DepthProfile& profile)
{
    const Grid& g = *sol.grid;
    const double a = profile.exponent();
    const auto Phi = extended_profile(sol);
    auto usable = [&](std::size_t nb) { return sol.flagged[nb] == 0; };
    VectorField v(sol.grid);
    for (std::size_t k = 0; k < g.size(); ++k) {
        const Vec2 c = g.center(k);
        const Vec2 gPhi = cell_gradient(g, Phi, k, std::nullopt, usable);
        const Vec2 gphi = profile.defining().grad(c);
        v.set(k, g.phi(k) * perp(gPhi) + (a + 1.0) * Phi[k] * perp(gphi));
    }
    return v;
}

/// The direct form v = (1/b) perp(grad_h Psi) with the Dirichlet ghost rule.
inline VectorField stream_velocity(const StreamSolution& sol)
{
    const Grid& g = *sol.grid;
    VectorField v(sol.grid);
    for (std::size_t k = 0; k < g.size(); ++k)
        v.set(k, (1.0 / g.depth(k)) * perp(cell_gradient(g, sol.psi.values, k, -1.0)));
    return v;
}

namespace detail {

inline StreamSolution finish_solution(GridPtr grid, std::vector<double> psi, double residual, int iterations)
{
    const Grid& g = *grid;
    const double a = g.profile().exponent();
    const double gmin = BoundaryChart::for_grid(g).gradient_floor(128);
    const double ring = g.h() * gmin / 4.0;
    const double floor = std::pow(ring, a + 1.0);

    StreamSolution sol;
    sol.grid = grid;
    sol.psi = ScalarField(grid, std::move(psi));
    sol.phi_scaled = ScalarField(grid);
    sol.flagged.assign(g.size(), 0);
    for (std::size_t k = 0; k < g.size(); ++k) {
        const double denom = std::pow(g.phi(k), a + 1.0);
        if (g.phi(k) < ring)
            sol.flagged[k] = 1;
        sol.phi_scaled[k] = sol.psi[k] / std::max(denom, floor);
    }
    sol.residual = residual;
    sol.iterations = iterations;
    sol.velocity = recover_velocity(sol, g.profile());
    return sol;
}

} // namespace detail

/// max over n_samples shore points of |v . n|, n = -nu the outward normal.
/// v is sampled at x_n = 2h and 3h along the inward normal and linearly
/// extrapolated to x_n = 0.
inline double normal_trace_residual(const VectorField& v, const BoundaryChart& chart, int n_samples)
{
    const Grid& g = *v.grid;
    const double x1 = 2.0 * g.h();
    const double x2 = 3.0 * g.h();
    require(x2 <= chart.collar_width(), ErrorKind::precondition, "collar narrower than the trace stencil");
    double worst = 0.0;
    for (int s = 0; s < n_samples; ++s) {
        const double xp = 2.0 * std::numbers::pi * (s + 0.5) / n_samples;
        const Vec2 n = -1.0 * chart.normal(xp);
        const Vec2 p1 = chart.point(xp, x1);
        const Vec2 p2 = chart.point(xp, x2);
        const Vec2 v1{interpolate(g, v.v1, p1), interpolate(g, v.v2, p1)};
        const Vec2 v2{interpolate(g, v.v1, p2), interpolate(g, v.v2, p2)};
        const Vec2 v0 = v1 + (x1 / (x2 - x1)) * (v1 - v2);
        worst = std::max(worst, std::abs(dot(v0, n)));
    }
    return worst;
}

/// Per-cell Frobenius norm |grad v| from cell differences of both components.
inline std::vector<double> velocity_gradient_magnitude(const VectorField& v)
{
    const Grid& g = *v.grid;
    std::vector<double> out(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
        const Vec2 g1 = cell_gradient(g, v.v1, k);
        const Vec2 g2 = cell_gradient(g, v.v2, k);
        out[k] = std::sqrt(dot(g1, g1) + dot(g2, g2));
    }
    return out;
}

/// r(p) = (1/p) ||grad v||_p / (||f||_p + ||b v||_2).
inline double lp_gradient_ratio(const StreamSolution& sol, const WeightedPoissonProblem& problem, double p)
{
    require(p >= 2.0, ErrorKind::precondition, "lp_gradient_ratio requires p >= 2");
    const Grid& g = *sol.grid;
    const auto grad = velocity_gradient_magnitude(sol.velocity);
    std::vector<double> bv(g.size());
    for (std::size_t k = 0; k < g.size(); ++k)
        bv[k] = g.depth(k) * norm(sol.velocity[k]);
    const double denom = lp_norm(problem.rhs.values, g.cell_area(), p) + lp_norm(bv, g.cell_area(), 2.0);
    if (!(denom > 0.0))
        fail(ErrorKind::numerical, "undefined gradient ratio: zero data and zero field");
    return lp_norm(grad, g.cell_area(), p) / (p * denom);
}

} // namespace lake
