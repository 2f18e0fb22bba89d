#pragma once

// Viscous regularized vorticity transport
//   d/dt (b_eps w) + b v . grad w - eps div(b_eps grad w) = 0,  w = 0 on the shore (eps > 0),
//   div((1/b) grad Psi) = -b_eps w,  b v = perp(grad Psi),  b_eps = b + eps,
// by a finite-volume scheme on the conserved variable b_eps w. Face fluxes of
// b v are differences of Psi at cell corners, so their divergence vanishes
// exactly and no flux crosses the shore.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "lake/elliptic.hpp"
#include "lake/error.hpp"
#include "lake/geometry.hpp"
#include "lake/norms.hpp"
#include "lake/parallel.hpp"

namespace lake {

struct TransportConfig {
    double cfl = 0.9;
    double end_time = 1.0;
    double viscosity = 0.0;
    std::optional<double> truncation;
    double output_every = 0.1;
    /// Use 1/(b + eps) instead of 1/b in the elliptic weight.
    bool shifted_elliptic = false;
    int threads = 1;
    /// Abort when a step would be shorter than this fraction of end_time.
    double min_dt_fraction = 1e-12;

    void validate() const
    {
        require(cfl > 0.0 && cfl <= 1.0, ErrorKind::config_validation, "cfl must lie in (0, 1]");
        require(end_time > 0.0 && std::isfinite(end_time), ErrorKind::config_validation,
                "end time must be positive");
        require(viscosity >= 0.0 && std::isfinite(viscosity), ErrorKind::config_validation,
                "viscosity must be non-negative");
        require(!truncation || *truncation > 0.0, ErrorKind::config_validation, "truncation R must be positive");
        require(output_every > 0.0, ErrorKind::config_validation, "output cadence must be positive");
    }
};

struct VorticityState {
    ScalarField omega;
    double time = 0.0;
    double viscosity = 0.0;
};

/// T_R(w) = max(min(w, R), -R).
inline ScalarField truncate(const ScalarField& omega, double R)
{
    require(R > 0.0, ErrorKind::precondition, "truncation level R must be positive");
    ScalarField out = omega;
    for (double& w : out.values)
        w = std::clamp(w, -R, R);
    return out;
}

/// (sum w_k |omega_k|^p h^2)^(1/p), or max |omega| for p = infinity.
inline double weighted_norm(std::span<const double> omega, std::span<const double> weight, double area, double p)
{
    return lp_norm(omega, area, p, weight);
}

/// L^p(b dx) norm with b at the cell centers.
inline double weighted_norm(const ScalarField& omega, double p)
{
    const Grid& g = *omega.grid;
    return weighted_norm(omega.values, g.depth_values(), g.cell_area(), p);
}

/// Fixed operators of the scheme on one grid: factorized elliptic solve,
/// cell-mean depths for the conserved variable and face depths for diffusion.
class TransportContext {
public:
    TransportContext(GridPtr grid, double viscosity, bool shifted_elliptic = false, int threads = 1)
        : grid_(std::move(grid)),
          eps_(viscosity),
          threads_(threads),
          solver_(grid_, shifted_elliptic ? viscosity : 0.0)
    {
        require(viscosity >= 0.0, ErrorKind::config_validation, "viscosity must be non-negative");
        const Grid& g = *grid_;
        const auto& prof = g.profile();
        mass_.resize(g.size());
        rhs_depth_.resize(g.size());
        face_depth_.resize(4 * g.size());
        // Cell means of b from a 4 x 4 Gauss rule; b = 0 outside Omega.
        static constexpr std::array<double, 4> gx{0.069431844202973712, 0.33000947820757187,
                                                  0.66999052179242813, 0.93056815579702629};
        static constexpr std::array<double, 4> gw{0.17392742256872693, 0.32607257743127307,
                                                  0.32607257743127307, 0.17392742256872693};
        for (std::size_t k = 0; k < g.size(); ++k) {
            const Vec2 c = g.center(k);
            double m = 0.0;
            for (std::size_t p = 0; p < 4; ++p)
                for (std::size_t q = 0; q < 4; ++q)
                    m += gw[p] * gw[q] * prof(c + Vec2{(gx[p] - 0.5) * g.h(), (gx[q] - 0.5) * g.h()});
            mass_[k] = m + eps_;
            rhs_depth_[k] = g.depth(k) + eps_;
            for (Dir d : all_dirs)
                face_depth_[slot(k, d)] = prof(c + 0.5 * g.h() * WeightedLaplacian::unit(d)) + eps_;
        }
    }

    const GridPtr& grid() const { return grid_; }
    double viscosity() const { return eps_; }
    /// Cell mean of b_eps; the conserved quantity is sum mass_k w_k h^2.
    std::span<const double> mass_weights() const { return mass_; }
    const FactorizedStreamSolver& solver() const { return solver_; }

    std::vector<double> elliptic_rhs(std::span<const double> omega) const
    {
        std::vector<double> f(omega.size());
        for (std::size_t k = 0; k < f.size(); ++k)
            f[k] = -rhs_depth_[k] * omega[k];
        return f;
    }

    std::vector<double> stream_function(std::span<const double> omega) const
    {
        double residual = 0.0;
        auto psi = solver_.solve_psi(elliptic_rhs(omega), residual);
        if (!(residual <= 1e-8))
            throw SolverError("stream function solve lost accuracy", residual, 1);
        return psi;
    }

    StreamSolution stream_solution(std::span<const double> omega) const
    {
        return solver_.solve(elliptic_rhs(omega));
    }

    /// Outward face fluxes of b v, four per cell, from Psi at cell corners.
    /// A corner takes the mean of its four cells when all are interior and 0
    /// otherwise, so shore faces carry no flux.
    std::vector<double> face_fluxes(std::span<const double> psi) const
    {
        const Grid& g = *grid_;
        auto corner = [&](int I, int J) {
            const int c00 = g.index(I - 1, J - 1);
            const int c10 = g.index(I, J - 1);
            const int c01 = g.index(I - 1, J);
            const int c11 = g.index(I, J);
            if (c00 < 0 || c10 < 0 || c01 < 0 || c11 < 0)
                return 0.0;
            return 0.25
                * (psi[static_cast<std::size_t>(c00)] + psi[static_cast<std::size_t>(c10)]
                   + psi[static_cast<std::size_t>(c01)] + psi[static_cast<std::size_t>(c11)]);
        };
        std::vector<double> U(4 * g.size());
        for (std::size_t k = 0; k < g.size(); ++k) {
            const auto [i, j] = g.cell(k);
            const double sw = corner(i, j);
            const double se = corner(i + 1, j);
            const double nw = corner(i, j + 1);
            const double ne = corner(i + 1, j + 1);
            U[slot(k, Dir::east)] = ne - se;
            U[slot(k, Dir::west)] = sw - nw;
            U[slot(k, Dir::north)] = nw - ne;
            U[slot(k, Dir::south)] = se - sw;
        }
        return U;
    }

    /// Largest dt for which the update is a convex combination of old values:
    /// min_k mass_k h^2 / (outflow_k + eps (interior face depths + 2 shore face depths)).
    double stable_dt(std::span<const double> U) const
    {
        const Grid& g = *grid_;
        double dt = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < g.size(); ++k) {
            double rate = 0.0;
            for (Dir d : all_dirs) {
                rate += std::max(U[slot(k, d)], 0.0);
                if (eps_ > 0.0)
                    rate += eps_ * face_depth_[slot(k, d)] * (g.neighbor(k, d) >= 0 ? 1.0 : 2.0);
            }
            if (rate > 0.0)
                dt = std::min(dt, mass_[k] * g.cell_area() / rate);
        }
        return dt;
    }

    /// One forward Euler step of size dt with upwind advection and centered diffusion.
    std::vector<double> advance(std::span<const double> omega, std::span<const double> U, double dt) const
    {
        const Grid& g = *grid_;
        const double lam = dt / g.cell_area();
        std::vector<double> out(omega.size());
        parallel_for(g.size(), threads_, [&](std::size_t k) {
            const double wk = omega[k];
            double q = mass_[k] * wk;
            for (Dir d : all_dirs) {
                const int nb = g.neighbor(k, d);
                const double flux = U[slot(k, d)];
                if (nb >= 0) {
                    const double wn = omega[static_cast<std::size_t>(nb)];
                    q -= lam * flux * (flux > 0.0 ? wk : wn);
                    if (eps_ > 0.0)
                        q += lam * eps_ * face_depth_[slot(k, d)] * (wn - wk);
                } else if (eps_ > 0.0) {
                    q -= lam * eps_ * face_depth_[slot(k, d)] * 2.0 * wk;
                }
            }
            out[k] = q / mass_[k];
        });
        return out;
    }

    /// sum mass_k w_k h^2.
    double mass(std::span<const double> omega) const
    {
        double s = 0.0;
        for (std::size_t k = 0; k < omega.size(); ++k)
            s += mass_[k] * omega[k];
        return s * grid_->cell_area();
    }

private:
    static std::size_t slot(std::size_t k, Dir d) { return 4 * k + static_cast<std::size_t>(d); }

    GridPtr grid_;
    double eps_;
    int threads_;
    FactorizedStreamSolver solver_;
    std::vector<double> mass_;
    std::vector<double> rhs_depth_;
    std::vector<double> face_depth_;
};

/// Raised when the time step collapses; carries the last valid state.
class TransportAbort : public NumericalError {
public:
    TransportAbort(const std::string& what, double dt, VorticityState last)
        : NumericalError(what, dt), last_(std::move(last))
    {
    }
    const VorticityState& last_state() const { return last_; }

private:
    VorticityState last_;
};

/// Advances one step of size min(cfl * stable dt, dt_cap).
inline VorticityState step(const VorticityState& state, const TransportConfig& config, const TransportContext& ctx,
                           double dt_cap = std::numeric_limits<double>::infinity())
{
    const auto psi = ctx.stream_function(state.omega.values);
    const auto U = ctx.face_fluxes(psi);
    const double dt = std::min(config.cfl * ctx.stable_dt(U), dt_cap);
    if (!(dt >= config.min_dt_fraction * config.end_time) || !std::isfinite(dt))
        throw TransportAbort("time step underflow (velocity blow-up)", dt, state);
    VorticityState next{ScalarField(state.omega.grid, ctx.advance(state.omega.values, U, dt)), state.time + dt,
                        state.viscosity};
    return next;
}

struct TrajectoryRecord {
    double time = 0.0;
    int steps = 0;
    /// sum mass_k w_k h^2 with the cell-mean b_eps weights of the scheme.
    double mass = 0.0;
    /// L^p norms for p = 1, 2, 4, infinity, weighted by b and by b_eps (cell means).
    std::array<double, 4> norm_b{};
    std::array<double, 4> norm_beps{};
    /// ||b^(1/p) T_R(w)||_p for p = 2, 4 (b weights), when R is set.
    std::array<double, 2> truncated_b{};
    std::array<double, 2> truncated_beps{};
    double max_abs = 0.0;
    double energy = 0.0;  ///< ||sqrt(b) v||^2_L2
    double trace_residual = 0.0;
};

struct Trajectory {
    std::vector<TrajectoryRecord> records;
    std::vector<VorticityState> snapshots;
    std::vector<VectorField> velocities;
};

inline constexpr std::array<double, 4> recorded_p{1.0, 2.0, 4.0, infinity};

inline TrajectoryRecord record_state(const VorticityState& s, const TransportContext& ctx,
                                     const TransportConfig& config, const VectorField& v, int steps)
{
    const Grid& g = *ctx.grid();
    std::vector<double> wb(g.size());
    const auto wbe = ctx.mass_weights();
    for (std::size_t k = 0; k < g.size(); ++k)
        wb[k] = wbe[k] - ctx.viscosity();
    TrajectoryRecord r;
    r.time = s.time;
    r.steps = steps;
    r.mass = ctx.mass(s.omega.values);
    for (std::size_t i = 0; i < recorded_p.size(); ++i) {
        r.norm_b[i] = weighted_norm(s.omega.values, wb, g.cell_area(), recorded_p[i]);
        r.norm_beps[i] = weighted_norm(s.omega.values, wbe, g.cell_area(), recorded_p[i]);
    }
    if (config.truncation) {
        const auto tr = truncate(s.omega, *config.truncation);
        for (std::size_t i = 0; i < 2; ++i) {
            r.truncated_b[i] = weighted_norm(tr.values, wb, g.cell_area(), recorded_p[i + 1]);
            r.truncated_beps[i] = weighted_norm(tr.values, wbe, g.cell_area(), recorded_p[i + 1]);
        }
    }
    r.max_abs = 0.0;
    for (double w : s.omega.values)
        r.max_abs = std::max(r.max_abs, std::abs(w));
    double e = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k)
        e += g.depth(k) * dot(v[k], v[k]);
    r.energy = e * g.cell_area();
    r.trace_residual = normal_trace_residual(v, BoundaryChart::for_grid(g), 64);
    return r;
}

/// Runs to config.end_time, recording at every multiple of output_every and at the end.
inline Trajectory simulate(const ScalarField& omega0, const TransportConfig& config,
                           const TransportContext& ctx)
{
    config.validate();
    require(omega0.grid == ctx.grid(), ErrorKind::configuration, "initial vorticity lives on another grid");
    for (double w : omega0.values)
        require(std::isfinite(w), ErrorKind::config_validation, "initial vorticity must be finite");
    require(std::abs(config.viscosity - ctx.viscosity()) <= 0.0, ErrorKind::configuration,
            "transport context was built for another viscosity");

    Trajectory traj;
    VorticityState s{omega0, 0.0, config.viscosity};
    int steps = 0;
    auto snapshot = [&] {
        const auto sol = ctx.stream_solution(s.omega.values);
        traj.records.push_back(record_state(s, ctx, config, sol.velocity, steps));
        traj.snapshots.push_back(s);
        traj.velocities.push_back(sol.velocity);
    };
    snapshot();
    const auto n_out = static_cast<long>(std::ceil(config.end_time / config.output_every - 1e-9));
    for (long q = 1; q <= n_out; ++q) {
        const double target = std::min(config.end_time, static_cast<double>(q) * config.output_every);
        while (s.time < target) {
            const double remaining = target - s.time;
            s = step(s, config, ctx, remaining);
            if (target - s.time <= 1e-12 * config.end_time)
                s.time = target;
            ++steps;
        }
        snapshot();
    }
    return traj;
}

inline Trajectory simulate(const ScalarField& omega0, const TransportConfig& config)
{
    const TransportContext ctx(omega0.grid, config.viscosity, config.shifted_elliptic, config.threads);
    return simulate(omega0, config, ctx);
}

} // namespace lake
