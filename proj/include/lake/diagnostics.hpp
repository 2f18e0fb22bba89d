#pragma once

// Reports built on solved fields and trajectories: Hoelder quotients, the
// L^p gradient constant sweep, and the Osgood envelope for the difference of
// two runs.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "lake/elliptic.hpp"
#include "lake/error.hpp"
#include "lake/geometry.hpp"
#include "lake/norms.hpp"
#include "lake/transport.hpp"

namespace lake {

using PointPair = std::pair<Vec2, Vec2>;

struct HolderEstimate {
    double mu = 0.5;
    double quotient = 0.0;
};

/// Uniform random pairs of points with phi > margin, from a seeded generator.
inline std::vector<PointPair> random_pairs(const DefiningFunction& phi, std::size_t count, unsigned long long seed,
                                           double margin = 0.0)
{
    const Box e = phi.extent();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(e.xmin, e.xmax);
    std::uniform_real_distribution<double> uy(e.ymin, e.ymax);
    auto draw = [&] {
        for (int it = 0; it < 100000; ++it) {
            const Vec2 p{ux(rng), uy(rng)};
            if (phi(p) > margin)
                return p;
        }
        fail(ErrorKind::configuration, "random_pairs: no interior point found");
    };
    std::vector<PointPair> pairs;
    pairs.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const Vec2 p = draw();
        pairs.emplace_back(p, draw());
    }
    return pairs;
}

/// max over pairs of |u(x) - u(y)| / |x - y|^mu for a field given pointwise.
inline HolderEstimate holder_quotient(const std::function<double(Vec2)>& u, double mu,
                                      std::span<const PointPair> pairs)
{
    require(mu > 0.0 && mu < 1.0, ErrorKind::precondition, "Hoelder exponent must lie in (0, 1)");
    HolderEstimate est{mu, 0.0};
    for (const auto& [x, y] : pairs) {
        const double d = norm(x - y);
        if (!(d > 0.0))
            continue;
        const double ux = u(x);
        const double uy = u(y);
        if (std::isnan(ux) || std::isnan(uy))
            continue;
        est.quotient = std::max(est.quotient, std::abs(ux - uy) / std::pow(d, mu));
    }
    return est;
}

/// Same for cell values, bilinearly interpolated.
inline HolderEstimate holder_quotient(const ScalarField& field, double mu, std::span<const PointPair> pairs)
{
    const Grid& g = *field.grid;
    return holder_quotient([&](Vec2 p) { return interpolate(g, field.values, p); }, mu, pairs);
}

struct GradientConstantFit {
    std::vector<double> p_values;
    /// ||grad v||_p / (p ||b w||_p) for each p.
    std::vector<double> ratios;
    double constant = 0.0;  ///< max over p
    double low_max = 0.0;   ///< max over p <= 8
    bool uniform = false;   ///< constant <= 1.5 low_max
};

/// Sweep of ||grad v||_p / (p ||b w||_p), where b w is the elliptic data.
inline GradientConstantFit fit_gradient_constant(const StreamSolution& sol, std::span<const double> bw,
                                                 std::span<const double> p_list)
{
    require(!p_list.empty(), ErrorKind::precondition, "empty p list");
    const Grid& g = *sol.grid;
    const auto grad = velocity_gradient_magnitude(sol.velocity);
    GradientConstantFit fit;
    for (double p : p_list) {
        require(p >= 3.0 && p <= 64.0, ErrorKind::precondition, "gradient sweep needs p in [3, 64]");
        const double den = lp_norm(bw, g.cell_area(), p);
        if (!(den > 0.0))
            fail(ErrorKind::numerical, "gradient constant undefined: ||b w||_p vanishes");
        const double r = lp_norm(grad, g.cell_area(), p) / (p * den);
        fit.p_values.push_back(p);
        fit.ratios.push_back(r);
        fit.constant = std::max(fit.constant, r);
        if (p <= 8.0)
            fit.low_max = std::max(fit.low_max, r);
    }
    fit.uniform = fit.low_max > 0.0 ? fit.constant <= 1.5 * fit.low_max : false;
    return fit;
}

/// sup over p of (1/p) ||grad v||_p, the constant of the Osgood inequality.
inline double gradient_growth_constant(const VectorField& v, std::span<const double> p_list)
{
    const Grid& g = *v.grid;
    const auto grad = velocity_gradient_magnitude(v);
    double c = 0.0;
    for (double p : p_list)
        c = std::max(c, lp_norm(grad, g.cell_area(), p) / p);
    return c;
}

struct EnvelopeValue {
    double value = 0.0;
    /// t is past u0^2 / (2 e C): the bound has reached M^2 and says nothing.
    bool saturated = false;
};

/// Solution of y' = e C y / ln(M^2 / y), y(0) = y0:
/// y(t) = M^2 exp(-sqrt(u0^2 - 2 e C t)), u0 = ln(M^2 / y0). y0 = 0 gives 0.
inline EnvelopeValue osgood_envelope(double y0, double M, double C, double t)
{
    require(M > 0.0 && C >= 0.0 && t >= 0.0, ErrorKind::precondition, "envelope needs M > 0, C >= 0, t >= 0");
    require(y0 >= 0.0 && y0 < M * M, ErrorKind::precondition, "envelope needs 0 <= y0 < M^2");
    if (y0 == 0.0)
        return {0.0, false};
    const double u0 = std::log(M * M / y0);
    const double disc = u0 * u0 - 2.0 * std::numbers::e * C * t;
    if (disc <= 0.0)
        return {M * M, true};
    return {M * M * std::exp(-std::sqrt(disc)), false};
}

/// ||sqrt(b) (v_A - v_B)||^2_L2.
inline double velocity_gap(const VectorField& va, const VectorField& vb)
{
    require(va.grid == vb.grid || (va.grid->size() == vb.grid->size() && va.grid->h() == vb.grid->h()),
            ErrorKind::configuration, "velocity fields live on different grids");
    const Grid& g = *va.grid;
    double s = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const Vec2 d = va[k] - vb[k];
        s += g.depth(k) * dot(d, d);
    }
    return s * g.cell_area();
}

/// Largest sqrt(b) |v| over cells, and its 99.9th percentile.
inline std::pair<double, double> weighted_speed_max(const VectorField& v)
{
    const Grid& g = *v.grid;
    std::vector<double> s(g.size());
    for (std::size_t k = 0; k < g.size(); ++k)
        s[k] = std::sqrt(g.depth(k)) * norm(v[k]);
    if (s.empty())
        return {0.0, 0.0};
    auto sorted = s;
    std::sort(sorted.begin(), sorted.end());
    const auto idx = static_cast<std::size_t>(std::floor(0.999 * static_cast<double>(sorted.size() - 1)));
    return {sorted.back(), sorted[idx]};
}

struct UniquenessReport {
    std::vector<double> times;
    std::vector<double> gap;       ///< y(t)
    std::vector<double> envelope;  ///< envelope(y(0) + tol, M, C, t)
    std::vector<bool> saturated;
    double M = 0.0;
    double M_percentile = 0.0;  ///< same with 99.9th percentiles
    double C = 0.0;
    double slack = 10.0;
    bool pass = false;
};

/// Compares y(t) = ||sqrt(b)(v_A - v_B)||^2 with the Osgood envelope started at
/// y(0) + tol. M = max_t max sqrt(b)|v_A| + max_t max sqrt(b)|v_B|;
/// C = sup over snapshots and p of (1/p) ||grad v_A||_p.
inline UniquenessReport uniqueness_report(const Trajectory& a, const Trajectory& b, std::span<const double> p_list,
                                          double slack = 10.0, double tol = 0.0)
{
    require(!a.velocities.empty() && a.velocities.size() == b.velocities.size(), ErrorKind::configuration,
            "runs have different numbers of snapshots");
    for (std::size_t i = 0; i < a.velocities.size(); ++i) {
        const Grid& ga = *a.velocities[i].grid;
        const Grid& gb = *b.velocities[i].grid;
        require(ga.size() == gb.size() && ga.h() == gb.h() && ga.nx() == gb.nx() && ga.ny() == gb.ny(),
                ErrorKind::configuration, "runs use different grids");
        require(std::abs(a.records[i].time - b.records[i].time) <= 1e-12 * std::max(1.0, a.records[i].time),
                ErrorKind::configuration, "runs were recorded at different times");
    }
    UniquenessReport rep;
    rep.slack = slack;
    double ma = 0.0, mb = 0.0, pa = 0.0, pb = 0.0;
    for (std::size_t i = 0; i < a.velocities.size(); ++i) {
        const auto [xa, qa] = weighted_speed_max(a.velocities[i]);
        const auto [xb, qb] = weighted_speed_max(b.velocities[i]);
        ma = std::max(ma, xa);
        mb = std::max(mb, xb);
        pa = std::max(pa, qa);
        pb = std::max(pb, qb);
        rep.C = std::max(rep.C, gradient_growth_constant(a.velocities[i], p_list));
        rep.times.push_back(a.records[i].time);
        rep.gap.push_back(velocity_gap(a.velocities[i], b.velocities[i]));
    }
    rep.M = ma + mb;
    rep.M_percentile = pa + pb;
    rep.pass = true;
    const double y0 = rep.gap.front() + tol;
    for (std::size_t i = 0; i < rep.times.size(); ++i) {
        EnvelopeValue env{0.0, false};
        if (rep.M > 0.0 && y0 < rep.M * rep.M)
            env = osgood_envelope(y0, rep.M, rep.C, rep.times[i]);
        else
            env = {rep.M * rep.M, true};
        rep.envelope.push_back(env.value);
        rep.saturated.push_back(env.saturated);
        if (!(rep.gap[i] <= slack * env.value))
            rep.pass = false;
    }
    return rep;
}

/// Smooth random field: a sum of `modes` Gaussian bumps with centers inside
/// Omega, widths in [0.2, 0.5] and standard normal amplitudes.
inline ScalarField random_smooth_field(const GridPtr& grid, unsigned long long seed, int modes = 6)
{
    const auto centers = random_pairs(grid->defining(), static_cast<std::size_t>(modes), seed);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> amp(0.0, 1.0);
    std::uniform_real_distribution<double> width(0.2, 0.5);
    struct Bump {
        Vec2 c;
        double a;
        double s;
    };
    std::vector<Bump> bumps;
    for (const auto& pr : centers)
        bumps.push_back({pr.first, amp(rng), width(rng)});
    return sample(grid, [&](Vec2 p) {
        double v = 0.0;
        for (const auto& b : bumps) {
            const Vec2 d = p - b.c;
            v += b.a * std::exp(-dot(d, d) / (2.0 * b.s * b.s));
        }
        return v;
    });
}

} // namespace lake
