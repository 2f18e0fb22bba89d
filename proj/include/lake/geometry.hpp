#pragma once

// Domain description for the lake problem: the shore-defining function phi,
// the degenerate depth b = phi^a, the masked Cartesian grid that discretizes
// Omega = {phi > 0}, and the boundary collar chart gamma(x') + x_n nu(x').

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lake/error.hpp"

namespace lake {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    friend constexpr bool operator==(Vec2, Vec2) = default;
};

inline constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
/// Rotated gradient convention used throughout: perp(u) = (u_y, -u_x).
inline constexpr Vec2 perp(Vec2 g) { return {g.y, -g.x}; }

/// Symmetric 2x2 matrix (xx, xy, yy).
struct Sym2 {
    double xx = 0.0;
    double xy = 0.0;
    double yy = 0.0;
};

struct Box {
    double xmin = -1.0;
    double xmax = 1.0;
    double ymin = -1.0;
    double ymax = 1.0;

    bool contains(Vec2 p) const { return p.x >= xmin && p.x <= xmax && p.y >= ymin && p.y <= ymax; }
};

/// Bivariate polynomial phi(x, y) = sum c * x^px * y^py with exact derivatives.
class DefiningFunction {
public:
    struct Term {
        int px = 0;
        int py = 0;
        double coeff = 0.0;
    };

    DefiningFunction() = default;
    DefiningFunction(std::string name, std::vector<Term> terms, Box extent, Vec2 center = {})
        : name_(std::move(name)), terms_(std::move(terms)), extent_(extent), center_(center)
    {
        for (const auto& t : terms_)
            require(t.px >= 0 && t.py >= 0, ErrorKind::config_validation,
                    "polynomial exponents must be non-negative");
    }

    /// phi = 1 - x^2 - y^2.
    static DefiningFunction unit_disk()
    {
        return {"disk", {{0, 0, 1.0}, {2, 0, -1.0}, {0, 2, -1.0}}, Box{-1.0, 1.0, -1.0, 1.0}};
    }

    /// phi = 1 - (x/ax)^2 - (y/ay)^2.
    static DefiningFunction ellipse(double ax, double ay)
    {
        require(ax > 0.0 && ay > 0.0, ErrorKind::config_validation, "ellipse semi-axes must be positive");
        return {"ellipse",
                {{0, 0, 1.0}, {2, 0, -1.0 / (ax * ax)}, {0, 2, -1.0 / (ay * ay)}},
                Box{-ax, ax, -ay, ay}};
    }

    double operator()(Vec2 p) const { return eval(p); }

    double eval(Vec2 p) const
    {
        double s = 0.0;
        for (const auto& t : terms_)
            s += t.coeff * ipow(p.x, t.px) * ipow(p.y, t.py);
        return s;
    }

    Vec2 grad(Vec2 p) const
    {
        Vec2 g;
        for (const auto& t : terms_) {
            if (t.px > 0)
                g.x += t.coeff * t.px * ipow(p.x, t.px - 1) * ipow(p.y, t.py);
            if (t.py > 0)
                g.y += t.coeff * t.py * ipow(p.x, t.px) * ipow(p.y, t.py - 1);
        }
        return g;
    }

    Sym2 hess(Vec2 p) const
    {
        Sym2 H;
        for (const auto& t : terms_) {
            if (t.px > 1)
                H.xx += t.coeff * t.px * (t.px - 1) * ipow(p.x, t.px - 2) * ipow(p.y, t.py);
            if (t.px > 0 && t.py > 0)
                H.xy += t.coeff * t.px * t.py * ipow(p.x, t.px - 1) * ipow(p.y, t.py - 1);
            if (t.py > 1)
                H.yy += t.coeff * t.py * (t.py - 1) * ipow(p.x, t.px) * ipow(p.y, t.py - 2);
        }
        return H;
    }

    const std::string& name() const { return name_; }
    std::span<const Term> terms() const { return terms_; }
    /// A box known to contain Omega.
    Box extent() const { return extent_; }
    /// Interior point from which the shore is star-shaped (used by the chart).
    Vec2 center() const { return center_; }

private:
    static double ipow(double v, int k)
    {
        double r = 1.0;
        for (int i = 0; i < k; ++i)
            r *= v;
        return r;
    }

    std::string name_ = "none";
    std::vector<Term> terms_;
    Box extent_;
    Vec2 center_;
};

/// b = max(phi, 0)^a. An exponent of zero is the unit-depth override (b = 1 in Omega).
class DepthProfile {
public:
    DepthProfile(DefiningFunction phi, double a) : phi_(std::move(phi)), a_(a)
    {
        require(a >= 0.0 && std::isfinite(a), ErrorKind::config_validation,
                "depth exponent a must be finite and non-negative");
    }

    const DefiningFunction& defining() const { return phi_; }
    double exponent() const { return a_; }

    double operator()(Vec2 p) const { return depth_from_phi(phi_(p)); }

    double depth_from_phi(double phi_value) const
    {
        if (phi_value <= 0.0)
            return 0.0;
        return a_ == 0.0 ? 1.0 : std::pow(phi_value, a_);
    }

private:
    DefiningFunction phi_;
    double a_;
};

inline double eval_depth(const DepthProfile& profile, Vec2 x) { return profile(x); }

enum class Dir : std::uint8_t { east = 0, west = 1, north = 2, south = 3 };
inline constexpr std::array<Dir, 4> all_dirs{Dir::east, Dir::west, Dir::north, Dir::south};

/// Uniform cell-centred grid over a box with an interior mask {phi(center) > 0}.
/// Unknowns are numbered over masked cells only, row-major in (j, i).
class Grid {
public:
    Grid(DepthProfile profile, double h, Box box) : profile_(std::move(profile)), h_(h), box_(box)
    {
        require(h > 0.0 && std::isfinite(h), ErrorKind::config_validation, "grid spacing h must be positive");
        require(box.xmax > box.xmin && box.ymax > box.ymin, ErrorKind::config_validation,
                "bounding box must have positive extent");
        nx_ = static_cast<int>(std::ceil((box.xmax - box.xmin) / h - 1e-9));
        ny_ = static_cast<int>(std::ceil((box.ymax - box.ymin) / h - 1e-9));
        unknown_.assign(static_cast<std::size_t>(nx_) * ny_, -1);
        for (int j = 0; j < ny_; ++j) {
            for (int i = 0; i < nx_; ++i) {
                const Vec2 c = center(i, j);
                const double ph = profile_.defining()(c);
                if (ph > 0.0) {
                    unknown_[flat(i, j)] = static_cast<int>(cells_.size());
                    cells_.push_back({i, j});
                    phi_.push_back(ph);
                    depth_.push_back(profile_.depth_from_phi(ph));
                }
            }
        }
        require(!cells_.empty(), ErrorKind::configuration, "empty interior: no cell center has phi > 0");
    }

    const DepthProfile& profile() const { return profile_; }
    const DefiningFunction& defining() const { return profile_.defining(); }
    double h() const { return h_; }
    Box box() const { return box_; }
    int nx() const { return nx_; }
    int ny() const { return ny_; }
    /// Number of interior (masked) cells.
    std::size_t size() const { return cells_.size(); }

    Vec2 center(int i, int j) const { return {box_.xmin + (i + 0.5) * h_, box_.ymin + (j + 0.5) * h_}; }
    Vec2 center(std::size_t k) const { return center(cells_[k][0], cells_[k][1]); }
    std::array<int, 2> cell(std::size_t k) const { return cells_[k]; }

    bool masked(int i, int j) const { return index(i, j) >= 0; }

    /// Unknown index of cell (i, j), or -1 when outside the box or the mask.
    int index(int i, int j) const
    {
        if (i < 0 || j < 0 || i >= nx_ || j >= ny_)
            return -1;
        return unknown_[flat(i, j)];
    }

    int neighbor(std::size_t k, Dir d) const
    {
        auto [i, j] = cells_[k];
        switch (d) {
        case Dir::east: return index(i + 1, j);
        case Dir::west: return index(i - 1, j);
        case Dir::north: return index(i, j + 1);
        case Dir::south: return index(i, j - 1);
        }
        return -1;
    }

    bool touches_boundary(std::size_t k) const
    {
        return std::ranges::any_of(all_dirs, [&](Dir d) { return neighbor(k, d) < 0; });
    }

    double phi(std::size_t k) const { return phi_[k]; }
    double depth(std::size_t k) const { return depth_[k]; }
    std::span<const double> phi_values() const { return phi_; }
    std::span<const double> depth_values() const { return depth_; }

    double cell_area() const { return h_ * h_; }

private:
    std::size_t flat(int i, int j) const { return static_cast<std::size_t>(j) * nx_ + i; }

    DepthProfile profile_;
    double h_;
    Box box_;
    int nx_ = 0;
    int ny_ = 0;
    std::vector<int> unknown_;
    std::vector<std::array<int, 2>> cells_;
    std::vector<double> phi_;
    std::vector<double> depth_;
};

using GridPtr = std::shared_ptr<const Grid>;

inline GridPtr build_grid(const DepthProfile& profile, double h, std::optional<Box> box = std::nullopt)
{
    return std::make_shared<const Grid>(profile, h, box.value_or(profile.defining().extent()));
}

struct ScalarField {
    GridPtr grid;
    std::vector<double> values;

    ScalarField() = default;
    explicit ScalarField(GridPtr g, double fill = 0.0) : grid(std::move(g)), values(grid->size(), fill) {}
    ScalarField(GridPtr g, std::vector<double> v) : grid(std::move(g)), values(std::move(v))
    {
        require(values.size() == grid->size(), ErrorKind::precondition, "field size does not match grid");
    }

    std::size_t size() const { return values.size(); }
    double& operator[](std::size_t k) { return values[k]; }
    double operator[](std::size_t k) const { return values[k]; }
};

struct VectorField {
    GridPtr grid;
    std::vector<double> v1;
    std::vector<double> v2;

    VectorField() = default;
    explicit VectorField(GridPtr g) : grid(std::move(g)), v1(grid->size(), 0.0), v2(grid->size(), 0.0) {}

    std::size_t size() const { return v1.size(); }
    Vec2 operator[](std::size_t k) const { return {v1[k], v2[k]}; }
    void set(std::size_t k, Vec2 v)
    {
        v1[k] = v.x;
        v2[k] = v.y;
    }
};

/// Samples an analytic function at every interior cell center.
template <class Fn>
ScalarField sample(const GridPtr& grid, Fn&& fn)
{
    ScalarField f(grid);
    for (std::size_t k = 0; k < grid->size(); ++k)
        f[k] = fn(grid->center(k));
    return f;
}

/// Bilinear interpolation from cell centers. Stencil corners outside the mask are
/// dropped and the remaining weights renormalized; returns NaN if none remain.
inline double interpolate(const Grid& grid, std::span<const double> values, Vec2 p)
{
    const double h = grid.h();
    const double fx = (p.x - grid.box().xmin) / h - 0.5;
    const double fy = (p.y - grid.box().ymin) / h - 0.5;
    const int i0 = static_cast<int>(std::floor(fx));
    const int j0 = static_cast<int>(std::floor(fy));
    const double tx = fx - i0;
    const double ty = fy - j0;
    double acc = 0.0;
    double wsum = 0.0;
    for (int dj = 0; dj < 2; ++dj) {
        for (int di = 0; di < 2; ++di) {
            const int k = grid.index(i0 + di, j0 + dj);
            if (k < 0)
                continue;
            const double w = (di ? tx : 1.0 - tx) * (dj ? ty : 1.0 - ty);
            acc += w * values[static_cast<std::size_t>(k)];
            wsum += w;
        }
    }
    if (wsum <= 1e-12)
        return std::numeric_limits<double>::quiet_NaN();
    return acc / wsum;
}

/// Collar chart Gamma(x', x_n) = gamma(x') + x_n nu(x') near the shore. The shore
/// is parametrized by the polar angle x' about the defining function's center,
/// so it assumes Omega is star-shaped about that point.
class BoundaryChart {
public:
    BoundaryChart(DefiningFunction phi, double collar_width)
        : phi_(std::move(phi)), delta_(collar_width)
    {
        require(collar_width > 0.0, ErrorKind::config_validation, "collar width must be positive");
        require(phi_(phi_.center()) > 0.0, ErrorKind::configuration,
                "chart center must lie inside the domain");
    }

    /// Default collar: five grid cells.
    static BoundaryChart for_grid(const Grid& grid) { return {grid.defining(), 5.0 * grid.h()}; }

    double collar_width() const { return delta_; }
    const DefiningFunction& defining() const { return phi_; }

    Vec2 gamma(double xp) const
    {
        const Vec2 c = phi_.center();
        const Vec2 dir{std::cos(xp), std::sin(xp)};
        const Box e = phi_.extent();
        double hi = 2.0 * std::max({std::abs(e.xmax - c.x), std::abs(e.xmin - c.x),
                                    std::abs(e.ymax - c.y), std::abs(e.ymin - c.y), 1e-3});
        for (int it = 0; phi_(c + hi * dir) > 0.0; ++it) {
            require(it < 60, ErrorKind::configuration, "shore not found along chart ray");
            hi *= 2.0;
        }
        double lo = 0.0;
        // Bisection down to rounding: phi(c + lo dir) > 0 >= phi(c + hi dir).
        for (int it = 0; it < 200 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            (phi_(c + mid * dir) > 0.0 ? lo : hi) = mid;
        }
        return c + 0.5 * (lo + hi) * dir;
    }

    /// Inward unit normal grad(phi)/|grad(phi)| at gamma(x').
    Vec2 normal(double xp) const
    {
        const Vec2 g = phi_.grad(gamma(xp));
        const double n = norm(g);
        require(n > 0.0, ErrorKind::configuration, "degenerate shore: grad(phi) vanishes on the boundary");
        return (1.0 / n) * g;
    }

    Vec2 point(double xp, double xn) const
    {
        if (!(xn >= 0.0 && xn <= delta_))
            fail(ErrorKind::precondition, "chart point outside collar: x_n must lie in [0, delta]");
        return gamma(xp) + xn * normal(xp);
    }

    /// Smallest |grad(phi)| over the collar, sampled on n_samples rays and 5 depths.
    double gradient_floor(int n_samples = 256) const
    {
        double gmin = std::numeric_limits<double>::infinity();
        for (int s = 0; s < n_samples; ++s) {
            const double xp = 2.0 * std::numbers::pi * s / n_samples;
            for (int q = 0; q <= 4; ++q)
                gmin = std::min(gmin, norm(phi_.grad(point(xp, delta_ * q / 4.0))));
        }
        return gmin;
    }

private:
    DefiningFunction phi_;
    double delta_;
};

inline Vec2 chart_point(const BoundaryChart& chart, double xp, double xn) { return chart.point(xp, xn); }

} // namespace lake
