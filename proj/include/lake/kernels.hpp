#pragma once

// Half-space model kernels for L = -x_n Laplacian - (a+2) d/dx_n:
//   F(x,y,theta) = gamma y_n^(a+1) A^-(a+n) (theta (1-theta))^(a/2),
//   A^2 = theta D^2 + (1-theta) Dcheck^2 = |x-y|^2 + 4 (1-theta) x_n y_n,
//   E^eps(x,y) = int_0^(1-eps) F dtheta,   L_x E^eps = G^eps,
// plus the frozen-coefficient transform that maps a general principal part
// to the model, the gamma calibration, and the numerical checks of the
// pointwise and L^p kernel bounds.

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "lake/error.hpp"
#include "lake/norms.hpp"

namespace lake::kernels {

struct KernelParams {
    double a = 1.0;
    int n = 2;
    double gamma = 1.0;
    double eps = 0.1;

    void validate() const
    {
        require(a > 0.0, ErrorKind::precondition, "kernel exponent a must be positive");
        require(n >= 2, ErrorKind::precondition, "dimension n must be at least 2");
        require(gamma > 0.0, ErrorKind::precondition, "normalization gamma must be positive");
        require(eps > 0.0 && eps < 1.0, ErrorKind::precondition, "truncation eps must lie in (0, 1)");
    }

    KernelParams with_eps(double e) const
    {
        KernelParams p = *this;
        p.eps = e;
        return p;
    }
};

/// Point of the closed half-space; the last coordinate is the normal one.
class HalfSpacePoint {
public:
    HalfSpacePoint() = default;
    explicit HalfSpacePoint(std::vector<double> coords) : c_(std::move(coords))
    {
        require(c_.size() >= 2, ErrorKind::precondition, "half-space points need n >= 2 coordinates");
        require(c_.back() >= 0.0, ErrorKind::precondition, "normal coordinate x_n must be non-negative");
    }
    HalfSpacePoint(std::initializer_list<double> coords) : HalfSpacePoint(std::vector<double>(coords)) {}

    std::size_t dim() const { return c_.size(); }
    double normal() const { return c_.back(); }
    double operator[](std::size_t i) const { return c_[i]; }
    std::span<const double> coords() const { return c_; }

    HalfSpacePoint shifted(std::size_t axis, double step) const
    {
        auto c = c_;
        c[axis] += step;
        return HalfSpacePoint(std::move(c));
    }

private:
    std::vector<double> c_{0.0, 0.0};
};

inline double tangential_distance2(const HalfSpacePoint& x, const HalfSpacePoint& y)
{
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < x.dim(); ++i)
        s += (x[i] - y[i]) * (x[i] - y[i]);
    return s;
}

inline double distance(const HalfSpacePoint& x, const HalfSpacePoint& y)
{
    const double dn = x.normal() - y.normal();
    return std::sqrt(tangential_distance2(x, y) + dn * dn);
}

/// theta D^2 + (1 - theta) Dcheck^2.
inline double eval_A2(const HalfSpacePoint& x, const HalfSpacePoint& y, double theta)
{
    require(x.dim() == y.dim(), ErrorKind::precondition, "points of different dimension");
    const double t2 = tangential_distance2(x, y);
    const double d2 = (x.normal() - y.normal()) * (x.normal() - y.normal()) + t2;
    const double dc2 = (x.normal() + y.normal()) * (x.normal() + y.normal()) + t2;
    return theta * d2 + (1.0 - theta) * dc2;
}

namespace detail {

/// F with A^2 supplied; shared by the direct and the quadrature paths.
inline double F_from_A2(const KernelParams& p, double yn, double A2, double theta)
{
    return p.gamma * std::pow(yn, p.a + 1.0) * std::pow(A2, -(p.a + p.n) / 2.0)
        * std::pow(theta * (1.0 - theta), p.a / 2.0);
}

} // namespace detail

inline double eval_F(const KernelParams& p, const HalfSpacePoint& x, const HalfSpacePoint& y, double theta)
{
    require(theta >= 0.0 && theta <= 1.0, ErrorKind::precondition, "theta must lie in [0, 1]");
    if (y.normal() == 0.0)
        return 0.0;
    const double A2 = eval_A2(x, y, theta);
    if (!(A2 > 0.0))
        fail(ErrorKind::numerical, "F is singular: A vanishes");
    return detail::F_from_A2(p, y.normal(), A2, theta);
}

/// G^eps with A evaluated at theta = 1 - eps:
///   2 (n + a) gamma y_n^(a+2) (|x-y|^2 + 4 eps x_n y_n)^-(a+n+2)/2 (eps (1-eps))^((a+2)/2).
/// The prefactor 2(n+a) is the one for which L_x E^eps = G^eps holds exactly.
inline double eval_G_eps(const KernelParams& p, const HalfSpacePoint& x, const HalfSpacePoint& y)
{
    p.validate();
    if (y.normal() == 0.0)
        return 0.0;
    const double A2 = eval_A2(x, y, 1.0 - p.eps);
    return 2.0 * (p.n + p.a) * p.gamma * std::pow(y.normal(), p.a + 2.0) * std::pow(A2, -(p.a + p.n + 2.0) / 2.0)
        * std::pow(p.eps * (1.0 - p.eps), (p.a + 2.0) / 2.0);
}

/// Quadrature in theta on [0, 1 - eps] split at 1/2: theta = theta_max s^4 on
/// the lower piece (tames theta^(a/2)), and u = 1 - theta = e^t on the upper
/// piece, which resolves the layer 1 - theta ~ |x-y|^2 / (x_n y_n) on a log scale.
/// The node set is fixed once built, so evaluations at nearby x are smooth in x
/// and can be finite-differenced.
class ThetaRule {
public:
    explicit ThetaRule(double eps, int panels_per_unit_log = 2, int low_panels = 4)
    {
        require(eps > 0.0 && eps < 1.0, ErrorKind::precondition, "truncation eps must lie in (0, 1)");
        const double theta_max = std::min(0.5, 1.0 - eps);
        for (int q = 0; q < low_panels; ++q) {
            const double s0 = static_cast<double>(q) / low_panels;
            const double s1 = static_cast<double>(q + 1) / low_panels;
            for (std::size_t g = 0; g < nodes16.size(); ++g) {
                const double s = s0 + (s1 - s0) * nodes16[g];
                const double jac = (s1 - s0) * weights16[g] * 4.0 * theta_max * s * s * s;
                theta_.push_back(theta_max * s * s * s * s);
                weight_.push_back(jac);
            }
        }
        if (1.0 - eps > 0.5) {
            const double t0 = std::log(eps);
            const double t1 = std::log(0.5);
            const int panels = std::max(1, static_cast<int>(std::ceil((t1 - t0) * panels_per_unit_log)));
            for (int q = 0; q < panels; ++q) {
                const double a0 = t0 + (t1 - t0) * q / panels;
                const double a1 = t0 + (t1 - t0) * (q + 1) / panels;
                for (std::size_t g = 0; g < nodes16.size(); ++g) {
                    const double t = a0 + (a1 - a0) * nodes16[g];
                    const double u = std::exp(t);
                    theta_.push_back(1.0 - u);
                    weight_.push_back((a1 - a0) * weights16[g] * u);
                }
            }
        }
    }

    template <class Fn>
    double integrate(Fn&& f) const
    {
        double s = 0.0;
        for (std::size_t k = 0; k < theta_.size(); ++k)
            s += weight_[k] * f(theta_[k]);
        return s;
    }

    std::size_t size() const { return theta_.size(); }

private:
    // 16-point Gauss-Legendre on [0, 1].
    static constexpr std::array<double, 16> nodes16{
        0.0052995325041750307, 0.027712488463383700, 0.067184398806084122, 0.12229779582249845,
        0.19106187779867811,   0.27099161117138637,  0.35919822461037054,  0.45249374508118127,
        0.54750625491881873,   0.64080177538962946,  0.72900838882861363,  0.80893812220132189,
        0.87770220417750155,   0.93281560119391588,  0.97228751153661630,  0.99470046749582497};
    static constexpr std::array<double, 16> weights16{
        0.013576229705877048, 0.031126761969323947, 0.047579255841246393, 0.062314485627766938,
        0.074797994408288368, 0.084578259697501271, 0.091301707522461790, 0.094725305227534249,
        0.094725305227534249, 0.091301707522461790, 0.084578259697501271, 0.074797994408288368,
        0.062314485627766938, 0.047579255841246393, 0.031126761969323947, 0.013576229705877048};

    std::vector<double> theta_;
    std::vector<double> weight_;
};

/// E^eps on a fixed theta rule (see ThetaRule).
inline double eval_E_eps(const KernelParams& p, const HalfSpacePoint& x, const HalfSpacePoint& y,
                         const ThetaRule& rule)
{
    if (y.normal() == 0.0)
        return 0.0;
    const double t2 = tangential_distance2(x, y);
    const double dn = x.normal() - y.normal();
    const double r2 = t2 + dn * dn;
    const double xy4 = 4.0 * x.normal() * y.normal();
    return rule.integrate([&](double theta) {
        return detail::F_from_A2(p, y.normal(), r2 + (1.0 - theta) * xy4, theta);
    });
}

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;
};

/// E^eps by adaptive Gauss-Kronrod (15-point) on the same two substituted
/// pieces as ThetaRule; throws NumericalError when the relative error estimate
/// exceeds rel_tol.
inline QuadratureResult eval_E_eps_adaptive(const KernelParams& p, const HalfSpacePoint& x,
                                            const HalfSpacePoint& y, double rel_tol = 1e-8)
{
    p.validate();
    if (y.normal() == 0.0)
        return {};
    using boost::math::quadrature::gauss_kronrod;
    const double t2 = tangential_distance2(x, y);
    const double dn = x.normal() - y.normal();
    const double r2 = t2 + dn * dn;
    const double xy4 = 4.0 * x.normal() * y.normal();
    auto F = [&](double theta) { return detail::F_from_A2(p, y.normal(), r2 + (1.0 - theta) * xy4, theta); };

    const double theta_max = std::min(0.5, 1.0 - p.eps);
    auto lower = [&](double s) { return F(theta_max * s * s * s * s) * 4.0 * theta_max * s * s * s; };
    double err_lo = 0.0;
    const double lo = gauss_kronrod<double, 15>::integrate(lower, 0.0, 1.0, 20, rel_tol * 1e-2, &err_lo);
    double hi = 0.0;
    double err_hi = 0.0;
    if (1.0 - p.eps > 0.5) {
        auto upper = [&](double t) {
            const double u = std::exp(t);
            return F(1.0 - u) * u;
        };
        hi = gauss_kronrod<double, 15>::integrate(upper, std::log(p.eps), std::log(0.5), 20, rel_tol * 1e-2,
                                                  &err_hi);
    }
    const QuadratureResult res{lo + hi, err_lo + err_hi};
    if (!(res.error <= rel_tol * std::abs(res.value)))
        throw NumericalError("E^eps quadrature did not reach the requested accuracy", res.value);
    return res;
}

inline double eval_E_eps(const KernelParams& p, const HalfSpacePoint& x, const HalfSpacePoint& y)
{
    return eval_E_eps_adaptive(p, x, y).value;
}

// ---------------------------------------------------------------------------
// Finite-difference derivatives in x on a frozen theta rule.

/// Step max(1e-4, 1e-2 |x-y|), shrunk so the stencil stays in the half-space.
inline double fd_step(const HalfSpacePoint& x, const HalfSpacePoint& y)
{
    double h = std::max(1e-4, 1e-2 * distance(x, y));
    if (x.normal() > 0.0)
        h = std::min(h, 0.25 * x.normal());
    return h;
}

struct KernelDerivatives {
    double value = 0.0;
    std::vector<double> gradient;
    /// Row-major n x n.
    std::vector<double> hessian;

    double gradient_norm() const { return std::sqrt(std::inner_product(gradient.begin(), gradient.end(), gradient.begin(), 0.0)); }
    double hessian_norm() const { return std::sqrt(std::inner_product(hessian.begin(), hessian.end(), hessian.begin(), 0.0)); }
    double laplacian() const
    {
        const std::size_t n = gradient.size();
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            s += hessian[i * n + i];
        return s;
    }
};

/// Centered second-order differences of any f(x) with step h.
template <class Fn>
KernelDerivatives fd_derivatives(Fn&& f, const HalfSpacePoint& x, double h)
{
    const std::size_t n = x.dim();
    KernelDerivatives d;
    d.value = f(x);
    d.gradient.assign(n, 0.0);
    d.hessian.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double fp = f(x.shifted(i, h));
        const double fm = f(x.shifted(i, -h));
        d.gradient[i] = (fp - fm) / (2.0 * h);
        d.hessian[i * n + i] = (fp - 2.0 * d.value + fm) / (h * h);
        for (std::size_t j = i + 1; j < n; ++j) {
            const double fpp = f(x.shifted(i, h).shifted(j, h));
            const double fpm = f(x.shifted(i, h).shifted(j, -h));
            const double fmp = f(x.shifted(i, -h).shifted(j, h));
            const double fmm = f(x.shifted(i, -h).shifted(j, -h));
            d.hessian[i * n + j] = d.hessian[j * n + i] = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
        }
    }
    return d;
}

inline KernelDerivatives E_derivatives(const KernelParams& p, const HalfSpacePoint& x, const HalfSpacePoint& y,
                                       double h, const ThetaRule& rule)
{
    return fd_derivatives([&](const HalfSpacePoint& z) { return eval_E_eps(p, z, y, rule); }, x, h);
}

// ---------------------------------------------------------------------------
// Model identity L E^eps = G^eps.

struct IdentitySample {
    HalfSpacePoint x;
    HalfSpacePoint y;
    double applied = 0.0;   ///< -x_n Lap E - (a+2) dE/dx_n by finite differences
    double expected = 0.0;  ///< G^eps
    double relative = 0.0;
};

struct IdentityReport {
    std::vector<IdentitySample> samples;
    double max_relative = 0.0;
};

inline IdentityReport verify_model_identity(const KernelParams& p,
                                            std::span<const std::pair<HalfSpacePoint, HalfSpacePoint>> pairs,
                                            double h_fd)
{
    p.validate();
    const ThetaRule rule(p.eps, 4, 8);
    IdentityReport rep;
    for (const auto& [x, y] : pairs) {
        IdentitySample s{x, y};
        s.expected = eval_G_eps(p, x, y);
        if (y.normal() > 0.0) {
            const auto d = E_derivatives(p, x, y, h_fd, rule);
            s.applied = -x.normal() * d.laplacian() - (p.a + 2.0) * d.gradient.back();
        }
        const double scale = std::max(std::abs(s.expected), std::numeric_limits<double>::min());
        s.relative = (s.expected == 0.0 && s.applied == 0.0) ? 0.0 : std::abs(s.applied - s.expected) / scale;
        rep.max_relative = std::max(rep.max_relative, s.relative);
        rep.samples.push_back(std::move(s));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Pointwise decay bounds |grad^k E| <= C |x-y|^(1-n-k), |x_n grad^k E| <= C |x-y|^(2-n-k).

struct BoundSample {
    HalfSpacePoint x;
    HalfSpacePoint y;
    double r = 0.0;
    double magnitude = 0.0;  ///< |grad^k E| (Frobenius for k = 2)
    double ratio = 0.0;      ///< magnitude * r^(n+k-1)
    double weighted = 0.0;   ///< x_n magnitude * r^(n+k-2), k >= 1
    bool near_diagonal = false;  ///< x_n y_n >= 2 |x-y|^2
};

struct BoundReport {
    int k = 0;
    std::vector<BoundSample> samples;
    double max_ratio = 0.0;
    double max_weighted = 0.0;
};

inline BoundReport kernel_bound_report(const KernelParams& p, int k,
                                       std::span<const std::pair<HalfSpacePoint, HalfSpacePoint>> pairs,
                                       bool allow_subcritical = false)
{
    p.validate();
    require(k >= 0 && k <= 2, ErrorKind::precondition, "derivative order k must be 0, 1 or 2");
    require(p.a >= 1.0 || allow_subcritical, ErrorKind::precondition, "kernel bounds require a >= 1");
    const ThetaRule rule(p.eps, 4, 8);
    BoundReport rep;
    rep.k = k;
    const double n = p.n;
    for (const auto& [x, y] : pairs) {
        BoundSample s{x, y};
        s.r = distance(x, y);
        require(s.r > 0.0, ErrorKind::precondition, "bound samples need x != y");
        s.near_diagonal = x.normal() * y.normal() >= 2.0 * s.r * s.r;
        if (k == 0) {
            s.magnitude = std::abs(eval_E_eps(p, x, y, rule));
        } else {
            const auto d = E_derivatives(p, x, y, fd_step(x, y), rule);
            s.magnitude = k == 1 ? d.gradient_norm() : d.hessian_norm();
        }
        s.ratio = s.magnitude * std::pow(s.r, n + k - 1.0);
        if (k >= 1)
            s.weighted = x.normal() * s.magnitude * std::pow(s.r, n + k - 2.0);
        rep.max_ratio = std::max(rep.max_ratio, s.ratio);
        rep.max_weighted = std::max(rep.max_weighted, s.weighted);
        rep.samples.push_back(std::move(s));
    }
    return rep;
}

/// Sample pairs at `levels` geometrically spaced |x-y| from r_max down to r_min, in five configurations:
/// tangential and oblique offsets from (0', 0.5), and three shore-scaled
/// pairs whose normal coordinates shrink with |x-y| (the regime x_n ~ |x-y|).
inline std::vector<std::pair<HalfSpacePoint, HalfSpacePoint>> scale_sweep_pairs(int n, double r_min, double r_max, int levels)
{
    require(n >= 2 && levels >= 2, ErrorKind::precondition, "scale sweep needs n >= 2 and levels >= 2");
    require(r_min > 0.0 && r_max > r_min && r_max <= 1.0, ErrorKind::precondition,
            "scale sweep needs 0 < r_min < r_max <= 1");
    auto pt = [n](double t, double xn) {
        std::vector<double> c(static_cast<std::size_t>(n), 0.0);
        c[0] = t;
        c.back() = xn;
        return HalfSpacePoint(std::move(c));
    };
    std::vector<std::pair<HalfSpacePoint, HalfSpacePoint>> out;
    for (int j = 0; j < levels; ++j) {
        const double r = r_max * std::pow(r_min / r_max, static_cast<double>(j) / (levels - 1));
        out.emplace_back(pt(0.0, 0.5), pt(r, 0.5));
        out.emplace_back(pt(0.0, 0.5), pt(0.6 * r, 0.5 + 0.8 * r));
        out.emplace_back(pt(0.0, r), pt(r, r));
        out.emplace_back(pt(0.0, r), pt(0.0, 2.0 * r));
        out.emplace_back(pt(0.0, 2.0 * r), pt(0.0, r));
    }
    return out;
}

/// Ratio of the largest to the smallest per-scale maximum, with scales binned
/// by log2 |x-y|. A power-law drift of the bound shows up as a spread growing
/// like the scale range; a bounded ratio gives a spread of order one.
inline double scale_spread(const BoundReport& rep, bool weighted)
{
    std::vector<std::pair<long, double>> best;
    for (const auto& s : rep.samples) {
        const long bin = std::lround(4.0 * std::log2(s.r));
        const double v = weighted ? s.weighted : s.ratio;
        auto it = std::find_if(best.begin(), best.end(), [bin](const auto& b) { return b.first == bin; });
        if (it == best.end())
            best.emplace_back(bin, v);
        else
            it->second = std::max(it->second, v);
    }
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (const auto& b : best) {
        lo = std::min(lo, b.second);
        hi = std::max(hi, b.second);
    }
    if (best.empty() || hi == 0.0)
        return 1.0;
    return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
}

// ---------------------------------------------------------------------------
// Approximate identity and gamma calibration.

/// Integration region {|y' - x'| < radius, 0 < y_n < height} around the point.
struct CylinderRegion {
    double radius = 1.0;
    double height = 1.0;
};

/// int G^eps(x, y) dy over the cylinder, by nested adaptive Gauss-Kronrod with
/// the tangential integral done in polar form (|S^(n-2)| rho^(n-2) d rho).
inline double approx_identity_integral(const KernelParams& p, const HalfSpacePoint& x, CylinderRegion region = {},
                                       double rel_tol = 1e-10)
{
    p.validate();
    using boost::math::quadrature::gauss_kronrod;
    require(x.normal() > 0.0 && x.normal() < region.height, ErrorKind::precondition,
            "reference point must be interior to the region");
    const int m = p.n - 1;
    const double sphere = 2.0 * std::pow(std::numbers::pi, m / 2.0) / std::tgamma(m / 2.0);
    const double xn = x.normal();
    const double pref = 2.0 * (p.n + p.a) * p.gamma * std::pow(p.eps * (1.0 - p.eps), (p.a + 2.0) / 2.0);
    const double expo = -(p.a + p.n + 2.0) / 2.0;

    auto inner = [&](double yn) {
        const double base = (xn - yn) * (xn - yn) + 4.0 * p.eps * xn * yn;
        const double width = std::sqrt(base);
        auto radial = [&](double rho) { return std::pow(rho, m - 1.0) * std::pow(rho * rho + base, expo); };
        // Split at the layer width so the adaptive rule sees the peak.
        const double split = std::min(region.radius, 4.0 * width);
        double total = gauss_kronrod<double, 15>::integrate(radial, 0.0, split, 25, rel_tol);
        if (split < region.radius)
            total += gauss_kronrod<double, 15>::integrate(radial, split, region.radius, 25, rel_tol);
        return sphere * std::pow(yn, p.a + 2.0) * total;
    };
    const double layer = std::sqrt(p.eps) * xn;
    std::vector<double> breaks{0.0, std::max(0.0, xn - 8.0 * layer), xn, std::min(region.height, xn + 8.0 * layer),
                               region.height};
    double total = 0.0;
    for (std::size_t q = 0; q + 1 < breaks.size(); ++q)
        if (breaks[q + 1] > breaks[q])
            total += gauss_kronrod<double, 15>::integrate(inner, breaks[q], breaks[q + 1], 25, rel_tol);
    return pref * total;
}

struct Calibration {
    double gamma = 0.0;
    /// int G^eps dy at gamma = 1 for each eps of the sequence.
    std::vector<double> integrals;
    double limit = 0.0;  ///< extrapolated eps -> 0 value at gamma = 1
    double fit_residual = 0.0;
};

/// gamma with lim_{eps->0} int G^eps(x, y) dy = 1 at the reference point.
/// The eps -> 0 limit is extrapolated by a least-squares fit
/// I(eps) = I0 + c1 eps + c2 eps^2 over the supplied decreasing sequence.
inline Calibration calibrate_gamma(double a, int n, std::span<const double> eps_sequence,
                                   const HalfSpacePoint& reference, CylinderRegion region = {})
{
    require(eps_sequence.size() >= 3, ErrorKind::precondition, "calibration needs at least three eps values");
    for (std::size_t i = 1; i < eps_sequence.size(); ++i)
        require(eps_sequence[i] < eps_sequence[i - 1], ErrorKind::precondition,
                "calibration eps sequence must be decreasing");
    Calibration cal;
    Eigen::MatrixXd B(static_cast<Eigen::Index>(eps_sequence.size()), 3);
    Eigen::VectorXd v(static_cast<Eigen::Index>(eps_sequence.size()));
    for (std::size_t i = 0; i < eps_sequence.size(); ++i) {
        const double e = eps_sequence[i];
        const double I = approx_identity_integral(KernelParams{a, n, 1.0, e}, reference, region);
        cal.integrals.push_back(I);
        const auto r = static_cast<Eigen::Index>(i);
        B(r, 0) = 1.0;
        B(r, 1) = e;
        B(r, 2) = e * e;
        v(r) = I;
    }
    const Eigen::VectorXd c = B.colPivHouseholderQr().solve(v);
    cal.limit = c(0);
    cal.fit_residual = (B * c - v).norm() / v.norm();
    const double last = cal.integrals.back();
    if (!(cal.limit > 0.0) || !std::isfinite(cal.limit) || std::abs(cal.limit - last) > 0.05 * std::abs(last)
        || cal.fit_residual > 1e-2)
        throw NumericalError("gamma calibration: eps extrapolation did not converge", cal.limit);
    cal.gamma = 1.0 / cal.limit;
    return cal;
}

// ---------------------------------------------------------------------------
// Frozen coefficients.

struct FrozenTransform {
    Eigen::MatrixXd T;
    double det = 0.0;
};

/// T with last row e_n (x~_n = x_n) and T p T^T = I, for symmetric positive
/// definite p with p_nn = 1. Writing p = [[P, q], [q^T, 1]],
/// T = [[S, -S q], [0, 1]] with S the symmetric inverse square root of P - q q^T.
/// Then L_y = -x_n p:D^2 - (a+2)(p e_n).grad becomes the model operator.
inline FrozenTransform frozen_transform(const Eigen::MatrixXd& p)
{
    const auto n = p.rows();
    require(n >= 2 && p.cols() == n, ErrorKind::precondition, "coefficient matrix must be square, n >= 2");
    require((p - p.transpose()).norm() <= 1e-12 * p.norm(), ErrorKind::precondition,
            "coefficient matrix must be symmetric");
    require(std::abs(p(n - 1, n - 1) - 1.0) <= 1e-12, ErrorKind::precondition,
            "normalize the coefficients so that p_nn = 1");
    const Eigen::LLT<Eigen::MatrixXd> llt(p);
    require(llt.info() == Eigen::Success, ErrorKind::precondition, "coefficient matrix is not positive definite");

    const auto m = n - 1;
    const Eigen::VectorXd q = p.block(0, m, m, 1);
    const Eigen::MatrixXd schur = p.topLeftCorner(m, m) - q * q.transpose();
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(schur);
    const Eigen::MatrixXd S = es.operatorInverseSqrt();

    FrozenTransform ft;
    ft.T = Eigen::MatrixXd::Zero(n, n);
    ft.T.topLeftCorner(m, m) = S;
    ft.T.block(0, m, m, 1) = -S * q;
    ft.T(m, m) = 1.0;
    ft.det = ft.T.determinant();
    return ft;
}

/// Root of the indicial polynomial lambda + a + 2.
inline double indicial_root(double a)
{
    require(a > 0.0, ErrorKind::precondition, "indicial root requires a > 0");
    return -(a + 2.0);
}

// ---------------------------------------------------------------------------
// Parametrix error kernel K^eps for variable coefficients.

/// Smooth coefficients of L = -x_n sum p_jk d_j d_k - sum q_j d_j - R, with p_nn = 1.
struct VariableCoefficients {
    std::function<Eigen::MatrixXd(const HalfSpacePoint&)> p;
    std::function<Eigen::VectorXd(const HalfSpacePoint&)> q;
    std::function<double(const HalfSpacePoint&)> r;

    /// A 2D example with q_j = (a+2) p_jn at x_n = 0.
    static VariableCoefficients example_2d(double a)
    {
        VariableCoefficients c;
        c.p = [](const HalfSpacePoint& x) {
            Eigen::MatrixXd m(2, 2);
            m << 1.0 + 0.3 * std::sin(x[0]), 0.2 * x.normal(), 0.2 * x.normal(), 1.0;
            return m;
        };
        c.q = [a](const HalfSpacePoint& x) {
            Eigen::VectorXd v(2);
            v << (a + 2.0) * 0.2 * x.normal() + 0.1 * x.normal(), (a + 2.0) + 0.1 * x.normal();
            return v;
        };
        c.r = [](const HalfSpacePoint&) { return 0.5; };
        return c;
    }
};

/// Parametrix E^eps(x, y) = |det T(y)| E~^eps(T(y) x, T(y) y) and its x-derivatives.
inline KernelDerivatives parametrix_derivatives(const KernelParams& p, const VariableCoefficients& coeffs,
                                                const HalfSpacePoint& x, const HalfSpacePoint& y,
                                                const ThetaRule& rule)
{
    const auto ft = frozen_transform(coeffs.p(y));
    const auto n = static_cast<Eigen::Index>(x.dim());
    auto map = [&](const HalfSpacePoint& z) {
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i)
            v(i) = z[static_cast<std::size_t>(i)];
        const Eigen::VectorXd w = ft.T * v;
        return HalfSpacePoint(std::vector<double>(w.data(), w.data() + n));
    };
    const HalfSpacePoint xt = map(x);
    const HalfSpacePoint yt = map(y);
    const auto d = E_derivatives(p, xt, yt, fd_step(xt, yt), rule);
    const double s = std::abs(ft.det);
    KernelDerivatives out;
    out.value = s * d.value;
    const Eigen::Map<const Eigen::VectorXd> g(d.gradient.data(), n);
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> H(
        d.hessian.data(), n, n);
    const Eigen::VectorXd gx = s * ft.T.transpose() * g;
    const Eigen::MatrixXd Hx = s * ft.T.transpose() * H * ft.T;
    out.gradient.assign(gx.data(), gx.data() + n);
    out.hessian.resize(static_cast<std::size_t>(n * n));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            out.hessian[static_cast<std::size_t>(i * n + j)] = Hx(i, j);
    return out;
}

/// K^eps(x, y) = x_n sum (p_jk(y) - p_jk(x)) d_j d_k E^eps
///             + sum ((a+2) p_jn(y) - q_j(x)) d_j E^eps + R(x) E^eps.
inline double parametrix_error_kernel(const KernelParams& p, const VariableCoefficients& coeffs,
                                      const HalfSpacePoint& x, const HalfSpacePoint& y, const ThetaRule& rule)
{
    const auto d = parametrix_derivatives(p, coeffs, x, y, rule);
    const Eigen::MatrixXd px = coeffs.p(x);
    const Eigen::MatrixXd py = coeffs.p(y);
    const Eigen::VectorXd qx = coeffs.q(x);
    const auto n = px.rows();
    double k2 = 0.0;
    double k1 = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index l = 0; l < n; ++l)
            k2 += (py(j, l) - px(j, l)) * d.hessian[static_cast<std::size_t>(j * n + l)];
        k1 += ((p.a + 2.0) * py(j, n - 1) - qx(j)) * d.gradient[static_cast<std::size_t>(j)];
    }
    return x.normal() * k2 + k1 + coeffs.r(x) * d.value;
}

// ---------------------------------------------------------------------------
// L^p operator norms of discretized kernels.

struct NormGrowth {
    std::vector<double> p_values;
    std::vector<double> norms;
    double slope = 0.0;  ///< least-squares slope of log(norm) against log(p)
    bool at_most_linear = false;  ///< slope <= 1.2
};

/// Dense kernel matrix M_ij = K(z_i, z_j) w_j on a point cloud; the singular
/// diagonal is dropped.
template <class Kernel>
Eigen::MatrixXd kernel_matrix(Kernel&& K, std::span<const HalfSpacePoint> points, std::span<const double> weights)
{
    const auto m = static_cast<Eigen::Index>(points.size());
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j)
            if (i != j)
                M(i, j) = K(points[static_cast<std::size_t>(i)], points[static_cast<std::size_t>(j)])
                    * weights[static_cast<std::size_t>(j)];
    return M;
}

/// Lower estimates of ||M||_{L^p -> L^p} (weighted by the cell volumes) from
/// random sign/uniform test functions and indicator bumps, for every p.
inline NormGrowth operator_norm_growth(const Eigen::MatrixXd& M, std::span<const double> weights,
                                       std::span<const double> p_list, int trials, unsigned seed)
{
    require(M.rows() == M.cols() && static_cast<std::size_t>(M.rows()) == weights.size(), ErrorKind::precondition,
            "kernel matrix and weights disagree");
    require(p_list.size() >= 2, ErrorKind::precondition, "norm growth needs at least two p values");
    const auto m = M.rows();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::vector<Eigen::VectorXd> tests;
    for (int t = 0; t < trials; ++t) {
        Eigen::VectorXd g(m);
        for (Eigen::Index i = 0; i < m; ++i)
            g(i) = uni(rng);
        tests.push_back(g);
        tests.push_back(g.cwiseAbs());
    }
    for (Eigen::Index i = 0; i < m; i += std::max<Eigen::Index>(1, m / 8)) {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(m);
        g(i) = 1.0;
        tests.push_back(g);
    }
    tests.push_back(Eigen::VectorXd::Ones(m));

    auto pnorm = [&](const Eigen::VectorXd& v, double p) {
        return lp_norm(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())), 1.0, p, weights);
    };
    NormGrowth out;
    for (double p : p_list) {
        double best = 0.0;
        for (const auto& g : tests) {
            const double den = pnorm(g, p);
            if (den > 0.0)
                best = std::max(best, pnorm(M * g, p) / den);
        }
        out.p_values.push_back(p);
        out.norms.push_back(best);
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < p_list.size(); ++i) {
        mx += std::log(out.p_values[i]);
        my += std::log(out.norms[i]);
    }
    mx /= static_cast<double>(p_list.size());
    my /= static_cast<double>(p_list.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < p_list.size(); ++i) {
        const double dx = std::log(out.p_values[i]) - mx;
        sxy += dx * (std::log(out.norms[i]) - my);
        sxx += dx * dx;
    }
    out.slope = sxy / sxx;
    out.at_most_linear = out.slope <= 1.2;
    return out;
}

} // namespace lake::kernels
