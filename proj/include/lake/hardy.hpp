#pragma once

// Power-weighted averaging operators on [0, delta]
//   I_alpha u(x) = int_0^x (t/x)^alpha u(t) dt/t,
//   J_alpha u(x) = int_x^delta (x/t)^alpha u(t) dt/t,
// and the 1D normal-form solve of -x u'' + a u' = x^(a+1) f.

#include <boost/math/interpolators/barycentric_rational.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "lake/error.hpp"

namespace lake::hardy {

using Function = std::function<double(double)>;

struct HardyOptions {
    double delta = 1.0;
    double tol = 1e-13;
};

namespace detail {

inline boost::math::quadrature::tanh_sinh<double>& integrator()
{
    thread_local boost::math::quadrature::tanh_sinh<double> q;
    return q;
}

template <class Fn>
double integrate(Fn&& f, double lo, double hi, double tol)
{
    if (!(hi > lo))
        return 0.0;
    // tanh-sinh asserts on intervals near rounding size; a fixed rule is exact enough there.
    if (hi - lo <= 1e-6 * std::max(1.0, std::abs(hi)))
        return boost::math::quadrature::gauss<double, 10>::integrate(f, lo, hi);
    double err = 0.0;
    return integrator().integrate(f, lo, hi, tol, &err);
}

} // namespace detail

/// I_alpha u at one point. With sigma = (t/x)^alpha the integral becomes
/// (1/alpha) int_0^1 u(x sigma^(1/alpha)) d sigma, which has no weight singularity.
inline double hardy_I(double alpha, const Function& u, double x, const HardyOptions& opt = {})
{
    require(alpha > 0.0, ErrorKind::precondition, "Hardy operator requires alpha > 0");
    require(x >= 0.0 && x <= opt.delta, ErrorKind::precondition, "Hardy operator evaluated outside [0, delta]");
    if (x == 0.0)
        return u(0.0) / alpha;
    return detail::integrate([&](double s) { return u(x * std::pow(s, 1.0 / alpha)); }, 0.0, 1.0, opt.tol) / alpha;
}

/// J_alpha u at one point, via sigma = (x/t)^alpha:
/// (1/alpha) int_{(x/delta)^alpha}^1 u(x sigma^(-1/alpha)) d sigma.
inline double hardy_J(double alpha, const Function& u, double x, const HardyOptions& opt = {})
{
    require(alpha > 0.0, ErrorKind::precondition, "Hardy operator requires alpha > 0");
    require(x >= 0.0 && x <= opt.delta, ErrorKind::precondition, "Hardy operator evaluated outside [0, delta]");
    if (x == 0.0) {
        // Limit x -> 0 of x^alpha int_x^delta t^(-alpha-1) u(t) dt is u(0)/alpha.
        return u(0.0) / alpha;
    }
    const double lo = std::pow(x / opt.delta, alpha);
    return detail::integrate([&](double s) { return u(std::min(opt.delta, x * std::pow(s, -1.0 / alpha))); }, lo,
                             1.0, opt.tol)
        / alpha;
}

inline std::vector<double> hardy_I(double alpha, const Function& u, std::span<const double> xs,
                                   const HardyOptions& opt = {})
{
    std::vector<double> out;
    out.reserve(xs.size());
    for (double x : xs)
        out.push_back(hardy_I(alpha, u, x, opt));
    return out;
}

inline std::vector<double> hardy_J(double alpha, const Function& u, std::span<const double> xs,
                                   const HardyOptions& opt = {})
{
    std::vector<double> out;
    out.reserve(xs.size());
    for (double x : xs)
        out.push_back(hardy_J(alpha, u, x, opt));
    return out;
}

/// Interpolant through samples (x_k, u_k) for the sampled-function overloads.
inline Function interpolant(std::span<const double> xs, std::span<const double> values, std::size_t order = 3)
{
    require(xs.size() == values.size() && xs.size() > order, ErrorKind::precondition,
            "sampled function needs more points than the interpolation order");
    require(std::is_sorted(xs.begin(), xs.end()), ErrorKind::precondition, "sample points must be increasing");
    auto br = std::make_shared<boost::math::barycentric_rational<double>>(
        xs.begin(), xs.end(), values.begin(), order);
    return [br](double x) { return (*br)(x); };
}

inline std::vector<double> hardy_I(double alpha, std::span<const double> xs, std::span<const double> values,
                                   const HardyOptions& opt = {})
{
    return hardy_I(alpha, interpolant(xs, values), xs, opt);
}

inline std::vector<double> hardy_J(double alpha, std::span<const double> xs, std::span<const double> values,
                                   const HardyOptions& opt = {})
{
    return hardy_J(alpha, interpolant(xs, values), xs, opt);
}

struct FuchsianSolution {
    std::vector<double> x;
    std::vector<double> u;
    std::vector<double> du;
    std::vector<double> phi;  ///< u / x^(a+1), bounded at 0
};

/// -x u'' + a u' = x^(a+1) f on (0, delta] with u(0) = 0 and u'(delta) = 0.
/// First u' = J_a(t^(a+1) f) = x^a W(x) with W(x) = int_x^delta f, then
/// u = x I_1(u') = x^(a+1) I_(a+1)(W), so phi = I_(a+1)(W).
inline FuchsianSolution solve_fuchsian_1d(double a, const Function& f, std::span<const double> xs,
                                          const HardyOptions& opt = {})
{
    require(a > 0.0, ErrorKind::precondition, "Fuchsian solve requires a > 0");
    auto W = [&](double x) { return detail::integrate(f, x, opt.delta, opt.tol); };
    FuchsianSolution s;
    s.x.assign(xs.begin(), xs.end());
    for (double x : xs) {
        const double phi = hardy_I(a + 1.0, W, x, opt);
        s.phi.push_back(phi);
        s.u.push_back(std::pow(x, a + 1.0) * phi);
        s.du.push_back(std::pow(x, a) * W(x));
    }
    return s;
}

/// max over pairs of |u_i - u_j| / |x_i - x_j|^mu.
inline double holder_quotient_1d(std::span<const double> xs, std::span<const double> values, double mu)
{
    require(mu > 0.0 && mu <= 1.0, ErrorKind::precondition, "Hoelder exponent must lie in (0, 1]");
    require(xs.size() == values.size(), ErrorKind::precondition, "sample size mismatch");
    double q = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i)
        for (std::size_t j = i + 1; j < xs.size(); ++j) {
            const double dx = std::abs(xs[i] - xs[j]);
            if (dx > 0.0)
                q = std::max(q, std::abs(values[i] - values[j]) / std::pow(dx, mu));
        }
    return q;
}

} // namespace lake::hardy
