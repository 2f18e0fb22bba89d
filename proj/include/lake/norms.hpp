#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

#include "lake/error.hpp"

namespace lake {

/// Discrete L^p norm (sum w_k |g_k|^p)^(1/p) with optional per-cell weights
/// folded in as w_k = area * weight_k; p = infinity gives max |g_k| over cells
/// with positive weight. Scaled by the max to stay finite for large p.
inline double lp_norm(std::span<const double> g, double area, double p,
                      std::span<const double> weight = {})
{
    require(p >= 1.0, ErrorKind::precondition, "L^p norm requires p >= 1");
    require(weight.empty() || weight.size() == g.size(), ErrorKind::precondition,
            "weight size mismatch");
    double m = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k)
        if (weight.empty() || weight[k] > 0.0)
            m = std::max(m, std::abs(g[k]));
    if (std::isinf(p) || m == 0.0)
        return m;
    double s = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const double w = weight.empty() ? 1.0 : weight[k];
        s += w * std::pow(std::abs(g[k]) / m, p);
    }
    return m * std::pow(s * area, 1.0 / p);
}

inline constexpr double infinity = std::numeric_limits<double>::infinity();

} // namespace lake
