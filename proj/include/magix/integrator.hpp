#pragma once

#include <functional>

#include "magix/types.hpp"

namespace magix {

using DerivFn = std::function<void(const Vec& x, double t, Vec& dxdt)>;

// Classical fixed-step RK4 with `substeps` internal steps per grid interval.
// trajectory.values.row(0) == x0 exactly. Throws DivergenceError once any
// state component exceeds 1e8 in magnitude.
Trajectory integrate(const DerivFn& f, const Vec& x0, const TimeGrid& grid, int substeps = 10);

// Same stepping, but a blow-up leaves the remaining rows NaN instead of
// throwing. Returns true when the whole grid integrated cleanly.
bool integrate_partial(const DerivFn& f, const Vec& x0, const TimeGrid& grid, int substeps, Mat& values);

// Magnitude bound used by the divergence guard.
inline constexpr double kStateOverflowLimit = 1e8;

}  // namespace magix
