#include "magix/integrator.hpp"

#include <cmath>
#include <limits>

namespace magix {

namespace {

bool state_ok(const Vec& x) {
  for (int i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x(i)) || std::abs(x(i)) > kStateOverflowLimit) return false;
  }
  return true;
}

// Shared RK4 core; returns the number of grid rows filled (n on success).
int rk4_rows(const DerivFn& f, const Vec& x0, const TimeGrid& grid, int substeps, Mat& values) {
  const int n = grid.size();
  const int dim = static_cast<int>(x0.size());
  values.resize(n, dim);
  values.setConstant(std::numeric_limits<double>::quiet_NaN());
  if (!state_ok(x0)) return 0;
  values.row(0) = x0.transpose();

  Vec x = x0, k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim);
  for (int i = 1; i < n; ++i) {
    const double h = (grid.times(i) - grid.times(i - 1)) / substeps;
    double t = grid.times(i - 1);
    for (int s = 0; s < substeps; ++s) {
      f(x, t, k1);
      tmp = x + 0.5 * h * k1;
      f(tmp, t + 0.5 * h, k2);
      tmp = x + 0.5 * h * k2;
      f(tmp, t + 0.5 * h, k3);
      tmp = x + h * k3;
      f(tmp, t + h, k4);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      t += h;
      if (!state_ok(x)) return i;
    }
    values.row(i) = x.transpose();
  }
  return n;
}

}  // namespace

Trajectory integrate(const DerivFn& f, const Vec& x0, const TimeGrid& grid, int substeps) {
  grid.validate();
  if (substeps < 1) throw std::invalid_argument("integrate: substeps must be >= 1");
  Trajectory traj;
  traj.grid = grid;
  const int filled = rk4_rows(f, x0, grid, substeps, traj.values);
  if (filled < grid.size())
    throw DivergenceError("integrate: state exceeded overflow limit near grid row " + std::to_string(filled));
  return traj;
}

bool integrate_partial(const DerivFn& f, const Vec& x0, const TimeGrid& grid, int substeps, Mat& values) {
  grid.validate();
  if (substeps < 1) throw std::invalid_argument("integrate: substeps must be >= 1");
  return rk4_rows(f, x0, grid, substeps, values) == grid.size();
}

}  // namespace magix
