#include "magix/matern.hpp"

#include <cmath>

#include "magix/bessel.hpp"

namespace magix {

namespace {

// Distances below this (in scaled units r) take the analytic limit branch.
constexpr double kTinyR = 1e-12;

struct Core {
  double k;
  double ratio;  // B_{nu-1}(r) / B_nu(r)
  double r;
};

// K(d) = omega2 * 2^{1-nu}/Gamma(nu) * r^nu * B_nu(r), r = sqrt(2 nu) d / rho.
// Evaluated through exp(nu log r - r) * [e^r B_nu(r)] so large r underflows
// cleanly instead of producing 0 * inf.
Core kernel_core(const MaternParams& p, double d) {
  const double r = std::sqrt(2.0 * p.nu) * d / p.rho;
  const BesselKPair b = bessel_k_pair_scaled(p.nu - 1.0, r);
  const double lognorm = (1.0 - p.nu) * std::log(2.0) - std::lgamma(p.nu);
  const double k = p.omega2 * std::exp(lognorm + p.nu * std::log(r) - r) * b.k_nup1;
  return {k, b.k_nu / b.k_nup1, r};
}

}  // namespace

double kernel(const MaternParams& p, double t1, double t2) {
  const double d = std::abs(t1 - t2);
  if (d == 0.0 || std::sqrt(2.0 * p.nu) * d / p.rho < kTinyR) return p.omega2;
  return kernel_core(p, d).k;
}

double kernel_d1(const MaternParams& p, double t1, double t2) {
  const double d = std::abs(t1 - t2);
  if (d == 0.0 || std::sqrt(2.0 * p.nu) * d / p.rho < kTinyR) return 0.0;
  const Core c = kernel_core(p, d);
  // dK/dr = -K * B_{nu-1}/B_nu  (recurrence-reduced form of the chain rule)
  const double dkdr = -c.k * c.ratio;
  const double sign = (t1 > t2) ? 1.0 : -1.0;
  return dkdr * std::sqrt(2.0 * p.nu) / p.rho * sign;
}

double kernel_d2(const MaternParams& p, double t1, double t2) { return -kernel_d1(p, t1, t2); }

double kernel_d1d2(const MaternParams& p, double t1, double t2) {
  const double d = std::abs(t1 - t2);
  const double deriv_var = p.omega2 * (2.0 * p.nu / (p.rho * p.rho)) / (2.0 * (p.nu - 1.0));
  if (d == 0.0 || std::sqrt(2.0 * p.nu) * d / p.rho < kTinyR) return deriv_var;
  const Core c = kernel_core(p, d);
  // d2K/dr2 = K * (1 - (2 nu - 1)/r * B_{nu-1}/B_nu); cross-derivative flips sign
  const double d2kdr2 = c.k * (1.0 - (2.0 * p.nu - 1.0) / c.r * c.ratio);
  return -d2kdr2 * (2.0 * p.nu) / (p.rho * p.rho);
}

KernelEval kernel_eval(const MaternParams& p, double t1, double t2) {
  const double d = std::abs(t1 - t2);
  if (d == 0.0 || std::sqrt(2.0 * p.nu) * d / p.rho < kTinyR) {
    const double deriv_var = p.omega2 * (2.0 * p.nu / (p.rho * p.rho)) / (2.0 * (p.nu - 1.0));
    return {p.omega2, 0.0, deriv_var, 0.0};
  }
  const Core c = kernel_core(p, d);
  const double sign = (t1 > t2) ? 1.0 : -1.0;
  const double d1 = -c.k * c.ratio * std::sqrt(2.0 * p.nu) / p.rho * sign;
  const double d2kdr2 = c.k * (1.0 - (2.0 * p.nu - 1.0) / c.r * c.ratio);
  const double d1d2 = -d2kdr2 * (2.0 * p.nu) / (p.rho * p.rho);
  const double d_rho = c.k * (c.r / p.rho) * c.ratio;
  return {c.k, d1, d1d2, d_rho};
}

Mat kernel_matrix(const MaternParams& p, const Vec& s, const Vec& t) {
  Mat out(s.size(), t.size());
  for (int j = 0; j < t.size(); ++j)
    for (int i = 0; i < s.size(); ++i) out(i, j) = kernel(p, s(i), t(j));
  return out;
}

Mat kernel_d1_matrix(const MaternParams& p, const Vec& s, const Vec& t) {
  Mat out(s.size(), t.size());
  for (int j = 0; j < t.size(); ++j)
    for (int i = 0; i < s.size(); ++i) out(i, j) = kernel_d1(p, s(i), t(j));
  return out;
}

Mat kernel_d1d2_matrix(const MaternParams& p, const Vec& s, const Vec& t) {
  Mat out(s.size(), t.size());
  for (int j = 0; j < t.size(); ++j)
    for (int i = 0; i < s.size(); ++i) out(i, j) = kernel_d1d2(p, s(i), t(j));
  return out;
}

}  // namespace magix
