#pragma once

#include "magix/types.hpp"

namespace magix {

// Matern covariance parameters. nu > 1 is required so the covariance of the
// derivative process stays finite at zero distance.
struct MaternParams {
  double nu = 2.01;
  double omega2 = 1.0;  // variance
  double rho = 1.0;     // lengthscale

  void validate() const {
    if (!(nu > 1.0)) throw std::invalid_argument("MaternParams: nu must exceed 1");
    if (!(omega2 > 0.0)) throw std::invalid_argument("MaternParams: omega2 must be positive");
    if (!(rho > 0.0)) throw std::invalid_argument("MaternParams: rho must be positive");
  }
};

// Covariance between two time points.
double kernel(const MaternParams& p, double t1, double t2);

// First cross-derivatives. kernel_d2 = -kernel_d1; both are 0 at t1 == t2.
double kernel_d1(const MaternParams& p, double t1, double t2);
double kernel_d2(const MaternParams& p, double t1, double t2);

// d^2 K / dt1 dt2; equals omega2 * (2 nu / rho^2) / (2 (nu - 1)) at t1 == t2.
double kernel_d1d2(const MaternParams& p, double t1, double t2);

// All quantities needed by the GP layer from one Bessel evaluation.
struct KernelEval {
  double k;      // K(t1, t2)
  double d1;     // dK/dt1
  double d1d2;   // d^2 K / dt1 dt2
  double d_rho;  // dK/drho (for marginal-likelihood gradients)
};
KernelEval kernel_eval(const MaternParams& p, double t1, double t2);

// Dense matrices over grids; entry (i, j) uses (s(i), t(j)).
Mat kernel_matrix(const MaternParams& p, const Vec& s, const Vec& t);
Mat kernel_d1_matrix(const MaternParams& p, const Vec& s, const Vec& t);
Mat kernel_d1d2_matrix(const MaternParams& p, const Vec& s, const Vec& t);

}  // namespace magix
