#pragma once

#include "magix/matern.hpp"
#include "magix/types.hpp"

namespace magix {

// Per-component GP hyperparameters: Matern kernel, constant prior mean c,
// and observation noise variance.
struct GpHyper {
  MaternParams matern;
  double mean_c = 0.0;
  double sigma2 = 1.0;

  void validate() const {
    matern.validate();
    if (!(sigma2 > 0.0)) throw std::invalid_argument("GpHyper: sigma2 must be positive");
  }
};

// Precomputed per-component quantities on the discretization grid:
//   C    prior covariance on the grid (raw, before jitter)
//   L_C  lower Cholesky factor of C + jitter_c * I
//   m    'K(T,T) (C + jitter_c I)^{-1}, so the conditional derivative mean
//        is m (x - c)
//   K    conditional derivative covariance K'' - 'K (C + jitter_c I)^{-1} K'
//   L_K  lower Cholesky factor of K + jitter_k * I
// All downstream densities use the jittered factors.
struct GpComponentModel {
  GpHyper hyper;
  TimeGrid grid;
  Mat C;
  Mat L_C;
  double jitter_c = 0.0;
  Mat m;
  Mat K;
  Mat L_K;
  double jitter_k = 0.0;
  double logdet_C = 0.0;  // of the jittered matrix
  double logdet_K = 0.0;

  // Conditional derivative mean m (x - c); exactly linear in x.
  Vec cond_deriv_mean(const Vec& x) const { return m * (x.array() - hyper.mean_c).matrix(); }
};

// Lower Cholesky of A + lambda * mean(diag(A)) * I, escalating lambda from
// 1e-10 to 1e-6 by decades (starting at 0). Throws NumericError when no
// level factorizes. jitter_out receives the absolute jitter actually added.
Mat cholesky_with_jitter(const Mat& A, double* jitter_out);

// log N(y; c 1, K(tau, tau) + sigma2 I), constants included.
double marginal_log_likelihood(const GpHyper& hyper, const Vec& tau, const Vec& y);

// 1e-6 * sample variance of y; lower bound kept on noise variances.
double sigma2_floor(const Vec& y);

// Empirical-Bayes fit of (omega2, rho, sigma2, c) by maximizing the marginal
// likelihood. Multi-start local ascent (BFGS on log-scale parameters); the
// returned hyper never scores below init. nu is kept fixed.
GpHyper fit_empirical_bayes(const Vec& tau, const Vec& y, const GpHyper& init, int budget = 200);

// Posterior mean c + K(grid, tau) (K(tau, tau) + sigma2 I)^{-1} (y - c).
Vec predictive_mean(const GpHyper& hyper, const Vec& tau, const Vec& y, const TimeGrid& grid);

GpComponentModel build_component_model(const GpHyper& hyper, const TimeGrid& grid);

}  // namespace magix
