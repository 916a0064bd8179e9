#include <doctest.h>

#include <cmath>

#include "magix/dynamics.hpp"
#include "magix/gp.hpp"
#include "magix/integrator.hpp"
#include "magix/rng.hpp"

using namespace magix;

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Dense multivariate-normal log-pdf through LU (determinant + solve),
// independent of the Cholesky path used by the library.
double mvn_logpdf_lu(const Vec& v, const Vec& mean, const Mat& cov) {
  Eigen::FullPivLU<Mat> lu(cov);
  const Vec r = v - mean;
  const Vec sol = lu.solve(r);
  return -0.5 * (v.size() * kLog2Pi + std::log(std::abs(lu.determinant())) + r.dot(sol));
}

GpHyper test_hyper(double omega2, double rho, double sigma2, double c) {
  GpHyper h;
  h.matern.omega2 = omega2;
  h.matern.rho = rho;
  h.sigma2 = sigma2;
  h.mean_c = c;
  return h;
}

}  // namespace

TEST_CASE("marginal likelihood matches the dense LU oracle on 5 points") {
  Vec tau(5), y(5);
  tau << 0.0, 0.3, 0.55, 1.2, 2.0;
  y << 0.5, -0.2, 0.1, 0.9, -0.4;
  const GpHyper h = test_hyper(1.3, 0.8, 0.05, 0.1);
  Mat cov = kernel_matrix(h.matern, tau, tau);
  cov.diagonal().array() += h.sigma2;
  const double want = mvn_logpdf_lu(y, Vec::Constant(5, h.mean_c), cov);
  CHECK(marginal_log_likelihood(h, tau, y) == doctest::Approx(want).epsilon(1e-10));
}

TEST_CASE("dominant noise reduces to an iid Gaussian likelihood") {
  Rng rng(41);
  const int n = 20;
  Vec tau(n), y(n);
  for (int i = 0; i < n; ++i) tau(i) = 0.2 * i;
  for (int i = 0; i < n; ++i) y(i) = rng.normal();
  y.array() -= y.mean();
  const GpHyper h = test_hyper(1.0, 0.5, 1e6, 0.0);
  const double var = h.sigma2 + h.matern.omega2;
  const double iid = -0.5 * (n * kLog2Pi + n * std::log(var) + y.squaredNorm() / var);
  const double got = marginal_log_likelihood(h, tau, y);
  CHECK(std::abs(got - iid) < 1e-3 * std::abs(iid));
}

TEST_CASE("constant data: likelihood over c peaks at the sample mean") {
  const int n = 7;
  Vec tau(n), y = Vec::Constant(n, 2.5);
  for (int i = 0; i < n; ++i) tau(i) = 0.3 * i;
  auto ll_at = [&](double c) {
    GpHyper h = test_hyper(1e-4, 0.7, 0.01, c);
    return marginal_log_likelihood(h, tau, y);
  };
  const double at_mean = ll_at(2.5);
  for (double c : {2.0, 2.3, 2.7, 3.0}) CHECK(ll_at(c) < at_mean);
}

TEST_CASE("empirical Bayes recovers the lengthscale of simulated data") {
  // draw one GP path with known hyperparameters
  const GpHyper truth = test_hyper(1.0, 0.5, 0.01, 0.0);
  const int n = 100;
  Vec tau(n);
  for (int i = 0; i < n; ++i) tau(i) = 0.05 * i;
  Mat C = kernel_matrix(truth.matern, tau, tau);
  double jit = 0.0;
  const Mat L = cholesky_with_jitter(C, &jit);
  Rng rng(2024);
  Vec z(n);
  for (int i = 0; i < n; ++i) z(i) = rng.normal();
  Vec y = L * z;
  for (int i = 0; i < n; ++i) y(i) += std::sqrt(truth.sigma2) * rng.normal();

  GpHyper init = test_hyper(0.5, 1.0, 0.1, 0.0);
  const GpHyper fit = fit_empirical_bayes(tau, y, init);
  CHECK(fit.matern.rho > truth.matern.rho / 2.0);
  CHECK(fit.matern.rho < truth.matern.rho * 2.0);
  CHECK(marginal_log_likelihood(fit, tau, y) >= marginal_log_likelihood(init, tau, y));
}

TEST_CASE("empirical Bayes returns a converged init unchanged") {
  Rng rng(55);
  const int n = 25;
  Vec tau(n), y(n);
  for (int i = 0; i < n; ++i) tau(i) = 0.2 * i;
  for (int i = 0; i < n; ++i) y(i) = std::sin(tau(i)) + 0.05 * rng.normal();
  const GpHyper first = fit_empirical_bayes(tau, y, test_hyper(1.0, 1.0, 0.01, 0.0));
  // refitting from the optimum must stay put
  const GpHyper second = fit_empirical_bayes(tau, y, first);
  CHECK(std::abs(second.matern.omega2 - first.matern.omega2) < 1e-6 * std::abs(first.matern.omega2) + 1e-12);
  CHECK(std::abs(second.matern.rho - first.matern.rho) < 1e-6 * std::abs(first.matern.rho) + 1e-12);
  CHECK(std::abs(second.sigma2 - first.sigma2) < 1e-6 * std::abs(first.sigma2) + 1e-12);
  CHECK(std::abs(second.mean_c - first.mean_c) < 1e-6 * std::max(1.0, std::abs(first.mean_c)));
}

TEST_CASE("noise-free smooth data drives sigma2 to the floor") {
  const int n = 30;
  Vec tau(n), y(n);
  for (int i = 0; i < n; ++i) {
    tau(i) = 0.1 * i;
    y(i) = 0.3 + 0.8 * tau(i);  // exact linear trend
  }
  const GpHyper fit = fit_empirical_bayes(tau, y, test_hyper(1.0, 1.0, 0.1, 0.0));
  CHECK(fit.sigma2 <= 10.0 * sigma2_floor(y));
}

TEST_CASE("empirical Bayes rejects constant observations") {
  Vec tau(4), y = Vec::Constant(4, 1.0);
  tau << 0.0, 0.1, 0.2, 0.3;
  CHECK_THROWS_AS(fit_empirical_bayes(tau, y, GpHyper{}), NumericError);
}

TEST_CASE("predictive mean interpolates, reverts to the prior, and matches the oracle") {
  Vec tau(5), y(5);
  tau << 0.0, 0.4, 0.9, 1.3, 2.0;
  y << 1.0, 0.2, -0.5, 0.4, 1.2;

  // near-noiseless: interpolation at the observation times
  GpHyper h = test_hyper(1.0, 0.7, 1e-10, 0.3);
  TimeGrid at_tau;
  at_tau.times = tau;
  const Vec interp = predictive_mean(h, tau, y, at_tau);
  CHECK((interp - y).cwiseAbs().maxCoeff() < 1e-6);

  // far from the data the mean returns to c
  TimeGrid far;
  far.times = Vec::Constant(1, tau(4) + 10.0 * h.matern.rho);
  h.sigma2 = 0.01;
  const Vec at_far = predictive_mean(h, tau, y, far);
  CHECK(std::abs(at_far(0) - h.mean_c) < 1e-4 * std::sqrt(h.matern.omega2));

  // conditional-Gaussian oracle on a fresh grid
  TimeGrid grid = TimeGrid::linspace(-0.2, 2.2, 9);
  const Vec got = predictive_mean(h, tau, y, grid);
  Mat Ktt = kernel_matrix(h.matern, tau, tau);
  Ktt.diagonal().array() += h.sigma2;
  const Mat Kst = kernel_matrix(h.matern, grid.times, tau);
  const Vec want =
      (Kst * Eigen::FullPivLU<Mat>(Ktt).solve((y.array() - h.mean_c).matrix())).array() + h.mean_c;
  CHECK((got - want).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("component model: K matches the dense-inverse formula on a toy grid") {
  const GpHyper h = test_hyper(1.2, 0.6, 0.02, 0.0);
  TimeGrid grid;
  grid.times = Vec(3);
  grid.times << 0.0, 0.35, 1.0;
  const GpComponentModel m = build_component_model(h, grid);

  Mat C = kernel_matrix(h.matern, grid.times, grid.times);
  C.diagonal().array() += m.jitter_c;
  const Mat Cinv = Eigen::FullPivLU<Mat>(C).inverse();
  const Mat Kd1 = kernel_d1_matrix(h.matern, grid.times, grid.times);
  const Mat K_dense = kernel_d1d2_matrix(h.matern, grid.times, grid.times) - Kd1 * Cinv * Kd1.transpose();
  CHECK((m.K - K_dense).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((m.m - Kd1 * Cinv).cwiseAbs().maxCoeff() < 1e-8);

  // invariants on the stored factors
  const Mat recon = m.L_C * m.L_C.transpose();
  CHECK((recon - (kernel_matrix(h.matern, grid.times, grid.times) +
                  m.jitter_c * Mat::Identity(3, 3)))
            .cwiseAbs()
            .maxCoeff() < 1e-8 * h.matern.omega2);
}

TEST_CASE("component model on one point: K is the curvature limit") {
  const GpHyper h = test_hyper(2.0, 0.5, 0.1, 0.4);
  TimeGrid grid;
  grid.times = Vec::Constant(1, 1.0);
  const GpComponentModel m = build_component_model(h, grid);
  const double want = h.matern.omega2 * (2.0 * h.matern.nu / (h.matern.rho * h.matern.rho)) /
                      (2.0 * (h.matern.nu - 1.0));
  // 'K(t, t) = 0 makes the correction vanish
  CHECK(m.K(0, 0) == doctest::Approx(want).epsilon(1e-12));
  CHECK(m.m(0, 0) == 0.0);
}

TEST_CASE("whitened quadratic form equals the dense-oracle value") {
  Rng rng(67);
  const GpHyper h = test_hyper(0.9, 0.45, 0.05, -0.2);
  TimeGrid grid = TimeGrid::linspace(0.0, 2.0, 17);
  const GpComponentModel m = build_component_model(h, grid);
  Mat Cj = m.C;
  Cj.diagonal().array() += m.jitter_c;
  const Mat Cinv = Eigen::FullPivLU<Mat>(Cj).inverse();
  for (int trial = 0; trial < 10; ++trial) {
    Vec x(grid.size());
    for (int i = 0; i < x.size(); ++i) x(i) = rng.normal();
    const Vec r = (x.array() - h.mean_c).matrix();
    const Vec u = m.L_C.triangularView<Eigen::Lower>().solve(r);
    const double dense = r.dot(Cinv * r);
    CHECK(std::abs(u.squaredNorm() - dense) < 1e-8 * std::max(1.0, std::abs(dense)));
  }
}

TEST_CASE("K depends only on hyper and grid, and the derivative mean is linear in x") {
  const GpHyper h = test_hyper(1.0, 0.5, 0.02, 0.1);
  TimeGrid grid = TimeGrid::linspace(0.0, 1.5, 7);
  const GpComponentModel a = build_component_model(h, grid);
  const GpComponentModel b = build_component_model(h, grid);  // no data enters the build
  CHECK(a.K == b.K);
  CHECK(a.m == b.m);

  Rng rng(71);
  Vec x1(7), x2(7);
  for (int i = 0; i < 7; ++i) {
    x1(i) = rng.normal();
    x2(i) = rng.normal();
  }
  const double alpha = 0.37;
  const Vec lhs = a.cond_deriv_mean(alpha * x1 + (1.0 - alpha) * x2);
  const Vec rhs = alpha * a.cond_deriv_mean(x1) + (1.0 - alpha) * a.cond_deriv_mean(x2);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("conditional derivative mean tracks finite differences of the smoothed curve") {
  // FN component 1 on the standardized fitting grid
  const OdeSystem sys = make_system("fn");
  const TimeGrid raw = TimeGrid::linspace(0.0, 20.0, 161);
  const Trajectory truth = integrate(sys.f, initial_state(sys), raw, 10);
  TimeGrid grid;  // standardized: spacing 0.05
  grid.times = raw.times * 0.4;

  // observations: every 4th point, mild noise
  Rng rng(73);
  const int stride = 4;
  const int nobs = 41;
  Vec tau(nobs), y(nobs);
  for (int i = 0; i < nobs; ++i) {
    tau(i) = grid.times(stride * i);
    y(i) = truth.values(stride * i, 0) + 0.1 * rng.normal();
  }
  GpHyper init;
  init.matern.omega2 = 1.0;
  init.matern.rho = 1.0;
  init.sigma2 = 0.01;
  init.mean_c = y.mean();
  const GpHyper h = fit_empirical_bayes(tau, y, init);
  const Vec x = predictive_mean(h, tau, y, grid);
  const GpComponentModel m = build_component_model(h, grid);
  const Vec dmean = m.cond_deriv_mean(x);

  double max_err = 0.0;
  const double hstep = grid.times(1) - grid.times(0);
  for (int i = 1; i + 1 < grid.size(); ++i) {
    const double fd = (x(i + 1) - x(i - 1)) / (2.0 * hstep);
    max_err = std::max(max_err, std::abs(fd - dmean(i)));
  }
  CHECK(max_err <= 0.05);
}
