#include "magix/gp.hpp"

#include <cmath>
#include <cstdlib>

namespace magix {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double log_det_from_chol(const Mat& L) {
  double s = 0.0;
  for (int i = 0; i < L.rows(); ++i) s += std::log(L(i, i));
  return 2.0 * s;
}

}  // namespace

Mat cholesky_with_jitter(const Mat& A, double* jitter_out) {
  const double diag_mean = A.diagonal().mean();
  const double levels[] = {0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6};
  for (double lambda : levels) {
    Mat Aj = A;
    const double jitter = lambda * diag_mean;
    Aj.diagonal().array() += jitter;
    Eigen::LLT<Mat> llt(Aj);
    if (llt.info() == Eigen::Success) {
      if (jitter_out) *jitter_out = jitter;
      return llt.matrixL();
    }
  }
  throw NumericError("cholesky_with_jitter: factorization failed at maximum jitter");
}

double sigma2_floor(const Vec& y) {
  if (y.size() < 2) return 0.0;
  const double mean = y.mean();
  const double var = (y.array() - mean).square().sum() / (y.size() - 1);
  return 1e-6 * var;
}

double marginal_log_likelihood(const GpHyper& hyper, const Vec& tau, const Vec& y) {
  if (tau.size() != y.size() || tau.size() < 2)
    throw std::invalid_argument("marginal_log_likelihood: need matching tau/y with >= 2 points");
  const int n = static_cast<int>(tau.size());
  Mat S = kernel_matrix(hyper.matern, tau, tau);
  S.diagonal().array() += hyper.sigma2;
  double jitter = 0.0;
  const Mat L = cholesky_with_jitter(S, &jitter);
  const Vec r = y.array() - hyper.mean_c;
  const Vec w = L.triangularView<Eigen::Lower>().solve(r);
  return -0.5 * (n * kLog2Pi + log_det_from_chol(L) + w.squaredNorm());
}

namespace {

// Marginal likelihood and its gradient in the optimization coordinates
// p = (log omega2, log rho, z, c) with sigma2 = floor + exp(z).
struct MllEval {
  double value;
  Eigen::Vector4d grad;
};

GpHyper hyper_from_params(const Eigen::Vector4d& p, double nu, double floor) {
  GpHyper h;
  h.matern.nu = nu;
  h.matern.omega2 = std::exp(p(0));
  h.matern.rho = std::exp(p(1));
  h.sigma2 = floor + std::exp(p(2));
  h.mean_c = p(3);
  return h;
}

MllEval mll_with_grad(const Eigen::Vector4d& p, double nu, double floor, const Vec& tau, const Vec& y) {
  const GpHyper h = hyper_from_params(p, nu, floor);
  const int n = static_cast<int>(tau.size());

  Mat C(n, n), dCdrho(n, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const KernelEval e = kernel_eval(h.matern, tau(i), tau(j));
      C(i, j) = e.k;
      dCdrho(i, j) = e.d_rho;
    }
  }
  Mat S = C;
  S.diagonal().array() += h.sigma2;
  double jitter = 0.0;
  const Mat L = cholesky_with_jitter(S, &jitter);

  const Vec r = y.array() - h.mean_c;
  const Vec w = L.triangularView<Eigen::Lower>().solve(r);
  const Vec alpha = L.transpose().triangularView<Eigen::Upper>().solve(w);

  MllEval out;
  out.value = -0.5 * (n * kLog2Pi + log_det_from_chol(L) + w.squaredNorm());

  // Sinv via two triangular solves; n stays small so the dense inverse is fine.
  Mat Sinv = Mat::Identity(n, n);
  L.triangularView<Eigen::Lower>().solveInPlace(Sinv);
  L.transpose().triangularView<Eigen::Upper>().solveInPlace(Sinv);

  auto quad_minus_trace = [&](const Mat& dS) {
    return 0.5 * (alpha.dot(dS * alpha) - (Sinv.cwiseProduct(dS)).sum());
  };
  out.grad(0) = quad_minus_trace(C);                         // d/d log omega2: dS = C
  out.grad(1) = quad_minus_trace(dCdrho * h.matern.rho);     // d/d log rho
  const double dsig = h.sigma2 - floor;                      // d sigma2 / d z
  out.grad(2) = 0.5 * (alpha.squaredNorm() - Sinv.trace()) * dsig;
  out.grad(3) = alpha.sum();                                 // d/dc
  return out;
}

// BFGS ascent with Armijo backtracking; returns the best point visited.
Eigen::Vector4d bfgs_ascent(Eigen::Vector4d p, double nu, double floor, const Vec& tau, const Vec& y,
                            int budget, double* best_value) {
  Eigen::Matrix4d Hinv = Eigen::Matrix4d::Identity();
  MllEval cur;
  try {
    cur = mll_with_grad(p, nu, floor, tau, y);
  } catch (const NumericError&) {
    *best_value = -std::numeric_limits<double>::infinity();
    return p;
  }
  Eigen::Vector4d best_p = p;
  double best_v = cur.value;

  for (int it = 0; it < budget; ++it) {
    if (cur.grad.norm() < 1e-8 * std::max(1.0, std::abs(cur.value))) break;
    Eigen::Vector4d dir = Hinv * cur.grad;
    if (dir.dot(cur.grad) <= 0.0) {  // reset on a non-ascent direction
      Hinv.setIdentity();
      dir = cur.grad;
    }
    double step = 1.0;
    const double slope = dir.dot(cur.grad);
    MllEval next;
    Eigen::Vector4d pn;
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls) {
      pn = p + step * dir;
      // keep parameters in a numerically safe box
      pn(0) = std::clamp(pn(0), -30.0, 30.0);
      pn(1) = std::clamp(pn(1), -30.0, 30.0);
      pn(2) = std::clamp(pn(2), -40.0, 30.0);
      try {
        next = mll_with_grad(pn, nu, floor, tau, y);
      } catch (const NumericError&) {
        step *= 0.5;
        continue;
      }
      if (std::isfinite(next.value) && next.value >= cur.value + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    const Eigen::Vector4d s = pn - p;
    const Eigen::Vector4d g = next.grad - cur.grad;  // ascent: curvature uses -g
    const double sy = -s.dot(g);
    if (sy > 1e-12) {
      const Eigen::Vector4d Hg = Hinv * (-g);
      const double gHg = (-g).dot(Hg);
      Hinv += ((sy + gHg) / (sy * sy)) * (s * s.transpose()) -
              (Hg * s.transpose() + s * Hg.transpose()) / sy;
    } else {
      Hinv.setIdentity();
    }
    p = pn;
    cur = next;
    if (cur.value > best_v) {
      best_v = cur.value;
      best_p = p;
    }
  }
  *best_value = best_v;
  return best_p;
}

}  // namespace

GpHyper fit_empirical_bayes(const Vec& tau, const Vec& y, const GpHyper& init, int budget) {
  if (tau.size() < 3) throw std::invalid_argument("fit_empirical_bayes: need at least 3 observations");
  init.validate();
  const double floor = sigma2_floor(y);
  if (!(floor > 0.0)) throw NumericError("fit_empirical_bayes: degenerate constant observations");
  const double nu = init.matern.nu;

  auto to_params = [&](const GpHyper& h) {
    Eigen::Vector4d p;
    p(0) = std::log(h.matern.omega2);
    p(1) = std::log(h.matern.rho);
    p(2) = std::log(std::max(h.sigma2 - floor, 1e-12 * std::max(h.sigma2, floor)));
    p(3) = h.mean_c;
    return p;
  };

  // Fixed point: a converged init is returned unchanged.
  const Eigen::Vector4d p_init = to_params(init);
  MllEval at_init = mll_with_grad(p_init, nu, floor, tau, y);
  if (at_init.grad.norm() < 1e-8 * std::max(1.0, std::abs(at_init.value))) return init;

  Eigen::Vector4d best_p = p_init;
  double best_v = at_init.value;

  double v = 0.0;
  Eigen::Vector4d p = bfgs_ascent(p_init, nu, floor, tau, y, budget, &v);
  if (v > best_v) {
    best_v = v;
    best_p = p;
  }

  // Multi-start over log rho: GP marginal likelihoods are multimodal in the
  // lengthscale. Starts span [span/20, span].
  const double span = tau(tau.size() - 1) - tau(0);
  const double var_y = (y.array() - y.mean()).square().sum() / std::max<int>(1, y.size() - 1);
  for (double frac : {1.0 / 20.0, 1.0 / std::sqrt(20.0), 1.0}) {
    Eigen::Vector4d p0;
    p0(0) = std::log(std::max(var_y, 1e-12));
    p0(1) = std::log(span * frac);
    p0(2) = std::log(std::max(0.1 * var_y, floor));
    p0(3) = y.mean();
    p = bfgs_ascent(p0, nu, floor, tau, y, budget, &v);
    if (v > best_v) {
      best_v = v;
      best_p = p;
    }
  }
  return hyper_from_params(best_p, nu, floor);
}

Vec predictive_mean(const GpHyper& hyper, const Vec& tau, const Vec& y, const TimeGrid& grid) {
  hyper.validate();
  Mat S = kernel_matrix(hyper.matern, tau, tau);
  S.diagonal().array() += hyper.sigma2;
  double jitter = 0.0;
  const Mat L = cholesky_with_jitter(S, &jitter);
  const Vec r = y.array() - hyper.mean_c;
  Vec alpha = L.triangularView<Eigen::Lower>().solve(r);
  alpha = L.transpose().triangularView<Eigen::Upper>().solve(alpha);
  const Mat Kxt = kernel_matrix(hyper.matern, grid.times, tau);
  return (Kxt * alpha).array() + hyper.mean_c;
}

GpComponentModel build_component_model(const GpHyper& hyper, const TimeGrid& grid) {
  hyper.validate();
  grid.validate();
  const int n = grid.size();

  GpComponentModel model;
  model.hyper = hyper;
  model.grid = grid;

  model.C.resize(n, n);
  Mat Kd1(n, n), Kd1d2(n, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const KernelEval e = kernel_eval(hyper.matern, grid.times(i), grid.times(j));
      model.C(i, j) = e.k;
      Kd1(i, j) = e.d1;      // 'K: derivative in the first argument
      Kd1d2(i, j) = e.d1d2;  // K''
    }
  }

  model.L_C = cholesky_with_jitter(model.C, &model.jitter_c);
  model.logdet_C = 0.0;
  for (int i = 0; i < n; ++i) model.logdet_C += 2.0 * std::log(model.L_C(i, i));

  // m = 'K (C + jitter I)^{-1} via triangular solves against L_C
  Mat tmp = model.L_C.triangularView<Eigen::Lower>().solve(Kd1.transpose());
  tmp = model.L_C.transpose().triangularView<Eigen::Upper>().solve(tmp);
  model.m = tmp.transpose();

  // K = K'' - 'K (C + jitter I)^{-1} K', with K' = 'K^T
  model.K = Kd1d2 - model.m * Kd1.transpose();
  // enforce exact symmetry before factorizing
  model.K = 0.5 * (model.K + model.K.transpose()).eval();

  {
    const char* env = std::getenv("MAGIX_KJITTER");
    Mat Kj = model.K;
    if (env) {
      const double lam = std::atof(env);
      model.jitter_k = lam * Kj.diagonal().mean();
      Kj.diagonal().array() += model.jitter_k;
      Eigen::LLT<Mat> llt(Kj);
      model.L_K = llt.matrixL();
    } else {
      model.L_K = cholesky_with_jitter(model.K, &model.jitter_k);
    }
  }
  model.logdet_K = 0.0;
  for (int i = 0; i < n; ++i) model.logdet_K += 2.0 * std::log(model.L_K(i, i));
  return model;
}

}  // namespace magix
