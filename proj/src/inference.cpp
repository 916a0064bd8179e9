#include "magix/inference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

namespace magix {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
}

void MagixConfig::validate() const {
  if (refinement < 4) throw std::invalid_argument("MagixConfig: refinement must be at least 4");
  if (iterations < 0) throw std::invalid_argument("MagixConfig: negative iteration count");
  if (!(lr_theta.gamma > 0.5 && lr_theta.gamma <= 1.0) || !(lr_x.gamma > 0.5 && lr_x.gamma <= 1.0))
    throw std::invalid_argument("MagixConfig: learning-rate exponent must lie in (0.5, 1]");
  if (hidden.empty()) throw std::invalid_argument("MagixConfig: need at least one hidden layer");
  if (!(spacing > 0.0)) throw std::invalid_argument("MagixConfig: spacing must be positive");
  if (seeds.empty()) throw std::invalid_argument("MagixConfig: need at least one seed");
  if (!(matern_nu > 1.0)) throw std::invalid_argument("MagixConfig: matern nu must exceed 1");
}

Standardization standardize_time(const TimeGrid& raw, double spacing) {
  raw.validate();
  Standardization s;
  s.shift = raw.front();
  s.scale = (raw.size() < 2) ? 1.0 : spacing / raw.mean_spacing();
  return s;
}

TimeGrid refine_observation_grid(const ObservationSet& obs_raw, int refinement) {
  obs_raw.validate();
  if (refinement < 1) throw std::invalid_argument("refine_observation_grid: refinement must be >= 1");
  std::set<double> uniq;
  for (const auto& c : obs_raw.comps)
    for (int i = 0; i < c.times.size(); ++i) uniq.insert(c.times(i));
  const std::vector<double> u(uniq.begin(), uniq.end());
  if (u.size() < 2) throw std::invalid_argument("refine_observation_grid: need at least 2 distinct times");
  std::vector<double> pts;
  pts.reserve((u.size() - 1) * refinement + 1);
  for (size_t i = 0; i + 1 < u.size(); ++i) {
    for (int k = 0; k < refinement; ++k)
      pts.push_back(u[i] + (u[i + 1] - u[i]) * (static_cast<double>(k) / refinement));
  }
  pts.push_back(u.back());
  TimeGrid g;
  g.times = Eigen::Map<const Vec>(pts.data(), pts.size());
  g.validate();
  return g;
}

Mat MagixProblem::trajectory(const MagixState& state) const {
  const int n = grid_size(), D = dim();
  Mat x(n, D);
  for (int d = 0; d < D; ++d) {
    x.col(d) = models[d].L_C.triangularView<Eigen::Lower>() * state.u.col(d);
    x.col(d).array() += models[d].hyper.mean_c;
  }
  return x;
}

double log_posterior(const MagixState& state, const MagixProblem& prob) {
  const int n = prob.grid_size(), D = prob.dim();
  const Mat x = prob.trajectory(state);
  const Mat f = mlp_forward_batch(state.mlp, x);

  double lp = 0.0;
  for (int d = 0; d < D; ++d) {
    const GpComponentModel& gm = prob.models[d];
    // GP prior: whitened coordinates make the quadratic form u'u
    lp += -0.5 * (n * kLog2Pi + gm.logdet_C + state.u.col(d).squaredNorm());
    // tempered observation likelihood
    const auto& idx = prob.obs_idx[d];
    const Vec& y = prob.obs.comps[d].values;
    double rss = 0.0;
    for (size_t i = 0; i < idx.size(); ++i) {
      const double r = y(static_cast<int>(i)) - x(idx[i], d);
      rss += r * r;
    }
    const double Nd = static_cast<double>(idx.size());
    lp += -0.5 * prob.tempering_factor(d) *
          (Nd * kLog2Pi + Nd * std::log(state.sigma2(d)) + rss / state.sigma2(d));
    // manifold constraint: f_theta(x)_d against the conditional derivative law
    const Vec e = f.col(d) - gm.cond_deriv_mean(x.col(d));
    const Vec w = gm.L_K.triangularView<Eigen::Lower>().solve(e);
    lp += -0.5 * (n * kLog2Pi + gm.logdet_K + w.squaredNorm());
  }
  return lp;
}

PosteriorGrads grad_log_posterior(const MagixState& state, const MagixProblem& prob) {
  const int n = prob.grid_size(), D = prob.dim();
  const Mat x = prob.trajectory(state);
  MlpBatchCache cache;
  const Mat f = mlp_forward_batch(state.mlp, x, &cache);

  // K^{-1}-weighted constraint residuals, one column per component
  Mat w(n, D);
  for (int d = 0; d < D; ++d) {
    const GpComponentModel& gm = prob.models[d];
    const Vec e = f.col(d) - gm.cond_deriv_mean(x.col(d));
    Vec wd = gm.L_K.triangularView<Eigen::Lower>().solve(e);
    wd = gm.L_K.transpose().triangularView<Eigen::Upper>().solve(wd);
    w.col(d) = wd;
  }

  PosteriorGrads g;
  // the constraint term reaches x both through f's input and theta
  Mat grad_x_from_f;
  mlp_backward_batch(state.mlp, cache, -w, &grad_x_from_f, &g.grad_theta);

  g.grad_u.resize(n, D);
  for (int d = 0; d < D; ++d) {
    const GpComponentModel& gm = prob.models[d];
    Vec grad_x = grad_x_from_f.col(d);
    grad_x.noalias() += gm.m.transpose() * w.col(d);  // through the conditional derivative mean
    const auto& idx = prob.obs_idx[d];
    const Vec& y = prob.obs.comps[d].values;
    const double coef = prob.tempering_factor(d) / state.sigma2(d);
    for (size_t i = 0; i < idx.size(); ++i)
      grad_x(idx[i]) += coef * (y(static_cast<int>(i)) - x(idx[i], d));
    g.grad_u.col(d) = gm.L_C.transpose().triangularView<Eigen::Upper>() * grad_x;
    g.grad_u.col(d) -= state.u.col(d);  // the whitened GP prior
  }
  return g;
}

Vec update_sigma2(const MagixState& state, const MagixProblem& prob) {
  const Mat x = prob.trajectory(state);
  const int D = prob.dim();
  Vec s2(D);
  for (int d = 0; d < D; ++d) {
    const auto& idx = prob.obs_idx[d];
    const Vec& y = prob.obs.comps[d].values;
    double rss = 0.0;
    for (size_t i = 0; i < idx.size(); ++i) {
      const double r = y(static_cast<int>(i)) - x(idx[i], d);
      rss += r * r;
    }
    s2(d) = std::max(prob.noise_floor(d), rss / static_cast<double>(idx.size()));
  }
  return s2;
}

void AdamState::step(double* params, const Vec& grad, double lr) {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  ++t;
  m1 = beta1 * m1 + (1.0 - beta1) * grad;
  m2 = beta2 * m2.array().matrix() + (1.0 - beta2) * grad.array().square().matrix();
  const double c1 = 1.0 - std::pow(beta1, t);
  const double c2 = 1.0 - std::pow(beta2, t);
  Eigen::Map<Vec> p(params, grad.size());
  p.array() += lr * (m1.array() / c1) / ((m2.array() / c2).sqrt() + eps);
}

namespace {

// theta-only ascent used both for initialization pre-training and the main
// loop's theta block.
void theta_step(MagixState& state, const MagixProblem& prob, double eta) {
  const PosteriorGrads g = grad_log_posterior(state, prob);
  state.opt_theta.step(state.mlp.params.data(), g.grad_theta, eta);
}

}  // namespace

std::pair<MagixState, MagixProblem> initialize(const ObservationSet& obs_raw, const TimeGrid& grid_raw,
                                               const MagixConfig& cfg, uint64_t seed) {
  cfg.validate();
  obs_raw.validate();
  grid_raw.validate();
  const int D = obs_raw.dim();
  const int n = grid_raw.size();

  MagixProblem prob;
  prob.std_map = standardize_time(grid_raw, cfg.spacing);
  prob.grid = prob.std_map.to_std(grid_raw);
  prob.obs = obs_raw;
  for (auto& c : prob.obs.comps) c.times = (c.times.array() - prob.std_map.shift) * prob.std_map.scale;
  prob.obs_idx = prob.obs.indices_on(prob.grid);
  prob.noise_floor.resize(D);
  prob.tempering_factor.resize(D);
  prob.models.reserve(D);

  MagixState state;
  state.u.resize(n, D);
  state.sigma2.resize(D);

  for (int d = 0; d < D; ++d) {
    const Vec& tau = prob.obs.comps[d].times;
    const Vec& y = prob.obs.comps[d].values;
    prob.noise_floor(d) = sigma2_floor(y);
    prob.tempering_factor(d) =
        (cfg.tempering == Tempering::ratio) ? static_cast<double>(n) / static_cast<double>(tau.size()) : 1.0;

    GpHyper init_hyper;
    init_hyper.matern.nu = cfg.matern_nu;
    init_hyper.matern.omega2 = std::max((y.array() - y.mean()).square().mean(), 1e-8);
    init_hyper.matern.rho = std::max(prob.grid.span() / 4.0, cfg.spacing);
    init_hyper.sigma2 = std::max(0.1 * init_hyper.matern.omega2, prob.noise_floor(d) * 2.0);
    init_hyper.mean_c = y.mean();
    const GpHyper hyper = fit_empirical_bayes(tau, y, init_hyper, cfg.eb_budget);

    prob.models.push_back(build_component_model(hyper, prob.grid));
    const Vec x_d = predictive_mean(hyper, tau, y, prob.grid);
    state.u.col(d) = prob.models[d].L_C.triangularView<Eigen::Lower>().solve(
        (x_d.array() - hyper.mean_c).matrix());
    state.sigma2(d) = hyper.sigma2;
  }

  // theta: He-initialized network, then ascent on the objective in theta
  // only. The constant pre-training rate has to move weights O(1) from the
  // random init; the decayed main-loop schedule is for fine-tuning.
  std::vector<int> widths;
  widths.push_back(D);
  for (int h : cfg.hidden) widths.push_back(h);
  widths.push_back(D);
  state.mlp = mlp_init(widths, seed);
  state.opt_theta.reset(state.mlp.param_count());
  for (int l = 1; l <= cfg.pretrain_iterations; ++l) theta_step(state, prob, cfg.pretrain_rate);

  // the main loop starts with fresh moments; pre-training is part of the
  // initialization stage
  state.opt_theta.reset(state.mlp.param_count());
  state.opt_u.reset(n * D);
  state.iteration = 0;
  return {std::move(state), std::move(prob)};
}

namespace {

void run_iterations(MagixState& state, const MagixProblem& prob, const MagixConfig& cfg,
                    int count, std::vector<double>& trace) {
  for (int k = 0; k < count; ++k) {
    const int l = state.iteration + 1;
    auto u_step = [&] {
      const PosteriorGrads g = grad_log_posterior(state, prob);
      const Eigen::Map<const Vec> gu(g.grad_u.data(), g.grad_u.size());
      state.opt_u.step(state.u.data(), gu, cfg.lr_x.at(l));
    };
    if (cfg.order == UpdateOrder::theta_first) {
      theta_step(state, prob, cfg.lr_theta.at(l));
      u_step();
    } else {
      u_step();
      theta_step(state, prob, cfg.lr_theta.at(l));
    }
    state.sigma2 = update_sigma2(state, prob);
    state.iteration = l;
    const double obj = log_posterior(state, prob);
    if (!std::isfinite(obj)) throw DivergenceError("fit: objective became non-finite at iteration " + std::to_string(l));
    trace.push_back(obj);
  }
}

}  // namespace

FitResult fit(const ObservationSet& obs_raw, const TimeGrid& grid_raw, const MagixConfig& cfg) {
  cfg.validate();
  FitResult best;
  bool have_best = false;
  std::string last_error;

  for (uint64_t seed : cfg.seeds) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      FitResult r;
      auto [state, prob] = initialize(obs_raw, grid_raw, cfg, seed);
      r.state = std::move(state);
      r.problem = std::move(prob);
      r.config = cfg;
      r.seed_used = seed;
      r.trace.push_back(log_posterior(r.state, r.problem));
      run_iterations(r.state, r.problem, cfg, cfg.iterations, r.trace);
      r.x = r.problem.trajectory(r.state);
      r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (!have_best || r.trace.back() > best.trace.back()) {
        best = std::move(r);
        have_best = true;
      }
    } catch (const DivergenceError& e) {
      last_error = e.what();
    }
  }
  if (!have_best) throw DivergenceError("fit: every restart diverged (" + last_error + ")");
  return best;
}

void fit_continue(FitResult& result, int extra_iterations) {
  if (extra_iterations < 0) throw std::invalid_argument("fit_continue: negative iteration count");
  const auto t0 = std::chrono::steady_clock::now();
  run_iterations(result.state, result.problem, result.config, extra_iterations, result.trace);
  result.x = result.problem.trajectory(result.state);
  result.seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace magix
