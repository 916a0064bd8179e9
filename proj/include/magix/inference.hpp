#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "magix/dynamics.hpp"
#include "magix/gp.hpp"
#include "magix/types.hpp"

namespace magix {

// Affine map t_std = (t_raw - shift) * scale chosen so nearby standardized
// grid points are `spacing` apart. Derivatives learned in standardized time
// convert back to raw-time derivatives by multiplying with `scale`.
struct Standardization {
  double shift = 0.0;
  double scale = 1.0;

  double to_std(double t_raw) const { return (t_raw - shift) * scale; }
  double to_raw(double t_std) const { return t_std / scale + shift; }
  TimeGrid to_std(const TimeGrid& raw) const {
    TimeGrid g;
    g.times = (raw.times.array() - shift) * scale;
    return g;
  }
};

Standardization standardize_time(const TimeGrid& raw, double spacing = 0.05);

// eta_l = a (b + l)^{-gamma}
struct LearningRate {
  double a = 0.0;
  double b = 0.0;
  double gamma = 0.6;
  double at(int l) const { return a * std::pow(b + l, -gamma); }
};

enum class Tempering { ratio, none };
enum class UpdateOrder { theta_first, x_first };

struct MagixConfig {
  int refinement = 4;                    // grid density vs observations
  int iterations = 2500;                 // L
  LearningRate lr_theta{0.005, 0.0, 0.6};
  LearningRate lr_x{0.05, 500.0, 0.6};
  Tempering tempering = Tempering::ratio;
  UpdateOrder order = UpdateOrder::theta_first;
  std::vector<int> hidden{512};
  double spacing = 0.05;                 // standardized grid spacing
  int pretrain_iterations = 500;         // theta-only ascent at init
  double pretrain_rate = 1e-3;           // constant rate for the theta warm-up
  std::vector<uint64_t> seeds{1};        // restarts; best final objective wins
  int eb_budget = 200;
  double matern_nu = 2.01;

  void validate() const;
};

// First/second-moment accumulators for the ascent steps. The raw objective
// gradients span several orders of magnitude (the conditional derivative
// precision is badly conditioned), so the published step sizes are applied
// to moment-normalized gradients.
struct AdamState {
  Vec m1;
  Vec m2;
  int t = 0;

  void reset(int n) {
    m1 = Vec::Zero(n);
    m2 = Vec::Zero(n);
    t = 0;
  }
  // ascent step: params += lr * mhat / (sqrt(vhat) + eps)
  void step(double* params, const Vec& grad, double lr);
};

// Jointly optimized quantities: whitened trajectory u (x_d = c_d + L_C u_d),
// network parameters, and per-component noise variances.
struct MagixState {
  Mat u;        // n x D
  MlpDynamics mlp;
  Vec sigma2;   // D
  int iteration = 0;
  AdamState opt_u;
  AdamState opt_theta;
};

// Everything fixed for the duration of one fit.
struct MagixProblem {
  TimeGrid grid;  // standardized
  Standardization std_map;
  std::vector<GpComponentModel> models;
  ObservationSet obs;  // times standardized
  std::vector<std::vector<int>> obs_idx;
  Vec noise_floor;        // per component
  Vec tempering_factor;   // |T| / N_d (or 1)

  int dim() const { return static_cast<int>(models.size()); }
  int grid_size() const { return grid.size(); }
  // de-whitened trajectory
  Mat trajectory(const MagixState& state) const;
};

// Tempered log posterior of Eq-style assembly: GP prior + constraint +
// tempered observation blocks, multivariate-normal constants included.
double log_posterior(const MagixState& state, const MagixProblem& prob);

struct PosteriorGrads {
  Mat grad_u;      // n x D
  Vec grad_theta;  // flat
};
PosteriorGrads grad_log_posterior(const MagixState& state, const MagixProblem& prob);

// Closed-form maximizer of the objective in sigma2: per-component mean
// squared observation residual, floored.
Vec update_sigma2(const MagixState& state, const MagixProblem& prob);

// GP empirical-Bayes fits, predictive-mean trajectory init, whitening, and
// theta pre-training. grid_raw must contain every observation time.
std::pair<MagixState, MagixProblem> initialize(const ObservationSet& obs_raw, const TimeGrid& grid_raw,
                                               const MagixConfig& cfg, uint64_t seed);

struct FitResult {
  MagixState state;
  MagixProblem problem;
  MagixConfig config;
  std::vector<double> trace;  // objective; length iterations + 1
  Mat x;                      // de-whitened x(T), n x D
  uint64_t seed_used = 0;
  double seconds = 0.0;
};

// Algorithm: per iteration a theta ascent step, an x(T) (whitened) ascent
// step, and the closed-form sigma2 update. Runs once per configured seed and
// returns the run with the highest final objective. Throws DivergenceError
// if every restart produced a non-finite objective.
FitResult fit(const ObservationSet& obs_raw, const TimeGrid& grid_raw, const MagixConfig& cfg);

// Continues a fitted state for extra iterations (iteration numbering and
// the learning-rate schedules carry on from the checkpointed count).
void fit_continue(FitResult& result, int extra_iterations);

// Grid built from the union of all observation times with every gap split
// into `refinement` equal pieces, so each tau_d lies on the grid by
// construction. Used when no explicit grid accompanies the data.
TimeGrid refine_observation_grid(const ObservationSet& obs_raw, int refinement);

}  // namespace magix
