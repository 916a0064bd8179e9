#pragma once

#include <optional>
#include <string>
#include <vector>

#include "magix/dynamics.hpp"
#include "magix/inference.hpp"
#include "magix/integrator.hpp"
#include "magix/types.hpp"

namespace magix::bench {

// One benchmark run: a 321-point groundtruth trajectory whose first 161
// points form the fitting phase, noisy observations on a subset of the
// fitting phase, replicate looping, and RMSE aggregation.
struct ExperimentSpec {
  std::string system = "fn";     // fn, lv, hes1, hamiltonian:D
  std::string pattern = "full";  // full or partial
  double noise = 0.1;            // observation noise standard deviation
  int replicates = 10;
  uint64_t base_seed = 7201;
  MagixConfig config;
  int truth_points = 321;
  int fitting_points = 161;
  int truth_substeps = 10;

  void validate() const;
};

struct Dataset {
  std::string system;
  Trajectory truth;       // truth_points rows, raw time
  TimeGrid fitting_grid;  // first fitting_points truth times
  ObservationSet obs;     // raw time
  uint64_t seed = 0;
};

// Groundtruth by integration from the system's initial state plus iid
// Gaussian noise on the sampled grid points. The full pattern observes every
// component at every 4th fitting point; partial patterns stagger components
// so no time point carries all of them.
Dataset generate_dataset(const ExperimentSpec& spec, uint64_t seed);

// Observation grid indices (0-based into the fitting grid) for a component
// under a pattern; exposed for tests.
std::vector<int> observation_indices(const std::string& system, const std::string& pattern, int component,
                                     int fitting_points);

struct TrajectoryWithFlag {
  Trajectory traj;  // raw time, full_grid rows
  bool diverged = false;
};

// Optimized x(T) plus an integrated forecast of the learned dynamics from
// the last fitted point. full_grid_raw must extend the fitting grid.
TrajectoryWithFlag inferred_trajectory(const FitResult& fit, const TimeGrid& full_grid_raw,
                                       int substeps = 10);

// Integration of the learned dynamics over the whole grid from the inferred
// initial state.
TrajectoryWithFlag reconstructed_trajectory(const FitResult& fit, const TimeGrid& full_grid_raw,
                                            int substeps = 10);

// Per-component root mean squared error over grid rows [begin, end).
Vec rmse(const Trajectory& traj, const Trajectory& truth, int begin, int end);

// Appendix-style divergence rule: any forecasting RMSE strictly above 5.
bool is_divergent(const std::vector<double>& forecast_rmses);
inline constexpr double kDivergenceRmse = 5.0;

struct ReplicateResult {
  int replicate = 0;
  uint64_t seed = 0;
  Vec fit_inferred, fit_reconstructed;   // per-component fitting RMSE
  Vec fc_inferred, fc_reconstructed;     // per-component forecasting RMSE
  bool diverged = false;
  double fit_seconds = 0.0;
  double objective = 0.0;
};

struct Summary {
  Vec mean;
  Vec sd;
};

struct EvalReport {
  ExperimentSpec spec;
  std::vector<ReplicateResult> replicates;
  int divergence_count = 0;
  // aggregates exclude divergent replicates
  Summary fit_inferred, fit_reconstructed, fc_inferred, fc_reconstructed;
  double seconds_mean = 0.0;
  double seconds_sd = 0.0;
};

// Runs the replicate loop (optionally across threads; per-replicate results
// are keyed by index so the aggregate does not depend on scheduling).
EvalReport run_experiment(const ExperimentSpec& spec, int threads = 1);

// Aggregation split out for recomputation in tests.
EvalReport aggregate(const ExperimentSpec& spec, std::vector<ReplicateResult> replicates);

// One replicate end to end: generate, fit, forecast, score.
ReplicateResult run_replicate(const ExperimentSpec& spec, int replicate_index);

}  // namespace magix::bench
