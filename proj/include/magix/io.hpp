#pragma once

#include <string>

#include "magix/benchmarks.hpp"
#include "magix/inference.hpp"

#include <nlohmann/json.hpp>

namespace magix::io {

using json = nlohmann::json;

// --- config / spec <-> json ---
json config_to_json(const MagixConfig& cfg);
MagixConfig config_from_json(const json& j);
json spec_to_json(const bench::ExperimentSpec& spec);
bench::ExperimentSpec spec_from_json(const json& j);

// --- dataset files -------------------------------------------------------
// A dataset directory holds truth.csv (time,x1..xD), obs.csv
// (component,time,value; 1-based components) and meta.json.
void save_dataset(const bench::Dataset& ds, const bench::ExperimentSpec& spec, const std::string& dir);
struct LoadedDataset {
  ObservationSet obs;
  TimeGrid fitting_grid;       // from meta when present, else refined from obs
  Trajectory truth;            // empty grid when absent
  bool has_truth = false;
  json meta;                   // empty object when absent
};
LoadedDataset load_dataset(const std::string& dir, int refinement_fallback = 4);

// --- checkpoints ----------------------------------------------------------
// Self-contained JSON: config, standardization, raw grid, observations,
// per-component hyperparameters, whitened trajectory, network parameters,
// noise variances, iteration count and objective trace.
json checkpoint_to_json(const FitResult& fit);
FitResult checkpoint_from_json(const json& j);
void save_checkpoint(const FitResult& fit, const std::string& path);
FitResult load_checkpoint(const std::string& path);

// --- result files ---------------------------------------------------------
// Trajectory CSV: time,x1..xD,divergent (0/1 per row, 1 once integration of
// the learned dynamics left the admissible domain).
void save_trajectory(const bench::TrajectoryWithFlag& t, const std::string& path);
void save_trace(const std::vector<double>& trace, const std::string& path);
// report.json and replicates.csv are byte-stable per seed; wall-clock
// measurements go to the separate timings file.
void save_report(const bench::EvalReport& rep, const std::string& json_path, const std::string& csv_path,
                 const std::string& timings_path);

// Round-trip double formatting shared by every writer (%.17g).
std::string format_double(double v);

}  // namespace magix::io
