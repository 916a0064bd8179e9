#include "magix/capi.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "magix/benchmarks.hpp"
#include "magix/io.hpp"

using json = nlohmann::json;

struct magix_dataset {
  magix::bench::Dataset ds;
  magix::bench::ExperimentSpec spec;
};

struct magix_model {
  magix::FitResult fit;
};

struct magix_report {
  magix::bench::EvalReport report;
};

namespace {

thread_local std::string g_last_error;

template <typename Fn>
magix_status guarded(Fn&& fn) {
  try {
    fn();
    return MAGIX_OK;
  } catch (const magix::DivergenceError& e) {
    g_last_error = e.what();
    return MAGIX_ERR_DIVERGENCE;
  } catch (const magix::NumericError& e) {
    g_last_error = e.what();
    return MAGIX_ERR_NUMERIC;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return MAGIX_ERR_USAGE;
  }
}

magix_status usage_error(const char* msg) {
  g_last_error = msg;
  return MAGIX_ERR_USAGE;
}

}  // namespace

extern "C" {

const char* magix_last_error(void) { return g_last_error.c_str(); }

const char* magix_status_name(magix_status s) {
  switch (s) {
    case MAGIX_OK: return "ok";
    case MAGIX_ERR_USAGE: return "usage error";
    case MAGIX_ERR_NUMERIC: return "numeric failure";
    case MAGIX_ERR_DIVERGENCE: return "divergence";
  }
  return "unknown";
}

magix_status magix_simulate(const char* spec_json, uint64_t seed, magix_dataset** out) {
  if (!spec_json || !out) return usage_error("magix_simulate: null argument");
  return guarded([&] {
    auto handle = std::make_unique<magix_dataset>();
    handle->spec = magix::io::spec_from_json(json::parse(spec_json));
    handle->ds = magix::bench::generate_dataset(handle->spec, seed);
    *out = handle.release();
  });
}

magix_status magix_dataset_load(const char* dir, magix_dataset** out) {
  if (!dir || !out) return usage_error("magix_dataset_load: null argument");
  return guarded([&] {
    auto handle = std::make_unique<magix_dataset>();
    magix::io::LoadedDataset loaded = magix::io::load_dataset(dir);
    if (!loaded.meta.empty() && loaded.meta.contains("system"))
      handle->spec = magix::io::spec_from_json(loaded.meta);
    handle->ds.system = handle->spec.system;
    handle->ds.obs = std::move(loaded.obs);
    handle->ds.fitting_grid = loaded.fitting_grid;
    if (loaded.has_truth) handle->ds.truth = std::move(loaded.truth);
    if (loaded.meta.contains("seed")) handle->ds.seed = loaded.meta["seed"].get<uint64_t>();
    *out = handle.release();
  });
}

magix_status magix_dataset_save(const magix_dataset* ds, const char* dir) {
  if (!ds || !dir) return usage_error("magix_dataset_save: null argument");
  return guarded([&] { magix::io::save_dataset(ds->ds, ds->spec, dir); });
}

void magix_dataset_free(magix_dataset* ds) { delete ds; }

int magix_dataset_dim(const magix_dataset* ds) { return ds ? ds->ds.obs.dim() : 0; }

int magix_dataset_truth_points(const magix_dataset* ds) {
  return ds ? static_cast<int>(ds->ds.truth.grid.size()) : 0;
}

int magix_dataset_obs_count(const magix_dataset* ds, int component) {
  if (!ds || component < 0 || component >= ds->ds.obs.dim()) return -1;
  return static_cast<int>(ds->ds.obs.comps[component].times.size());
}

magix_status magix_fit(const magix_dataset* ds, const char* config_json, magix_model** out) {
  if (!ds || !out) return usage_error("magix_fit: null argument");
  return guarded([&] {
    magix::MagixConfig cfg =
        config_json ? magix::io::config_from_json(json::parse(config_json)) : magix::MagixConfig{};
    auto handle = std::make_unique<magix_model>();
    handle->fit = magix::fit(ds->ds.obs, ds->ds.fitting_grid, cfg);
    *out = handle.release();
  });
}

magix_status magix_model_load(const char* path, magix_model** out) {
  if (!path || !out) return usage_error("magix_model_load: null argument");
  return guarded([&] {
    auto handle = std::make_unique<magix_model>();
    handle->fit = magix::io::load_checkpoint(path);
    *out = handle.release();
  });
}

magix_status magix_model_save(const magix_model* m, const char* path) {
  if (!m || !path) return usage_error("magix_model_save: null argument");
  return guarded([&] { magix::io::save_checkpoint(m->fit, path); });
}

magix_status magix_model_resume(magix_model* m, int extra_iterations) {
  if (!m) return usage_error("magix_model_resume: null model");
  return guarded([&] { magix::fit_continue(m->fit, extra_iterations); });
}

void magix_model_free(magix_model* m) { delete m; }

int magix_model_iterations(const magix_model* m) { return m ? m->fit.state.iteration : -1; }

int magix_model_trace_length(const magix_model* m) {
  return m ? static_cast<int>(m->fit.trace.size()) : -1;
}

double magix_model_objective(const magix_model* m) {
  return (m && !m->fit.trace.empty()) ? m->fit.trace.back() : std::nan("");
}

magix_status magix_model_save_trace(const magix_model* m, const char* csv_path) {
  if (!m || !csv_path) return usage_error("magix_model_save_trace: null argument");
  return guarded([&] { magix::io::save_trace(m->fit.trace, csv_path); });
}

magix_status magix_forecast(const magix_model* m, int horizon_points, const char* out_dir) {
  if (!m || !out_dir) return usage_error("magix_forecast: null argument");
  if (horizon_points < 0) return usage_error("magix_forecast: negative horizon");
  return guarded([&] {
    const magix::MagixProblem& prob = m->fit.problem;
    const int n = prob.grid_size();
    // extend the raw grid at the fitting spacing
    magix::TimeGrid full_raw;
    full_raw.times.resize(n + horizon_points);
    for (int i = 0; i < n; ++i) full_raw.times(i) = prob.std_map.to_raw(prob.grid.times(i));
    const double h_std = prob.grid.mean_spacing();
    for (int k = 1; k <= horizon_points; ++k)
      full_raw.times(n + k - 1) = prob.std_map.to_raw(prob.grid.back() + h_std * k);
    std::filesystem::create_directories(out_dir);
    const auto inf = magix::bench::inferred_trajectory(m->fit, full_raw);
    const auto rec = magix::bench::reconstructed_trajectory(m->fit, full_raw);
    magix::io::save_trajectory(inf, std::string(out_dir) + "/inferred.csv");
    magix::io::save_trajectory(rec, std::string(out_dir) + "/reconstructed.csv");
  });
}

magix_status magix_evaluate(const char* spec_json, int threads, magix_report** out) {
  if (!spec_json || !out) return usage_error("magix_evaluate: null argument");
  return guarded([&] {
    const auto spec = magix::io::spec_from_json(json::parse(spec_json));
    auto handle = std::make_unique<magix_report>();
    handle->report = magix::bench::run_experiment(spec, threads < 1 ? 1 : threads);
    *out = handle.release();
  });
}

magix_status magix_report_save(const magix_report* r, const char* json_path, const char* csv_path,
                               const char* timings_csv_path) {
  if (!r || !json_path || !csv_path || !timings_csv_path)
    return usage_error("magix_report_save: null argument");
  return guarded([&] { magix::io::save_report(r->report, json_path, csv_path, timings_csv_path); });
}

int magix_report_divergence_count(const magix_report* r) { return r ? r->report.divergence_count : -1; }

double magix_report_mean_rmse(const magix_report* r, const char* phase, const char* type, int component) {
  if (!r || !phase || !type) return std::nan("");
  const bool fitting = std::strcmp(phase, "fitting") == 0;
  const bool inferred = std::strcmp(type, "inferred") == 0;
  const magix::bench::Summary& s = fitting ? (inferred ? r->report.fit_inferred : r->report.fit_reconstructed)
                                           : (inferred ? r->report.fc_inferred : r->report.fc_reconstructed);
  if (component < 0 || component >= s.mean.size()) return std::nan("");
  return s.mean(component);
}

void magix_report_free(magix_report* r) { delete r; }

}  // extern "C"
