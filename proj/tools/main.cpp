// Command-line front end. Talks to the library exclusively through the C
// API in magix/capi.h; flags are assembled into the JSON configs the API
// expects. Exit codes: 0 success, 1 usage, 2 numeric failure, 3 divergence.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "magix/capi.h"

using json = nlohmann::json;

namespace {

int exit_code(magix_status s) { return static_cast<int>(s); }

int fail(magix_status s, const std::string& where) {
  std::fprintf(stderr, "error (%s): %s: %s\n", magix_status_name(s), where.c_str(), magix_last_error());
  return exit_code(s);
}

struct CommonFlags {
  std::string system = "fn";
  std::string pattern = "full";
  double noise = 0.1;
  int iters = -1;
  std::vector<int> hidden;
  std::vector<uint64_t> seeds;
  int replicates = -1;
  bool paper_scale = false;
  int threads = 1;
  std::string config_path;
};

// Spec JSON: config file (when given) first, then flag overrides.
json build_spec(const CommonFlags& f) {
  json spec = json::object();
  if (!f.config_path.empty()) {
    std::FILE* fp = std::fopen(f.config_path.c_str(), "rb");
    if (!fp) throw CLI::ValidationError("--config", "cannot open " + f.config_path);
    std::string text;
    char buf[4096];
    size_t n;
    while ((n = std::fread(buf, 1, sizeof(buf), fp)) > 0) text.append(buf, n);
    std::fclose(fp);
    spec = json::parse(text);
  }
  spec["system"] = f.system;
  spec["pattern"] = f.pattern;
  spec["noise"] = f.noise;
  if (!spec.contains("config")) spec["config"] = json::object();
  if (f.iters >= 0) spec["config"]["iterations"] = f.iters;
  if (!f.hidden.empty()) spec["config"]["hidden"] = f.hidden;
  if (!f.seeds.empty()) {
    spec["base_seed"] = f.seeds.front();
    spec["config"]["seeds"] = f.seeds;
  }
  if (f.replicates > 0) spec["replicates"] = f.replicates;
  if (f.paper_scale) spec["replicates"] = 100;
  return spec;
}

void add_common(CLI::App* cmd, CommonFlags& f, bool with_experiment_flags) {
  cmd->add_option("--system", f.system, "System: fn, lv, hes1, hamiltonian:D");
  cmd->add_option("--noise", f.noise, "Observation noise standard deviation");
  cmd->add_option("--iters", f.iters, "Optimization iterations");
  cmd->add_option("--hidden", f.hidden, "Hidden layer widths");
  cmd->add_option("--seed,--seeds", f.seeds, "Seed(s); several seeds enable restarts");
  cmd->add_option("--config", f.config_path, "JSON config file; flags override its fields");
  if (with_experiment_flags) {
    cmd->add_option("--pattern", f.pattern, "Observation pattern: full or partial");
    cmd->add_option("--replicates", f.replicates, "Replicate count");
    cmd->add_flag("--paper-scale", f.paper_scale, "Run 100 replicates");
    cmd->add_option("--threads", f.threads, "Replicate-level worker threads");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learns unknown ODE dynamics from sparse noisy observations"};
  app.require_subcommand(1);

  CommonFlags sim_f, fit_f, eval_f;
  std::string out_dir = "out";
  std::string data_dir, checkpoint_path, resume_path;
  int horizon = 160;
  uint64_t sim_seed = 1;

  auto* sim = app.add_subcommand("simulate", "Generate a groundtruth trajectory and noisy observations");
  add_common(sim, sim_f, true);
  sim->add_option("--out", out_dir, "Output directory");
  sim->add_option("--dataset-seed", sim_seed, "Seed for the trajectory/noise draw");

  auto* fitc = app.add_subcommand("fit", "Fit the dynamics model to a dataset directory");
  add_common(fitc, fit_f, false);
  fitc->add_option("--data", data_dir, "Dataset directory (from simulate)")->required();
  fitc->add_option("--out", out_dir, "Output directory for checkpoint.json and trace.csv");
  fitc->add_option("--resume", resume_path, "Continue from an existing checkpoint");

  auto* fc = app.add_subcommand("forecast", "Integrate fitted dynamics beyond the fitting window");
  fc->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
  fc->add_option("--horizon", horizon, "Forecast points past the fitting grid");
  fc->add_option("--out", out_dir, "Output directory");

  auto* ev = app.add_subcommand("evaluate", "Replicate loop with RMSE report");
  add_common(ev, eval_f, true);
  ev->add_option("--out", out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  if (sim->parsed()) {
    json spec;
    try {
      spec = build_spec(sim_f);
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return 1;
    }
    magix_dataset* ds = nullptr;
    magix_status st = magix_simulate(spec.dump().c_str(), sim_seed, &ds);
    if (st != MAGIX_OK) return fail(st, "simulate");
    st = magix_dataset_save(ds, out_dir.c_str());
    if (st != MAGIX_OK) {
      magix_dataset_free(ds);
      return fail(st, "save dataset");
    }
    std::printf("wrote %s/truth.csv (%d rows), %s/obs.csv (%d components)\n", out_dir.c_str(),
                magix_dataset_truth_points(ds), out_dir.c_str(), magix_dataset_dim(ds));
    magix_dataset_free(ds);
    return 0;
  }

  if (fitc->parsed()) {
    magix_model* model = nullptr;
    if (!resume_path.empty()) {
      magix_status st = magix_model_load(resume_path.c_str(), &model);
      if (st != MAGIX_OK) return fail(st, "load checkpoint");
      const int extra = fit_f.iters >= 0 ? fit_f.iters : 2500;
      st = magix_model_resume(model, extra);
      if (st != MAGIX_OK) {
        magix_model_free(model);
        return fail(st, "resume fit");
      }
    } else {
      magix_dataset* ds = nullptr;
      magix_status st = magix_dataset_load(data_dir.c_str(), &ds);
      if (st != MAGIX_OK) return fail(st, "load dataset");
      json cfg = build_spec(fit_f)["config"];
      st = magix_fit(ds, cfg.dump().c_str(), &model);
      magix_dataset_free(ds);
      if (st != MAGIX_OK) return fail(st, "fit");
    }
    json outmeta;
    const std::string ckpt = out_dir + "/checkpoint.json";
    const std::string trace = out_dir + "/trace.csv";
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    magix_status st = magix_model_save(model, ckpt.c_str());
    if (st == MAGIX_OK) st = magix_model_save_trace(model, trace.c_str());
    if (st != MAGIX_OK) {
      magix_model_free(model);
      return fail(st, "save checkpoint");
    }
    std::printf("fit complete: %d iterations, objective %.6f\n", magix_model_iterations(model),
                magix_model_objective(model));
    std::printf("wrote %s and %s\n", ckpt.c_str(), trace.c_str());
    magix_model_free(model);
    return 0;
  }

  if (fc->parsed()) {
    magix_model* model = nullptr;
    magix_status st = magix_model_load(checkpoint_path.c_str(), &model);
    if (st != MAGIX_OK) return fail(st, "load checkpoint");
    st = magix_forecast(model, horizon, out_dir.c_str());
    magix_model_free(model);
    if (st != MAGIX_OK) return fail(st, "forecast");
    std::printf("wrote %s/inferred.csv and %s/reconstructed.csv\n", out_dir.c_str(), out_dir.c_str());
    return 0;
  }

  if (ev->parsed()) {
    json spec;
    try {
      spec = build_spec(eval_f);
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return 1;
    }
    magix_report* rep = nullptr;
    magix_status st = magix_evaluate(spec.dump().c_str(), eval_f.threads, &rep);
    if (st != MAGIX_OK) return fail(st, "evaluate");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    st = magix_report_save(rep, (out_dir + "/report.json").c_str(), (out_dir + "/replicates.csv").c_str(),
                           (out_dir + "/timings.csv").c_str());
    if (st != MAGIX_OK) {
      magix_report_free(rep);
      return fail(st, "save report");
    }
    std::printf("divergent replicates: %d\n", magix_report_divergence_count(rep));
    std::printf("mean inferred fitting RMSE x1: %.4f\n", magix_report_mean_rmse(rep, "fitting", "inferred", 0));
    std::printf("wrote %s/report.json and %s/replicates.csv\n", out_dir.c_str(), out_dir.c_str());
    magix_report_free(rep);
    return 0;
  }

  return 1;
}
