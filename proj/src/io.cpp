#include "magix/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace magix::io {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

json vec_to_json(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Vec vec_from_json(const json& a) {
  Vec v(a.size());
  for (size_t i = 0; i < a.size(); ++i) v(static_cast<int>(i)) = a[i].get<double>();
  return v;
}

json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (int j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

Mat mat_from_json(const json& rows) {
  const int n = static_cast<int>(rows.size());
  const int c = n > 0 ? static_cast<int>(rows[0].size()) : 0;
  Mat m(n, c);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rows[i][j].get<double>();
  return m;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

json config_to_json(const MagixConfig& cfg) {
  json j;
  j["refinement"] = cfg.refinement;
  j["iterations"] = cfg.iterations;
  j["lr_theta"] = {{"a", cfg.lr_theta.a}, {"b", cfg.lr_theta.b}, {"gamma", cfg.lr_theta.gamma}};
  j["lr_x"] = {{"a", cfg.lr_x.a}, {"b", cfg.lr_x.b}, {"gamma", cfg.lr_x.gamma}};
  j["tempering"] = (cfg.tempering == Tempering::ratio) ? "ratio" : "none";
  j["order"] = (cfg.order == UpdateOrder::theta_first) ? "theta_first" : "x_first";
  j["hidden"] = cfg.hidden;
  j["spacing"] = cfg.spacing;
  j["pretrain_iterations"] = cfg.pretrain_iterations;
  j["seeds"] = cfg.seeds;
  j["eb_budget"] = cfg.eb_budget;
  j["matern_nu"] = cfg.matern_nu;
  return j;
}

MagixConfig config_from_json(const json& j) {
  MagixConfig cfg;
  if (j.contains("refinement")) cfg.refinement = j["refinement"].get<int>();
  if (j.contains("iterations")) cfg.iterations = j["iterations"].get<int>();
  auto lr = [](const json& v, LearningRate& out) {
    if (v.contains("a")) out.a = v["a"].get<double>();
    if (v.contains("b")) out.b = v["b"].get<double>();
    if (v.contains("gamma")) out.gamma = v["gamma"].get<double>();
  };
  if (j.contains("lr_theta")) lr(j["lr_theta"], cfg.lr_theta);
  if (j.contains("lr_x")) lr(j["lr_x"], cfg.lr_x);
  if (j.contains("tempering")) {
    const std::string t = j["tempering"].get<std::string>();
    if (t == "ratio") cfg.tempering = Tempering::ratio;
    else if (t == "none") cfg.tempering = Tempering::none;
    else throw std::invalid_argument("config: unknown tempering mode " + t);
  }
  if (j.contains("order")) {
    const std::string o = j["order"].get<std::string>();
    if (o == "theta_first") cfg.order = UpdateOrder::theta_first;
    else if (o == "x_first") cfg.order = UpdateOrder::x_first;
    else throw std::invalid_argument("config: unknown update order " + o);
  }
  if (j.contains("hidden")) cfg.hidden = j["hidden"].get<std::vector<int>>();
  if (j.contains("spacing")) cfg.spacing = j["spacing"].get<double>();
  if (j.contains("pretrain_iterations")) cfg.pretrain_iterations = j["pretrain_iterations"].get<int>();
  if (j.contains("seeds")) cfg.seeds = j["seeds"].get<std::vector<uint64_t>>();
  if (j.contains("eb_budget")) cfg.eb_budget = j["eb_budget"].get<int>();
  if (j.contains("matern_nu")) cfg.matern_nu = j["matern_nu"].get<double>();
  cfg.validate();
  return cfg;
}

json spec_to_json(const bench::ExperimentSpec& spec) {
  json j;
  j["system"] = spec.system;
  j["pattern"] = spec.pattern;
  j["noise"] = spec.noise;
  j["replicates"] = spec.replicates;
  j["base_seed"] = spec.base_seed;
  j["truth_points"] = spec.truth_points;
  j["fitting_points"] = spec.fitting_points;
  j["truth_substeps"] = spec.truth_substeps;
  j["config"] = config_to_json(spec.config);
  return j;
}

bench::ExperimentSpec spec_from_json(const json& j) {
  bench::ExperimentSpec spec;
  if (j.contains("system")) spec.system = j["system"].get<std::string>();
  if (j.contains("pattern")) spec.pattern = j["pattern"].get<std::string>();
  if (j.contains("noise")) spec.noise = j["noise"].get<double>();
  if (j.contains("replicates")) spec.replicates = j["replicates"].get<int>();
  if (j.contains("base_seed")) spec.base_seed = j["base_seed"].get<uint64_t>();
  if (j.contains("truth_points")) spec.truth_points = j["truth_points"].get<int>();
  if (j.contains("fitting_points")) spec.fitting_points = j["fitting_points"].get<int>();
  if (j.contains("truth_substeps")) spec.truth_substeps = j["truth_substeps"].get<int>();
  if (j.contains("config")) spec.config = config_from_json(j["config"]);
  spec.validate();
  return spec;
}

void save_dataset(const bench::Dataset& ds, const bench::ExperimentSpec& spec, const std::string& dir) {
  fs::create_directories(dir);
  {
    std::ostringstream out;
    out << "time";
    for (int d = 0; d < ds.truth.dim(); ++d) out << ",x" << (d + 1);
    out << "\n";
    for (int i = 0; i < ds.truth.grid.size(); ++i) {
      out << format_double(ds.truth.grid.times(i));
      for (int d = 0; d < ds.truth.dim(); ++d) out << "," << format_double(ds.truth.values(i, d));
      out << "\n";
    }
    write_file(dir + "/truth.csv", out.str());
  }
  {
    std::ostringstream out;
    out << "component,time,value\n";
    for (int d = 0; d < ds.obs.dim(); ++d) {
      const auto& c = ds.obs.comps[d];
      for (int i = 0; i < c.times.size(); ++i)
        out << (d + 1) << "," << format_double(c.times(i)) << "," << format_double(c.values(i)) << "\n";
    }
    write_file(dir + "/obs.csv", out.str());
  }
  {
    json meta = spec_to_json(spec);
    meta["seed"] = ds.seed;
    write_file(dir + "/meta.json", meta.dump(2) + "\n");
  }
}

namespace {

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

LoadedDataset load_dataset(const std::string& dir, int refinement_fallback) {
  LoadedDataset out;
  out.meta = json::object();

  const auto obs_rows = read_csv(dir + "/obs.csv");
  if (obs_rows.size() < 2) throw std::runtime_error("obs.csv: no data rows");
  std::vector<std::vector<double>> times, values;
  for (size_t i = 1; i < obs_rows.size(); ++i) {
    const auto& r = obs_rows[i];
    if (r.size() != 3) throw std::runtime_error("obs.csv: expected component,time,value");
    const int comp = std::stoi(r[0]) - 1;
    if (comp < 0) throw std::runtime_error("obs.csv: components are 1-based");
    if (static_cast<size_t>(comp) >= times.size()) {
      times.resize(comp + 1);
      values.resize(comp + 1);
    }
    times[comp].push_back(std::stod(r[1]));
    values[comp].push_back(std::stod(r[2]));
  }
  out.obs.comps.resize(times.size());
  for (size_t d = 0; d < times.size(); ++d) {
    out.obs.comps[d].times = Eigen::Map<const Vec>(times[d].data(), times[d].size());
    out.obs.comps[d].values = Eigen::Map<const Vec>(values[d].data(), values[d].size());
  }
  out.obs.validate();

  if (fs::exists(dir + "/truth.csv")) {
    const auto rows = read_csv(dir + "/truth.csv");
    const int n = static_cast<int>(rows.size()) - 1;
    const int d = static_cast<int>(rows[0].size()) - 1;
    out.truth.grid.times.resize(n);
    out.truth.values.resize(n, d);
    for (int i = 0; i < n; ++i) {
      out.truth.grid.times(i) = std::stod(rows[i + 1][0]);
      for (int k = 0; k < d; ++k) out.truth.values(i, k) = std::stod(rows[i + 1][k + 1]);
    }
    out.truth.validate();
    out.has_truth = true;
  }

  if (fs::exists(dir + "/meta.json")) {
    out.meta = json::parse(read_file(dir + "/meta.json"));
  }
  if (out.meta.contains("fitting_points") && out.has_truth) {
    out.fitting_grid = out.truth.grid.head(out.meta["fitting_points"].get<int>());
  } else {
    out.fitting_grid = refine_observation_grid(out.obs, refinement_fallback);
  }
  return out;
}

json checkpoint_to_json(const FitResult& fit) {
  json j;
  j["format"] = "magix-checkpoint";
  j["version"] = 1;
  j["config"] = config_to_json(fit.config);
  j["standardization"] = {{"shift", fit.problem.std_map.shift}, {"scale", fit.problem.std_map.scale}};
  // standardized times are authoritative so a reload rebuilds bit-identical
  // covariance factors; raw times are recoverable through the inverse map
  j["grid_std"] = vec_to_json(fit.problem.grid.times);
  json obs = json::array();
  for (const auto& c : fit.problem.obs.comps)
    obs.push_back({{"times_std", vec_to_json(c.times)}, {"values", vec_to_json(c.values)}});
  j["observations"] = std::move(obs);
  json hyper = json::array();
  for (const auto& m : fit.problem.models) {
    hyper.push_back({{"nu", m.hyper.matern.nu},
                     {"omega2", m.hyper.matern.omega2},
                     {"rho", m.hyper.matern.rho},
                     {"mean_c", m.hyper.mean_c},
                     {"sigma2", m.hyper.sigma2}});
  }
  j["hyper"] = std::move(hyper);
  j["noise_floor"] = vec_to_json(fit.problem.noise_floor);
  j["u"] = mat_to_json(fit.state.u);
  j["theta"] = {{"widths", fit.state.mlp.widths}, {"params", fit.state.mlp.params}};
  j["sigma2"] = vec_to_json(fit.state.sigma2);
  auto opt = [](const AdamState& s) {
    return json{{"m1", vec_to_json(s.m1)}, {"m2", vec_to_json(s.m2)}, {"t", s.t}};
  };
  j["opt_u"] = opt(fit.state.opt_u);
  j["opt_theta"] = opt(fit.state.opt_theta);
  j["iteration"] = fit.state.iteration;
  j["trace"] = fit.trace;
  j["x"] = mat_to_json(fit.x);
  j["seed_used"] = fit.seed_used;
  // wall-clock timing stays out: checkpoints are byte-stable per seed
  return j;
}

FitResult checkpoint_from_json(const json& j) {
  if (!j.contains("format") || j["format"] != "magix-checkpoint")
    throw std::runtime_error("checkpoint: unrecognized format");
  if (j["version"].get<int>() != 1) throw std::runtime_error("checkpoint: unsupported version");

  FitResult fit;
  fit.config = config_from_json(j["config"]);

  MagixProblem& prob = fit.problem;
  prob.std_map.shift = j["standardization"]["shift"].get<double>();
  prob.std_map.scale = j["standardization"]["scale"].get<double>();
  prob.grid.times = vec_from_json(j["grid_std"]);
  prob.grid.validate();

  for (const auto& c : j["observations"]) {
    ObservationSet::Component comp;
    comp.times = vec_from_json(c["times_std"]);
    comp.values = vec_from_json(c["values"]);
    prob.obs.comps.push_back(std::move(comp));
  }
  prob.obs_idx = prob.obs.indices_on(prob.grid);
  prob.noise_floor = vec_from_json(j["noise_floor"]);

  const int D = prob.obs.dim();
  prob.tempering_factor.resize(D);
  for (int d = 0; d < D; ++d) {
    prob.tempering_factor(d) = (fit.config.tempering == Tempering::ratio)
                                   ? static_cast<double>(prob.grid.size()) / prob.obs.comps[d].times.size()
                                   : 1.0;
  }
  for (const auto& h : j["hyper"]) {
    GpHyper hy;
    hy.matern.nu = h["nu"].get<double>();
    hy.matern.omega2 = h["omega2"].get<double>();
    hy.matern.rho = h["rho"].get<double>();
    hy.mean_c = h["mean_c"].get<double>();
    hy.sigma2 = h["sigma2"].get<double>();
    prob.models.push_back(build_component_model(hy, prob.grid));
  }

  fit.state.u = mat_from_json(j["u"]);
  fit.state.mlp.widths = j["theta"]["widths"].get<std::vector<int>>();
  fit.state.mlp.params = j["theta"]["params"].get<std::vector<double>>();
  fit.state.sigma2 = vec_from_json(j["sigma2"]);
  auto opt = [](const json& v, AdamState& s) {
    s.m1 = vec_from_json(v["m1"]);
    s.m2 = vec_from_json(v["m2"]);
    s.t = v["t"].get<int>();
  };
  opt(j["opt_u"], fit.state.opt_u);
  opt(j["opt_theta"], fit.state.opt_theta);
  fit.state.iteration = j["iteration"].get<int>();
  fit.trace = j["trace"].get<std::vector<double>>();
  fit.x = mat_from_json(j["x"]);
  fit.seed_used = j["seed_used"].get<uint64_t>();
  return fit;
}

void save_checkpoint(const FitResult& fit, const std::string& path) {
  write_file(path, checkpoint_to_json(fit).dump(2) + "\n");
}

FitResult load_checkpoint(const std::string& path) {
  return checkpoint_from_json(json::parse(read_file(path)));
}

void save_trajectory(const bench::TrajectoryWithFlag& t, const std::string& path) {
  std::ostringstream out;
  out << "time";
  for (int d = 0; d < t.traj.dim(); ++d) out << ",x" << (d + 1);
  out << ",divergent\n";
  for (int i = 0; i < t.traj.grid.size(); ++i) {
    out << format_double(t.traj.grid.times(i));
    bool bad = false;
    for (int d = 0; d < t.traj.dim(); ++d) {
      out << "," << format_double(t.traj.values(i, d));
      bad = bad || !std::isfinite(t.traj.values(i, d));
    }
    out << "," << (bad ? 1 : 0) << "\n";
  }
  write_file(path, out.str());
}

void save_trace(const std::vector<double>& trace, const std::string& path) {
  std::ostringstream out;
  out << "iteration,objective\n";
  for (size_t i = 0; i < trace.size(); ++i) out << i << "," << format_double(trace[i]) << "\n";
  write_file(path, out.str());
}

void save_report(const bench::EvalReport& rep, const std::string& json_path, const std::string& csv_path,
                 const std::string& timings_path) {
  json j;
  j["spec"] = spec_to_json(rep.spec);
  j["divergence_count"] = rep.divergence_count;
  j["replicates_total"] = static_cast<int>(rep.replicates.size());
  auto cell = [](const bench::Summary& s) {
    return json{{"mean", s.mean.size() ? vec_to_json(s.mean) : json::array()},
                {"sd", s.sd.size() ? vec_to_json(s.sd) : json::array()}};
  };
  j["rmse"] = {{"fitting", {{"inferred", cell(rep.fit_inferred)}, {"reconstructed", cell(rep.fit_reconstructed)}}},
               {"forecasting", {{"inferred", cell(rep.fc_inferred)}, {"reconstructed", cell(rep.fc_reconstructed)}}}};
  write_file(json_path, j.dump(2) + "\n");

  std::ostringstream out;
  out << "replicate,seed,diverged,objective";
  const int D = rep.replicates.empty() ? 0 : static_cast<int>(rep.replicates.front().fit_inferred.size());
  for (const char* phase : {"fitting", "forecasting"})
    for (const char* type : {"inferred", "reconstructed"})
      for (int d = 1; d <= D; ++d) out << "," << phase << "_" << type << "_x" << d;
  out << "\n";
  for (const auto& r : rep.replicates) {
    out << r.replicate << "," << r.seed << "," << (r.diverged ? 1 : 0) << "," << format_double(r.objective);
    for (const Vec* v : {&r.fit_inferred, &r.fit_reconstructed, &r.fc_inferred, &r.fc_reconstructed})
      for (int d = 0; d < D; ++d) out << "," << format_double((*v)(d));
    out << "\n";
  }
  write_file(csv_path, out.str());

  // wall-clock measurements live apart: every other output is byte-stable
  // for a fixed seed, timing measures the host
  std::ostringstream tout;
  tout << "replicate,seed,fit_seconds\n";
  for (const auto& r : rep.replicates)
    tout << r.replicate << "," << r.seed << "," << format_double(r.fit_seconds) << "\n";
  tout << "mean,," << format_double(rep.seconds_mean) << "\n";
  tout << "sd,," << format_double(rep.seconds_sd) << "\n";
  write_file(timings_path, tout.str());
}

}  // namespace magix::io
