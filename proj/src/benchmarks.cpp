#include "magix/benchmarks.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "magix/rng.hpp"

namespace magix::bench {

void ExperimentSpec::validate() const {
  if (!(noise >= 0.0)) throw std::invalid_argument("ExperimentSpec: negative noise");
  if (replicates < 1) throw std::invalid_argument("ExperimentSpec: need at least one replicate");
  if (fitting_points < 2 || truth_points < fitting_points)
    throw std::invalid_argument("ExperimentSpec: bad grid sizes");
  if (pattern != "full" && pattern != "partial")
    throw std::invalid_argument("ExperimentSpec: pattern must be full or partial");
  config.validate();
  make_system(system);  // validates the name
}

std::vector<int> observation_indices(const std::string& system, const std::string& pattern, int component,
                                     int fitting_points) {
  std::vector<int> idx;  // 0-based
  auto keep = [&](int one_based) {
    if (one_based >= 1 && one_based <= fitting_points) idx.push_back(one_based - 1);
  };
  if (pattern == "full") {
    for (int i = 1; i <= fitting_points; i += 4) keep(i);
    return idx;
  }
  const bool hes1 = (system == "hes1");
  if (!hes1) {
    // two-component stagger: component 0 on t1, t5, ...; component 1 on t3, t7, ...
    const int start = (component == 0) ? 1 : 3;
    for (int i = start; i <= fitting_points; i += 4) keep(i);
    return idx;
  }
  // hes1 partial: two of the three components observed at each retained time
  // (offsets mod 12 per component), about 28 observations each.
  static const int offsets[3][2] = {{5, 9}, {1, 9}, {1, 5}};
  for (int k = 0; 12 * k + 1 <= fitting_points; ++k) {
    keep(12 * k + offsets[component][0]);
    keep(12 * k + offsets[component][1]);
  }
  std::sort(idx.begin(), idx.end());
  return idx;
}

Dataset generate_dataset(const ExperimentSpec& spec, uint64_t seed) {
  spec.validate();
  const OdeSystem sys = make_system(spec.system);
  Dataset ds;
  ds.system = spec.system;
  ds.seed = seed;

  Rng rng(seed);
  const Vec x0 = initial_state(sys, rng.next_u64());
  const TimeGrid full = TimeGrid::linspace(0.0, benchmark_time_span(sys), spec.truth_points);
  ds.truth = integrate(sys.f, x0, full, spec.truth_substeps);
  ds.fitting_grid = full.head(spec.fitting_points);

  ds.obs.comps.resize(sys.dim);
  for (int d = 0; d < sys.dim; ++d) {
    const std::vector<int> idx = observation_indices(spec.system, spec.pattern, d, spec.fitting_points);
    auto& comp = ds.obs.comps[d];
    comp.times.resize(idx.size());
    comp.values.resize(idx.size());
    for (size_t i = 0; i < idx.size(); ++i) {
      comp.times(static_cast<int>(i)) = full.times(idx[i]);
      comp.values(static_cast<int>(i)) = ds.truth.values(idx[i], d) + spec.noise * rng.normal();
    }
  }
  return ds;
}

namespace {

// Learned dynamics as a derivative field in standardized time.
DerivFn learned_field(const MlpDynamics& mlp) {
  return [&mlp](const Vec& x, double, Vec& dx) { dx = mlp_forward(mlp, x); };
}

TrajectoryWithFlag assemble(const FitResult& fit, const TimeGrid& full_grid_raw, int substeps,
                            bool from_initial_state) {
  full_grid_raw.validate();
  const Standardization& sm = fit.problem.std_map;
  const TimeGrid full_std = sm.to_std(full_grid_raw);
  const int n_fit = fit.problem.grid_size();
  const int n_full = full_std.size();
  if (n_full < n_fit) throw std::invalid_argument("trajectory: horizon grid shorter than the fitting grid");

  TrajectoryWithFlag out;
  out.traj.grid = full_grid_raw;
  out.traj.values.resize(n_full, fit.x.cols());
  out.traj.values.setConstant(std::numeric_limits<double>::quiet_NaN());

  const DerivFn f = learned_field(fit.state.mlp);
  if (from_initial_state) {
    out.diverged = !integrate_partial(f, fit.x.row(0).transpose(), full_std, substeps, out.traj.values);
  } else {
    out.traj.values.topRows(n_fit) = fit.x;
    if (n_full > n_fit) {
      TimeGrid horizon;
      horizon.times = full_std.times.tail(n_full - n_fit + 1);
      Mat fc;
      out.diverged = !integrate_partial(f, fit.x.row(n_fit - 1).transpose(), horizon, substeps, fc);
      out.traj.values.bottomRows(n_full - n_fit) = fc.bottomRows(n_full - n_fit);
    }
  }
  return out;
}

}  // namespace

TrajectoryWithFlag inferred_trajectory(const FitResult& fit, const TimeGrid& full_grid_raw, int substeps) {
  return assemble(fit, full_grid_raw, substeps, /*from_initial_state=*/false);
}

TrajectoryWithFlag reconstructed_trajectory(const FitResult& fit, const TimeGrid& full_grid_raw, int substeps) {
  return assemble(fit, full_grid_raw, substeps, /*from_initial_state=*/true);
}

Vec rmse(const Trajectory& traj, const Trajectory& truth, int begin, int end) {
  if (traj.grid.size() != truth.grid.size() ||
      !traj.grid.times.isApprox(truth.grid.times, 1e-9))
    throw std::invalid_argument("rmse: trajectories live on different grids");
  if (begin < 0 || end > traj.grid.size() || begin >= end)
    throw std::invalid_argument("rmse: bad phase range");
  const int D = traj.dim();
  Vec out(D);
  for (int d = 0; d < D; ++d) {
    double ss = 0.0;
    bool finite = true;
    for (int i = begin; i < end; ++i) {
      const double e = traj.values(i, d) - truth.values(i, d);
      if (!std::isfinite(e)) {
        finite = false;
        break;
      }
      ss += e * e;
    }
    out(d) = finite ? std::sqrt(ss / (end - begin)) : std::numeric_limits<double>::infinity();
  }
  return out;
}

bool is_divergent(const std::vector<double>& forecast_rmses) {
  for (double r : forecast_rmses)
    if (!(r <= kDivergenceRmse)) return true;  // strict: exactly 5 is not divergent
  return false;
}

ReplicateResult run_replicate(const ExperimentSpec& spec, int replicate_index) {
  const uint64_t seed = spec.base_seed + static_cast<uint64_t>(replicate_index);
  const Dataset ds = generate_dataset(spec, seed);

  MagixConfig cfg = spec.config;
  cfg.seeds.clear();
  for (size_t k = 0; k < spec.config.seeds.size(); ++k) cfg.seeds.push_back(seed + 1000003 * (k + 1));

  ReplicateResult res;
  res.replicate = replicate_index;
  res.seed = seed;

  const FitResult fit_res = fit(ds.obs, ds.fitting_grid, cfg);
  res.fit_seconds = fit_res.seconds;
  res.objective = fit_res.trace.back();

  const TrajectoryWithFlag inf = inferred_trajectory(fit_res, ds.truth.grid, spec.truth_substeps);
  const TrajectoryWithFlag rec = reconstructed_trajectory(fit_res, ds.truth.grid, spec.truth_substeps);
  const int nf = spec.fitting_points, nt = spec.truth_points;
  res.fit_inferred = rmse(inf.traj, ds.truth, 0, nf);
  res.fc_inferred = rmse(inf.traj, ds.truth, nf, nt);
  res.fit_reconstructed = rmse(rec.traj, ds.truth, 0, nf);
  res.fc_reconstructed = rmse(rec.traj, ds.truth, nf, nt);

  std::vector<double> fc;
  for (int d = 0; d < res.fc_inferred.size(); ++d) {
    fc.push_back(res.fc_inferred(d));
    fc.push_back(res.fc_reconstructed(d));
  }
  res.diverged = is_divergent(fc);
  return res;
}

namespace {

Summary summarize(const std::vector<const Vec*>& rows) {
  Summary s;
  if (rows.empty()) return s;
  const int D = static_cast<int>(rows.front()->size());
  s.mean = Vec::Zero(D);
  for (const Vec* v : rows) s.mean += *v;
  s.mean /= static_cast<double>(rows.size());
  s.sd = Vec::Zero(D);
  if (rows.size() > 1) {
    for (const Vec* v : rows) s.sd += (*v - s.mean).array().square().matrix();
    s.sd = (s.sd / static_cast<double>(rows.size() - 1)).array().sqrt();
  }
  return s;
}

}  // namespace

EvalReport aggregate(const ExperimentSpec& spec, std::vector<ReplicateResult> replicates) {
  std::sort(replicates.begin(), replicates.end(),
            [](const ReplicateResult& a, const ReplicateResult& b) { return a.replicate < b.replicate; });
  EvalReport rep;
  rep.spec = spec;
  rep.replicates = std::move(replicates);

  std::vector<const Vec*> fi, fr, ci, cr;
  double sec_sum = 0.0, sec_sq = 0.0;
  int kept = 0;
  for (const auto& r : rep.replicates) {
    sec_sum += r.fit_seconds;
    sec_sq += r.fit_seconds * r.fit_seconds;
    if (r.diverged) {
      ++rep.divergence_count;
      continue;
    }
    ++kept;
    fi.push_back(&r.fit_inferred);
    fr.push_back(&r.fit_reconstructed);
    ci.push_back(&r.fc_inferred);
    cr.push_back(&r.fc_reconstructed);
  }
  rep.fit_inferred = summarize(fi);
  rep.fit_reconstructed = summarize(fr);
  rep.fc_inferred = summarize(ci);
  rep.fc_reconstructed = summarize(cr);

  const int n = static_cast<int>(rep.replicates.size());
  rep.seconds_mean = sec_sum / n;
  rep.seconds_sd = (n > 1) ? std::sqrt(std::max(0.0, (sec_sq - sec_sum * sec_sum / n) / (n - 1))) : 0.0;
  return rep;
}

EvalReport run_experiment(const ExperimentSpec& spec, int threads) {
  spec.validate();
  std::vector<ReplicateResult> results(spec.replicates);
  if (threads <= 1) {
    for (int i = 0; i < spec.replicates; ++i) results[i] = run_replicate(spec, i);
  } else {
    std::atomic<int> next{0};
    auto worker = [&]() {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= spec.replicates) return;
        results[i] = run_replicate(spec, i);
      }
    };
    std::vector<std::thread> pool;
    const int nthreads = std::min(threads, spec.replicates);
    pool.reserve(nthreads);
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return aggregate(spec, std::move(results));
}

}  // namespace magix::bench
