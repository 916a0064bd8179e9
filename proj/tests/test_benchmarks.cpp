#include <doctest.h>

#include <cmath>
#include <set>

#include "magix/benchmarks.hpp"
#include "magix/io.hpp"

using namespace magix;
using namespace magix::bench;

namespace {

ExperimentSpec quick_spec(const std::string& system, const std::string& pattern) {
  ExperimentSpec spec;
  spec.system = system;
  spec.pattern = pattern;
  return spec;
}

// minimal fabricated fit result: identity standardization, given trajectory,
// zero dynamics
FitResult fake_fit(const Mat& x, const TimeGrid& grid_std) {
  FitResult f;
  f.problem.grid = grid_std;
  f.problem.std_map = Standardization{};
  f.x = x;
  f.state.mlp.widths = {static_cast<int>(x.cols()), 4, static_cast<int>(x.cols())};
  f.state.mlp.params.assign(f.state.mlp.param_count(), 0.0);
  return f;
}

}  // namespace

TEST_CASE("full pattern: 41 observations per component") {
  const Dataset ds = generate_dataset(quick_spec("fn", "full"), 5);
  CHECK(ds.obs.dim() == 2);
  for (const auto& c : ds.obs.comps) CHECK(c.times.size() == 41);
  CHECK(ds.truth.grid.size() == 321);
  CHECK(ds.fitting_grid.size() == 161);
  // one-in-four from the fitting phase
  CHECK(ds.obs.comps[0].times(0) == ds.truth.grid.times(0));
  CHECK(ds.obs.comps[0].times(40) == ds.truth.grid.times(160));
}

TEST_CASE("partial patterns: staggered disjoint times for two-component systems") {
  for (const char* sys : {"fn", "lv"}) {
    const Dataset ds = generate_dataset(quick_spec(sys, "partial"), 6);
    CHECK(ds.obs.comps[0].times.size() == 41);  // t1, t5, ..., t161
    CHECK(ds.obs.comps[1].times.size() == 40);  // t3, t7, ..., t159
    std::set<double> t0(ds.obs.comps[0].times.data(),
                        ds.obs.comps[0].times.data() + ds.obs.comps[0].times.size());
    for (int i = 0; i < ds.obs.comps[1].times.size(); ++i) CHECK(t0.count(ds.obs.comps[1].times(i)) == 0);
  }
}

TEST_CASE("hes1 partial: about 28 observations, two of three components per time") {
  const auto i1 = observation_indices("hes1", "partial", 0, 161);
  const auto i2 = observation_indices("hes1", "partial", 1, 161);
  const auto i3 = observation_indices("hes1", "partial", 2, 161);
  CHECK(i1.size() == 27);
  CHECK(i2.size() == 27);
  CHECK(i3.size() == 28);
  // spot-check the published sequences (0-based indices)
  CHECK(i1[0] == 4);   // t5
  CHECK(i1[1] == 8);   // t9
  CHECK(i1[2] == 16);  // t17
  CHECK(i1.back() == 160);  // t161
  CHECK(i2[0] == 0);   // t1
  CHECK(i2[1] == 8);   // t9
  CHECK(i2.back() == 156);  // t157
  CHECK(i3[0] == 0);   // t1
  CHECK(i3[1] == 4);   // t5
  CHECK(i3.back() == 160);  // t161

  // every observed time carries exactly two of the three components
  std::set<int> all;
  all.insert(i1.begin(), i1.end());
  all.insert(i2.begin(), i2.end());
  all.insert(i3.begin(), i3.end());
  for (int t : all) {
    int count = 0;
    count += std::count(i1.begin(), i1.end(), t);
    count += std::count(i2.begin(), i2.end(), t);
    count += std::count(i3.begin(), i3.end(), t);
    CHECK(count == 2);
  }
}

TEST_CASE("zero noise: observations equal the groundtruth at tau") {
  ExperimentSpec spec = quick_spec("lv", "full");
  spec.noise = 0.0;
  const Dataset ds = generate_dataset(spec, 9);
  for (int d = 0; d < 2; ++d)
    for (int i = 0; i < 41; ++i) CHECK(ds.obs.comps[d].values(i) == ds.truth.values(4 * i, d));
}

TEST_CASE("dataset generation is deterministic per seed") {
  const Dataset a = generate_dataset(quick_spec("hamiltonian:10", "full"), 77);
  const Dataset b = generate_dataset(quick_spec("hamiltonian:10", "full"), 77);
  const Dataset c = generate_dataset(quick_spec("hamiltonian:10", "full"), 78);
  CHECK(a.truth.values == b.truth.values);
  CHECK(a.obs.comps[3].values == b.obs.comps[3].values);
  CHECK(a.truth.values != c.truth.values);
}

TEST_CASE("forecasting the true field from the true state matches the groundtruth tail") {
  ExperimentSpec spec = quick_spec("fn", "full");
  const Dataset ds = generate_dataset(spec, 3);
  const OdeSystem sys = make_system("fn");
  TimeGrid tail;
  tail.times = ds.truth.grid.times.tail(161);  // t161 .. t321
  const Trajectory fc = integrate(sys.f, ds.truth.values.row(160).transpose(), tail, spec.truth_substeps);
  CHECK((fc.values - ds.truth.values.bottomRows(161)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("rmse: exact cases and hand computation") {
  Trajectory truth;
  truth.grid = TimeGrid::linspace(0.0, 4.0, 5);
  truth.values.resize(5, 1);
  truth.values << 1.0, 2.0, 3.0, 4.0, 5.0;
  Trajectory same = truth;
  CHECK(rmse(same, truth, 0, 5)(0) == 0.0);

  Trajectory offset = truth;
  offset.values.array() += 0.25;
  CHECK(rmse(offset, truth, 0, 5)(0) == doctest::Approx(0.25).epsilon(1e-12));

  Trajectory random = truth;
  random.values << 1.5, 1.0, 3.5, 4.0, 4.0;
  // errors: .5, -1, .5, 0, -1 -> mean square = (0.25 + 1 + 0.25 + 0 + 1)/5
  CHECK(rmse(random, truth, 0, 5)(0) == doctest::Approx(std::sqrt(2.5 / 5.0)).epsilon(1e-12));

  Trajectory other;
  other.grid = TimeGrid::linspace(0.0, 4.0, 4);
  other.values = Mat::Zero(4, 1);
  CHECK_THROWS_AS(rmse(other, truth, 0, 4), std::invalid_argument);
}

TEST_CASE("divergence rule is a strict threshold at 5") {
  CHECK_FALSE(is_divergent({0.3, 0.3, 0.2}));
  CHECK(is_divergent({0.3, 5.1}));
  CHECK_FALSE(is_divergent({5.0, 0.1}));
  CHECK(is_divergent({std::numeric_limits<double>::infinity()}));
}

TEST_CASE("fabricated fit: zero horizon returns x(T), zero field holds the last point") {
  const TimeGrid grid = TimeGrid::linspace(0.0, 8.0, 161);
  Mat x(161, 2);
  for (int i = 0; i < 161; ++i) {
    x(i, 0) = std::sin(grid.times(i));
    x(i, 1) = std::cos(grid.times(i));
  }
  const FitResult f = fake_fit(x, grid);

  const TrajectoryWithFlag zero_h = inferred_trajectory(f, grid);
  CHECK(zero_h.traj.values == x);
  CHECK_FALSE(zero_h.diverged);

  const TimeGrid full = TimeGrid::linspace(0.0, 16.0, 321);
  const TrajectoryWithFlag inf = inferred_trajectory(f, full);
  CHECK(inf.traj.values.topRows(161) == x);
  for (int i = 161; i < 321; ++i) {
    CHECK(inf.traj.values(i, 0) == x(160, 0));  // zero dynamics: constant forecast
    CHECK(inf.traj.values(i, 1) == x(160, 1));
  }
  const TrajectoryWithFlag rec = reconstructed_trajectory(f, full);
  for (int i = 0; i < 321; ++i) CHECK(rec.traj.values(i, 0) == x(0, 0));
}

TEST_CASE("aggregation excludes divergent replicates and matches manual recomputation") {
  ExperimentSpec spec = quick_spec("fn", "full");
  spec.replicates = 4;
  std::vector<ReplicateResult> rs(4);
  for (int i = 0; i < 4; ++i) {
    rs[i].replicate = i;
    rs[i].seed = 100 + i;
    rs[i].fit_inferred = Vec::Constant(2, 0.1 * (i + 1));
    rs[i].fit_reconstructed = Vec::Constant(2, 0.2 * (i + 1));
    rs[i].fc_inferred = Vec::Constant(2, 0.3 * (i + 1));
    rs[i].fc_reconstructed = Vec::Constant(2, 0.4 * (i + 1));
    rs[i].fit_seconds = 1.0 + i;
  }
  rs[2].diverged = true;

  const EvalReport rep = aggregate(spec, rs);
  CHECK(rep.divergence_count == 1);
  // kept replicates: 1, 2, 4 scaled by 0.1
  const double mean = (0.1 + 0.2 + 0.4) / 3.0;
  CHECK(rep.fit_inferred.mean(0) == doctest::Approx(mean).epsilon(1e-12));
  double ss = 0.0;
  for (double v : {0.1, 0.2, 0.4}) ss += (v - mean) * (v - mean);
  CHECK(rep.fit_inferred.sd(0) == doctest::Approx(std::sqrt(ss / 2.0)).epsilon(1e-12));
  // wall clock aggregates over every replicate, divergent included
  CHECK(rep.seconds_mean == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("spec validation") {
  ExperimentSpec spec;
  spec.pattern = "weird";
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = ExperimentSpec{};
  spec.replicates = 0;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = ExperimentSpec{};
  spec.system = "unknown";
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}
