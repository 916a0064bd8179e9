#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace magix {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Covariance factorization failed even after jitter escalation, or a
// quantity that must stay finite did not.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A trajectory left the representable domain (integration blow-up or a
// non-finite objective).
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Strictly increasing time points.
struct TimeGrid {
  Vec times;

  int size() const { return static_cast<int>(times.size()); }
  double front() const { return times(0); }
  double back() const { return times(times.size() - 1); }
  double span() const { return back() - front(); }

  // Mean spacing between adjacent points.
  double mean_spacing() const {
    if (size() < 2) throw std::invalid_argument("TimeGrid: need >= 2 points for spacing");
    return span() / (size() - 1);
  }

  bool equally_spaced(double rel_tol = 1e-8) const {
    if (size() < 3) return true;
    const double h = mean_spacing();
    for (int i = 1; i < size(); ++i) {
      if (std::abs((times(i) - times(i - 1)) - h) > rel_tol * std::abs(h)) return false;
    }
    return true;
  }

  void validate() const {
    if (size() < 1) throw std::invalid_argument("TimeGrid: empty");
    for (int i = 1; i < size(); ++i) {
      if (!(times(i) > times(i - 1))) throw std::invalid_argument("TimeGrid: not strictly increasing");
    }
  }

  static TimeGrid linspace(double t0, double t1, int n) {
    if (n < 1 || !(t1 > t0)) throw std::invalid_argument("TimeGrid::linspace: bad arguments");
    TimeGrid g;
    g.times = Vec::LinSpaced(n, t0, t1);
    return g;
  }

  TimeGrid head(int n) const {
    TimeGrid g;
    g.times = times.head(n);
    return g;
  }
};

// Per-grid-point states; row i is the state at grid.times(i).
struct Trajectory {
  TimeGrid grid;
  Mat values;  // |grid| x D

  int dim() const { return static_cast<int>(values.cols()); }

  void validate() const {
    grid.validate();
    if (values.rows() != grid.size()) throw std::invalid_argument("Trajectory: row count != grid length");
  }
};

// Noisy observations, possibly at different times per component.
// No component may be empty.
struct ObservationSet {
  struct Component {
    Vec times;
    Vec values;
  };
  std::vector<Component> comps;

  int dim() const { return static_cast<int>(comps.size()); }

  void validate() const {
    if (comps.empty()) throw std::invalid_argument("ObservationSet: no components");
    for (const auto& c : comps) {
      if (c.times.size() == 0) throw std::invalid_argument("ObservationSet: component with no observations");
      if (c.times.size() != c.values.size())
        throw std::invalid_argument("ObservationSet: times/values length mismatch");
      for (int i = 1; i < c.times.size(); ++i)
        if (!(c.times(i) > c.times(i - 1)))
          throw std::invalid_argument("ObservationSet: times not strictly increasing");
    }
  }

  // Map each observation time onto its grid index; every time must lie on
  // the grid (within tol * mean spacing).
  std::vector<std::vector<int>> indices_on(const TimeGrid& grid, double tol = 1e-6) const;
};

}  // namespace magix
