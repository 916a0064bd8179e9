#include "magix/types.hpp"

#include <cmath>

namespace magix {

std::vector<std::vector<int>> ObservationSet::indices_on(const TimeGrid& grid, double tol) const {
  validate();
  grid.validate();
  const double abs_tol = tol * grid.mean_spacing();
  std::vector<std::vector<int>> out(comps.size());
  for (size_t d = 0; d < comps.size(); ++d) {
    const Vec& times = comps[d].times;
    out[d].reserve(times.size());
    int j = 0;
    for (int i = 0; i < times.size(); ++i) {
      while (j < grid.size() && grid.times(j) < times(i) - abs_tol) ++j;
      if (j >= grid.size() || std::abs(grid.times(j) - times(i)) > abs_tol)
        throw std::invalid_argument("ObservationSet: observation time not on the discretization grid");
      out[d].push_back(j);
    }
  }
  return out;
}

}  // namespace magix
