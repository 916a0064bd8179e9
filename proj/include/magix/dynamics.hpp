#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "magix/types.hpp"

namespace magix {

// A known parametric system used for data generation. For strictly positive
// systems f is the log-coordinate pushforward (d log x / dt = xdot / x), and
// states passed to f are log states.
struct OdeSystem {
  std::string name;
  int dim = 0;
  bool log_transformed = false;
  std::function<void(const Vec& x, double t, Vec& dxdt)> f;
};

// Supported names: "fn", "lv", "hes1", "hamiltonian:D" (D even).
OdeSystem make_system(const std::string& name);

// Initial state in the benchmark's native coordinates (log for lv/hes1).
// For hamiltonian:D the initial state is drawn from N(0, I) with the seed.
Vec initial_state(const OdeSystem& sys, uint64_t seed = 0);

// Raw time span of the 321-point benchmark trajectory.
double benchmark_time_span(const OdeSystem& sys);

Vec eval_system(const OdeSystem& sys, const Vec& x, double t);

// log(x0) componentwise; domain error if any component is not positive.
Vec log_initial_state(const Vec& raw_x0);

// Fully connected ReLU network f: R^D -> R^D modeling a derivative field.
// Time is not an input. Parameters are stored flat as [W0, b0, W1, b1, ...],
// each W row-major (out x in).
struct MlpDynamics {
  std::vector<int> widths;     // {D, hidden..., D}
  std::vector<double> params;

  int dim() const { return widths.front(); }
  int layer_count() const { return static_cast<int>(widths.size()) - 1; }
  int param_count() const {
    int n = 0;
    for (int l = 0; l + 1 < static_cast<int>(widths.size()); ++l) n += widths[l] * widths[l + 1] + widths[l + 1];
    return n;
  }
  // offset of W_l within params; biases follow the weights of each layer
  int weight_offset(int l) const;
};

// He-uniform weights, zero biases, deterministic in the seed.
MlpDynamics mlp_init(const std::vector<int>& widths, uint64_t seed);

Vec mlp_forward(const MlpDynamics& m, const Vec& x);

// Batched forward over rows of X (n x D). Cache holds pre-activations for
// the backward pass.
struct MlpBatchCache {
  std::vector<Mat> act;  // act[0] = X, act[l] = ReLU output of layer l
  std::vector<Mat> pre;  // pre[l] = affine output of layer l
};
Mat mlp_forward_batch(const MlpDynamics& m, const Mat& X, MlpBatchCache* cache = nullptr);

// Reverse accumulation: given upstream (n x D), fills the pullbacks
// upstream^T df/dX (n x D) and upstream^T df/dtheta (flat). Either output
// may be null. ReLU uses subgradient 0 at exactly-zero pre-activations.
void mlp_backward_batch(const MlpDynamics& m, const MlpBatchCache& cache, const Mat& upstream,
                        Mat* grad_x, Vec* grad_theta);

struct MlpPointGrads {
  Vec grad_x;
  Vec grad_theta;
};
MlpPointGrads mlp_grads(const MlpDynamics& m, const Vec& x, const Vec& upstream);

}  // namespace magix
