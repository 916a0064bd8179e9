#include "magix/dynamics.hpp"

#include <cmath>

#include "magix/rng.hpp"

namespace magix {

namespace {

OdeSystem make_fn() {
  OdeSystem sys;
  sys.name = "fn";
  sys.dim = 2;
  const double a = 0.2, b = 0.2, c = 3.0;
  sys.f = [=](const Vec& x, double, Vec& dx) {
    dx(0) = c * (x(0) - x(0) * x(0) * x(0) / 3.0 + x(1));
    dx(1) = -(x(0) - a + b * x(1)) / c;
  };
  return sys;
}

OdeSystem make_lv() {
  OdeSystem sys;
  sys.name = "lv";
  sys.dim = 2;
  sys.log_transformed = true;
  const double a = 1.5, b = 1.0, c = 1.0, d = 3.0;
  sys.f = [=](const Vec& z, double, Vec& dz) {
    const double x1 = std::exp(z(0)), x2 = std::exp(z(1));
    dz(0) = a - b * x2;
    dz(1) = c * x1 - d;
  };
  return sys;
}

OdeSystem make_hes1() {
  OdeSystem sys;
  sys.name = "hes1";
  sys.dim = 3;
  sys.log_transformed = true;
  const double a = 0.022, b = 0.3, c = 0.031, d = 0.028, e = 0.5, f = 20.0, g = 0.3;
  sys.f = [=](const Vec& z, double, Vec& dz) {
    const double x1 = std::exp(z(0)), x2 = std::exp(z(1)), x3 = std::exp(z(2));
    const double s = 1.0 + x1 * x1;
    dz(0) = -a * x3 + b * x2 / x1 - c;
    dz(1) = -d + e / (s * x2);
    dz(2) = -a * x1 + f / (s * x3) - g;
  };
  return sys;
}

// H(q, p) = 1/2 p^T p + q^T q on state (p, q): pdot = -2q, qdot = p.
OdeSystem make_hamiltonian(int dim) {
  if (dim < 2 || dim % 2 != 0) throw std::invalid_argument("hamiltonian system needs an even dimension >= 2");
  OdeSystem sys;
  sys.name = "hamiltonian:" + std::to_string(dim);
  sys.dim = dim;
  const int n = dim / 2;
  sys.f = [n](const Vec& x, double, Vec& dx) {
    dx.head(n) = -2.0 * x.tail(n);  // pdot
    dx.tail(n) = x.head(n);         // qdot
  };
  return sys;
}

}  // namespace

OdeSystem make_system(const std::string& name) {
  if (name == "fn") return make_fn();
  if (name == "lv") return make_lv();
  if (name == "hes1") return make_hes1();
  if (name.rfind("hamiltonian:", 0) == 0) {
    const int dim = std::stoi(name.substr(12));
    return make_hamiltonian(dim);
  }
  throw std::invalid_argument("unknown system: " + name);
}

Vec initial_state(const OdeSystem& sys, uint64_t seed) {
  if (sys.name == "fn") {
    Vec x0(2);
    x0 << -1.0, 1.0;
    return x0;
  }
  if (sys.name == "lv") {
    Vec x0(2);
    x0 << 5.0, 0.2;
    return log_initial_state(x0);
  }
  if (sys.name == "hes1") {
    Vec x0(3);
    x0 << 1.438575, 2.037488, 17.90385;
    return log_initial_state(x0);
  }
  // hamiltonian: standard Gaussian initial state
  Rng rng(seed);
  Vec x0(sys.dim);
  for (int i = 0; i < sys.dim; ++i) x0(i) = rng.normal();
  return x0;
}

double benchmark_time_span(const OdeSystem& sys) {
  if (sys.name == "fn") return 40.0;
  if (sys.name == "lv") return 12.0;
  if (sys.name == "hes1") return 480.0;
  return 16.0;  // hamiltonian: already on the standardized scale
}

Vec eval_system(const OdeSystem& sys, const Vec& x, double t) {
  if (x.size() != sys.dim) throw std::invalid_argument("eval_system: state dimension mismatch");
  Vec dx(sys.dim);
  sys.f(x, t, dx);
  return dx;
}

Vec log_initial_state(const Vec& raw_x0) {
  Vec z(raw_x0.size());
  for (int i = 0; i < raw_x0.size(); ++i) {
    if (!(raw_x0(i) > 0.0)) throw std::domain_error("log_initial_state: state must be strictly positive");
    z(i) = std::log(raw_x0(i));
  }
  return z;
}

int MlpDynamics::weight_offset(int l) const {
  int off = 0;
  for (int k = 0; k < l; ++k) off += widths[k] * widths[k + 1] + widths[k + 1];
  return off;
}

MlpDynamics mlp_init(const std::vector<int>& widths, uint64_t seed) {
  if (widths.size() < 2) throw std::invalid_argument("mlp_init: need at least input and output widths");
  if (widths.front() != widths.back()) throw std::invalid_argument("mlp_init: input and output widths must match");
  MlpDynamics m;
  m.widths = widths;
  m.params.assign(m.param_count(), 0.0);
  Rng rng(seed);
  for (int l = 0; l + 1 < static_cast<int>(widths.size()); ++l) {
    const int fan_in = widths[l];
    const int fan_out = widths[l + 1];
    const double bound = std::sqrt(6.0 / fan_in);
    double* w = m.params.data() + m.weight_offset(l);
    for (int i = 0; i < fan_in * fan_out; ++i) w[i] = rng.uniform(-bound, bound);
    // biases stay zero
  }
  return m;
}

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using WMap = Eigen::Map<const RowMat>;
using BMap = Eigen::Map<const Vec>;

}  // namespace

Mat mlp_forward_batch(const MlpDynamics& m, const Mat& X, MlpBatchCache* cache) {
  if (X.cols() != m.dim()) throw std::invalid_argument("mlp_forward: state dimension mismatch");
  const int L = m.layer_count();
  if (cache) {
    cache->act.assign(1, X);
    cache->pre.clear();
  }
  Mat a = X;
  for (int l = 0; l < L; ++l) {
    const int in = m.widths[l], out = m.widths[l + 1];
    WMap W(m.params.data() + m.weight_offset(l), out, in);
    BMap b(m.params.data() + m.weight_offset(l) + in * out, out);
    Mat z = a * W.transpose();
    z.rowwise() += b.transpose();
    if (cache) cache->pre.push_back(z);
    if (l + 1 < L) {
      a = z.cwiseMax(0.0);
      if (cache) cache->act.push_back(a);
    } else {
      a = std::move(z);
    }
  }
  return a;
}

void mlp_backward_batch(const MlpDynamics& m, const MlpBatchCache& cache, const Mat& upstream,
                        Mat* grad_x, Vec* grad_theta) {
  const int L = m.layer_count();
  if (grad_theta) {
    grad_theta->resize(m.param_count());
    grad_theta->setZero();
  }
  Mat delta = upstream;  // n x widths[l+1], gradient wrt pre[l]
  for (int l = L - 1; l >= 0; --l) {
    const int in = m.widths[l], out = m.widths[l + 1];
    if (l < L - 1) {
      // pass through the ReLU of layer l's output (pre[l] > 0 mask)
      delta = delta.cwiseProduct((cache.pre[l].array() > 0.0).cast<double>().matrix());
    }
    if (grad_theta) {
      Eigen::Map<RowMat> gW(grad_theta->data() + m.weight_offset(l), out, in);
      Eigen::Map<Vec> gb(grad_theta->data() + m.weight_offset(l) + in * out, out);
      gW = delta.transpose() * cache.act[l];
      gb = delta.colwise().sum();
    }
    if (l > 0 || grad_x) {
      WMap W(m.params.data() + m.weight_offset(l), out, in);
      delta = delta * W;  // now n x in, gradient wrt act[l]
    }
  }
  if (grad_x) *grad_x = delta;
}

Vec mlp_forward(const MlpDynamics& m, const Vec& x) {
  return mlp_forward_batch(m, x.transpose()).row(0).transpose();
}

MlpPointGrads mlp_grads(const MlpDynamics& m, const Vec& x, const Vec& upstream) {
  if (upstream.size() != m.dim()) throw std::invalid_argument("mlp_grads: upstream dimension mismatch");
  MlpBatchCache cache;
  mlp_forward_batch(m, x.transpose(), &cache);
  Mat gx;
  MlpPointGrads g;
  mlp_backward_batch(m, cache, upstream.transpose(), &gx, &g.grad_theta);
  g.grad_x = gx.row(0).transpose();
  return g;
}

}  // namespace magix
