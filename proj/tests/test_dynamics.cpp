#include <doctest.h>

#include <cmath>

#include "magix/dynamics.hpp"
#include "magix/rng.hpp"

using namespace magix;

namespace {

double rel_err(double got, double want) {
  return std::abs(got - want) / std::max({std::abs(got), std::abs(want), 1e-8});
}

// plain loop re-evaluation, no Eigen products
Vec naive_forward(const MlpDynamics& m, const Vec& x) {
  std::vector<double> a(x.data(), x.data() + x.size());
  for (int l = 0; l < m.layer_count(); ++l) {
    const int in = m.widths[l], out = m.widths[l + 1];
    const double* W = m.params.data() + m.weight_offset(l);
    const double* b = W + in * out;
    std::vector<double> z(out, 0.0);
    for (int i = 0; i < out; ++i) {
      double s = b[i];
      for (int j = 0; j < in; ++j) s += W[i * in + j] * a[j];
      z[i] = (l + 1 < m.layer_count()) ? std::max(0.0, s) : s;
    }
    a = std::move(z);
  }
  return Eigen::Map<const Vec>(a.data(), a.size());
}

}  // namespace

TEST_CASE("fn derivative at the benchmark initial state") {
  const OdeSystem fn = make_system("fn");
  Vec x(2);
  x << -1.0, 1.0;
  const Vec dx = eval_system(fn, x, 0.0);
  CHECK(rel_err(dx(0), 1.0) < 1e-15);
  CHECK(rel_err(dx(1), 1.0 / 3.0) < 1e-15);
}

TEST_CASE("lv log-coordinates push the derivative through 1/x") {
  const OdeSystem lv = make_system("lv");
  CHECK(lv.log_transformed);
  Vec z(2);
  z << std::log(5.0), std::log(0.2);
  const Vec dz = eval_system(lv, z, 0.0);
  CHECK(rel_err(dz(0), 1.5 - 0.2) < 1e-14);            // a - b x2
  CHECK(rel_err(dz(1), 5.0 - 3.0) < 1e-14);            // c x1 - d
}

TEST_CASE("hes1 log-coordinates evaluate the pushforward") {
  const OdeSystem h = make_system("hes1");
  const Vec z0 = initial_state(h);
  const Vec dz = eval_system(h, z0, 0.0);
  // recompute in raw coordinates and divide through x
  const double x1 = 1.438575, x2 = 2.037488, x3 = 17.90385;
  const double s = 1.0 + x1 * x1;
  CHECK(rel_err(dz(0), (-0.022 * x1 * x3 + 0.3 * x2 - 0.031 * x1) / x1) < 1e-12);
  CHECK(rel_err(dz(1), (-0.028 * x2 + 0.5 / s) / x2) < 1e-12);
  CHECK(rel_err(dz(2), (-0.022 * x1 * x3 + 20.0 / s - 0.3 * x3) / x3) < 1e-12);
}

TEST_CASE("hamiltonian field conserves the energy form exactly") {
  const OdeSystem h = make_system("hamiltonian:10");
  Rng rng(5);
  Vec x(10);
  for (int i = 0; i < 10; ++i) x(i) = rng.normal();
  const Vec dx = eval_system(h, x, 0.0);
  const int n = 5;
  // dH/dt = p . pdot + 2 q . qdot
  const double dH = x.head(n).dot(dx.head(n)) + 2.0 * x.tail(n).dot(dx.tail(n));
  CHECK(std::abs(dH) < 1e-13);
}

TEST_CASE("log_initial_state rejects non-positive states") {
  Vec bad(2);
  bad << 1.0, 0.0;
  CHECK_THROWS_AS(log_initial_state(bad), std::domain_error);
  bad << -0.5, 2.0;
  CHECK_THROWS_AS(log_initial_state(bad), std::domain_error);
}

TEST_CASE("mlp: zero parameters give the zero map") {
  MlpDynamics m;
  m.widths = {3, 8, 3};
  m.params.assign(m.param_count(), 0.0);
  Vec x(3);
  x << 1.0, -2.0, 0.5;
  CHECK(mlp_forward(m, x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mlp: hand-built identity-through-relu network") {
  // f(x) = max(0, x) per coordinate: W0 = I, W1 = I
  MlpDynamics m;
  m.widths = {2, 2, 2};
  m.params.assign(m.param_count(), 0.0);
  double* W0 = m.params.data();
  W0[0] = 1.0;  // row-major 2x2
  W0[3] = 1.0;
  double* W1 = m.params.data() + m.weight_offset(1);
  W1[0] = 1.0;
  W1[3] = 1.0;
  Vec x(2);
  x << 0.7, -1.2;
  const Vec y = mlp_forward(m, x);
  CHECK(y(0) == 0.7);
  CHECK(y(1) == 0.0);
}

TEST_CASE("mlp forward matches a naive re-evaluation") {
  Rng rng(23);
  for (const auto& widths : {std::vector<int>{2, 16, 2}, std::vector<int>{3, 8, 8, 8, 3}}) {
    MlpDynamics m = mlp_init(widths, rng.next_u64());
    // random biases too, so every term is exercised
    for (double& v : m.params) v += 0.05 * rng.normal();
    for (int trial = 0; trial < 20; ++trial) {
      Vec x(widths.front());
      for (int i = 0; i < x.size(); ++i) x(i) = rng.normal();
      const Vec got = mlp_forward(m, x);
      const Vec want = naive_forward(m, x);
      for (int i = 0; i < x.size(); ++i) CHECK(rel_err(got(i), want(i)) < 1e-13);
    }
  }
}

TEST_CASE("mlp gradients match central finite differences away from kinks") {
  Rng rng(29);
  int done = 0;
  while (done < 100) {
    const MlpDynamics base = mlp_init({2, 6, 2}, rng.next_u64());
    MlpDynamics m = base;
    for (double& v : m.params) v += 0.1 * rng.normal();
    Vec x(2), up(2);
    x << rng.normal(), rng.normal();
    up << rng.normal(), rng.normal();

    // keep away from ReLU kinks
    MlpBatchCache cache;
    mlp_forward_batch(m, x.transpose(), &cache);
    if (cache.pre[0].cwiseAbs().minCoeff() < 1e-3) continue;
    ++done;

    const MlpPointGrads g = mlp_grads(m, x, up);
    const double h = 1e-6;
    for (int i = 0; i < 2; ++i) {
      Vec xp = x, xm = x;
      xp(i) += h;
      xm(i) -= h;
      const double fd = up.dot(mlp_forward(m, xp) - mlp_forward(m, xm)) / (2.0 * h);
      CHECK(rel_err(g.grad_x(i), fd) < 1e-5);
    }
    for (int k = 0; k < m.param_count(); k += 7) {
      MlpDynamics mp = m, mm = m;
      mp.params[k] += h;
      mm.params[k] -= h;
      const double fd = up.dot(mlp_forward(mp, x) - mlp_forward(mm, x)) / (2.0 * h);
      CHECK(rel_err(g.grad_theta(k), fd) < 1e-5);
    }
  }
}

TEST_CASE("mlp gradients: zero upstream and pure affine adjoint") {
  Rng rng(31);
  MlpDynamics m = mlp_init({3, 5, 3}, 99);
  Vec x(3);
  x << 0.3, -0.4, 1.1;
  const MlpPointGrads g = mlp_grads(m, x, Vec::Zero(3));
  CHECK(g.grad_x.cwiseAbs().maxCoeff() == 0.0);
  CHECK(Eigen::Map<const Vec>(g.grad_theta.data(), g.grad_theta.size()).cwiseAbs().maxCoeff() == 0.0);

  // no hidden layer: f = W x + b, so grad_x = W^T upstream exactly
  MlpDynamics lin;
  lin.widths = {3, 3};
  lin.params.assign(lin.param_count(), 0.0);
  Eigen::Map<Eigen::Matrix<double, 3, 3, Eigen::RowMajor>> W(lin.params.data());
  for (int i = 0; i < 9; ++i) lin.params[i] = rng.normal();
  Vec up(3);
  up << 1.0, -2.0, 0.5;
  const MlpPointGrads gl = mlp_grads(lin, x, up);
  const Vec want = W.transpose() * up;
  for (int i = 0; i < 3; ++i) CHECK(gl.grad_x(i) == want(i));
}

TEST_CASE("bias-free networks are positively homogeneous in x") {
  MlpDynamics m = mlp_init({2, 32, 2}, 7);  // biases are zero at init
  Rng rng(37);
  for (int trial = 0; trial < 20; ++trial) {
    Vec x(2);
    x << rng.normal(), rng.normal();
    const double alpha = 0.1 + 3.0 * rng.uniform();
    const Vec lhs = mlp_forward(m, (alpha * x).eval());
    const Vec rhs = alpha * mlp_forward(m, x);
    for (int i = 0; i < 2; ++i) CHECK(rel_err(lhs(i), rhs(i)) < 1e-12);
  }
}

TEST_CASE("mlp_init determinism and parameter counting") {
  const MlpDynamics a = mlp_init({2, 512, 2}, 42);
  const MlpDynamics b = mlp_init({2, 512, 2}, 42);
  const MlpDynamics c = mlp_init({2, 512, 2}, 43);
  CHECK(a.param_count() == 2562);
  CHECK(static_cast<int>(a.params.size()) == 2562);
  CHECK(a.params == b.params);
  CHECK(a.params != c.params);
  const MlpDynamics deep = mlp_init({2, 32, 32, 32, 2}, 1);
  CHECK(deep.param_count() == 2 * 32 + 32 + 32 * 32 + 32 + 32 * 32 + 32 + 32 * 2 + 2);
}
