#include "magix/bessel.hpp"

#include <cmath>
#include <stdexcept>

namespace magix {

namespace {

constexpr double kEps = 1e-16;
constexpr int kMaxIter = 20000;

// Taylor coefficients of 1/Gamma(z) = sum_k c[k] z^{k+1} (Abramowitz &
// Stegun 6.1.34), so 1/Gamma(1+mu) = sum_k c[k] mu^k.
constexpr double kInvGammaCoef[] = {
    1.0,
    0.5772156649015329,
    -0.6558780715202538,
    -0.0420026350340952,
    0.1665386113822915,
    -0.0421977345555443,
    -0.0096219715278770,
    0.0072189432466630,
    -0.0011651675918591,
    -0.0002152416741149,
    0.0001280502823882,
    -0.0000201348547807,
    -0.0000012504934821,
    0.0000011330272320,
    -0.0000002056338417,
    0.0000000061160950,
    0.0000000050020075,
    -0.0000000011812746,
    0.0000000001043427,
    0.0000000000077823,
    -0.0000000000036968,
    0.0000000000005100,
    -0.0000000000000206,
    -0.0000000000000054,
    0.0000000000000014,
    0.0000000000000001,
};
constexpr int kNumCoef = sizeof(kInvGammaCoef) / sizeof(double);

// gam1 = (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu)
// gam2 = (1/Gamma(1-mu) + 1/Gamma(1+mu)) / 2
// Even/odd split of the Taylor series above; no cancellation for |mu| <= 1/2.
void temme_gamma_terms(double mu, double& gam1, double& gam2, double& gampl, double& gammi) {
  const double mu2 = mu * mu;
  double even = 0.0, odd = 0.0, pw = 1.0;
  for (int j = 0; j + 1 < kNumCoef; j += 2) {
    even += kInvGammaCoef[j] * pw;
    odd += kInvGammaCoef[j + 1] * pw;
    pw *= mu2;
  }
  gam1 = -odd;
  gam2 = even;
  gampl = gam2 - mu * gam1;  // 1/Gamma(1+mu)
  gammi = gam2 + mu * gam1;  // 1/Gamma(1-mu)
}

// Temme's series for K_mu and K_{mu+1}, |mu| <= 1/2, 0 < x <= 2.
void bessel_k_temme(double mu, double x, double& kmu, double& kmu1) {
  const double x2 = 0.5 * x;
  const double pimu = M_PI * mu;
  const double fact = (std::abs(pimu) < kEps) ? 1.0 : pimu / std::sin(pimu);
  double d = -std::log(x2);
  double e = mu * d;
  const double fact2 = (std::abs(e) < kEps) ? 1.0 : std::sinh(e) / e;
  double gam1, gam2, gampl, gammi;
  temme_gamma_terms(mu, gam1, gam2, gampl, gammi);
  double ff = fact * (gam1 * std::cosh(e) + gam2 * fact2 * d);
  double sum = ff;
  e = std::exp(e);
  double p = 0.5 * e / gampl;
  double q = 0.5 / (e * gammi);
  double c = 1.0;
  d = x2 * x2;
  double sum1 = p;
  int i = 1;
  for (; i <= kMaxIter; ++i) {
    ff = (i * ff + p + q) / (i * i - mu * mu);
    c *= d / i;
    p /= (i - mu);
    q /= (i + mu);
    const double del = c * ff;
    sum += del;
    const double del1 = c * (p - i * ff);
    sum1 += del1;
    if (std::abs(del) < std::abs(sum) * kEps) break;
  }
  if (i > kMaxIter) throw std::runtime_error("bessel_k: series failed to converge");
  kmu = sum;
  kmu1 = sum1 * 2.0 / x;
}

// Steed/Thompson-Barnett continued fraction (CF2) for exp(x)*K_mu and
// exp(x)*K_{mu+1}, |mu| <= 1/2, x > 2.
void bessel_k_cf2_scaled(double mu, double x, double& kmu_s, double& kmu1_s) {
  double b = 2.0 * (1.0 + x);
  double d = 1.0 / b;
  double h = d, delh = d;
  double q1 = 0.0, q2 = 1.0;
  const double a1 = 0.25 - mu * mu;
  double q = a1, c = a1, a = -a1;
  double s = 1.0 + q * delh;
  int i = 2;
  for (; i <= kMaxIter; ++i) {
    a -= 2 * (i - 1);
    c = -a * c / i;
    const double qnew = (q1 - b * q2) / a;
    q1 = q2;
    q2 = qnew;
    q += c * qnew;
    b += 2.0;
    d = 1.0 / (b + a * d);
    delh = (b * d - 1.0) * delh;
    h += delh;
    const double dels = q * delh;
    s += dels;
    if (std::abs(dels / s) < kEps) break;
  }
  if (i > kMaxIter) throw std::runtime_error("bessel_k: continued fraction failed to converge");
  h = a1 * h;
  kmu_s = std::sqrt(M_PI / (2.0 * x)) / s;
  kmu1_s = kmu_s * (mu + x + 0.5 - h) / x;
}

void check_domain(double nu, double x) {
  if (!(x > 0.0)) throw std::domain_error("bessel_k: x must be positive");
  if (!(nu >= 0.0 && nu < 10.0)) throw std::domain_error("bessel_k: order out of supported range [0, 10)");
}

}  // namespace

BesselKPair bessel_k_pair_scaled(double nu, double x) {
  check_domain(nu, x);
  const int nl = static_cast<int>(std::floor(nu + 0.5));
  const double mu = nu - nl;  // in [-1/2, 1/2)
  double kmu, kmu1;
  if (x <= 2.0) {
    bessel_k_temme(mu, x, kmu, kmu1);
    const double ex = std::exp(x);
    kmu *= ex;
    kmu1 *= ex;
  } else {
    bessel_k_cf2_scaled(mu, x, kmu, kmu1);
  }
  // upward recurrence K_{a+1} = K_{a-1} + (2a/x) K_a, stable for K
  double kp = kmu, kc = kmu1;
  for (int j = 1; j <= nl; ++j) {
    const double knext = kp + (2.0 * (mu + j) / x) * kc;
    kp = kc;
    kc = knext;
  }
  // after the loop: kp = K_{mu+nl} = K_nu, kc = K_{nu+1}
  return {kp, kc};
}

double bessel_k_scaled(double nu, double x) { return bessel_k_pair_scaled(nu, x).k_nu; }

double bessel_k(double nu, double x) {
  const BesselKPair p = bessel_k_pair_scaled(nu, x);
  return std::exp(-x) * p.k_nu;
}

}  // namespace magix
