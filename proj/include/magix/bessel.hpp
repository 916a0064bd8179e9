#pragma once

namespace magix {

// Modified Bessel function of the second kind B_nu(x) for fractional order.
// Supported domain: 0 <= nu < 10, x > 0; relative accuracy better than
// 1e-12 over x in [1e-6, 50]. Throws std::domain_error outside the domain.
double bessel_k(double nu, double x);

// exp(x) * B_nu(x); stays representable where B_nu itself underflows.
double bessel_k_scaled(double nu, double x);

// One evaluation yields consecutive orders; ratios of the scaled values
// are exact ratios of the unscaled ones.
struct BesselKPair {
  double k_nu;    // exp(x) * B_nu(x)
  double k_nup1;  // exp(x) * B_{nu+1}(x)
};
BesselKPair bessel_k_pair_scaled(double nu, double x);

}  // namespace magix
