#include "tmm/quadrature.hpp"

#include <cmath>

namespace tmm {

// Nodes are the roots of the Legendre polynomial P_n on (-1,1), found by
// Newton iteration from the Chebyshev-angle initial guess; weights are
// 2 / ((1-x^2) P_n'(x)^2). Accurate to full double precision for n <= 128.
Quadrature gauss_legendre(int nodes, double lo, double hi) {
  if (nodes < 1) throw ConfigError("gauss_legendre: nodes must be >= 1");
  const int n = nodes;
  VectorXd x(n), w(n);
  const double pi = 3.14159265358979323846;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    w[n - 1 - i] = w[i];
  }
  // Affine map from (-1,1) to (lo,hi).
  const double c = 0.5 * (hi - lo), m = 0.5 * (hi + lo);
  for (int i = 0; i < n; ++i) {
    x[i] = m + c * x[i];
    w[i] *= c;
  }
  return {x, w};
}

Quadrature composite_gauss_legendre(int panels, int nodes_per_panel, double lo, double hi) {
  if (panels < 1) throw ConfigError("composite_gauss_legendre: panels must be >= 1");
  const Quadrature base = gauss_legendre(nodes_per_panel, 0.0, 1.0);
  const int total = panels * nodes_per_panel;
  VectorXd x(total), w(total);
  const double width = (hi - lo) / panels;
  for (int p = 0; p < panels; ++p) {
    const double a = lo + p * width;
    for (int i = 0; i < nodes_per_panel; ++i) {
      x[p * nodes_per_panel + i] = a + width * base.x[i];
      w[p * nodes_per_panel + i] = width * base.w[i];
    }
  }
  return {x, w};
}

}  // namespace tmm
