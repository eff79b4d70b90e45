#pragma once

#include "tmm/types.hpp"

namespace tmm {

// Composite Gauss-Legendre rule on [lo, hi]: `panels` equal subintervals with
// `nodes_per_panel` Gauss nodes each. One panel of 64 nodes is the default
// used for per-site integrals; sharply peaked site measures raise `panels`.
struct Quadrature {
  VectorXd x;  // nodes, ascending
  VectorXd w;  // positive weights, sum = hi - lo
};

Quadrature gauss_legendre(int nodes, double lo, double hi);
Quadrature composite_gauss_legendre(int panels, int nodes_per_panel, double lo, double hi);

}  // namespace tmm
