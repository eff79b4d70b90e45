#pragma once

#include "tmm/types.hpp"

namespace tmm {

// Discretized Ginzburg-Landau chain on [-L,L]^d with pinned ends x_0 = x_{d+1} = 0:
//   V(x) = sum_{i=1}^{d+1} [ (gamma/2) ((x_i - x_{i-1})/h)^2 + (1/(4 gamma)) (1 - x_i^2)^2 ],
//   h = 1/(d+1).
// The i = d+1 quartic term is the constant 1/(4 gamma).
class GLPotential {
 public:
  GLPotential(int d, double gamma);

  int d() const { return d_; }
  double gamma() const { return gamma_; }
  double h() const { return h_; }

  double value(const VectorXd& x) const;
  VectorXd gradient(const VectorXd& x) const;
  // Hot-path gradient into a caller buffer; x and g must hold d doubles.
  void gradient(const double* x, double* g) const;
  // Tridiagonal Hessian: diag and (d-1) off-diagonal entries.
  void hessian(const VectorXd& x, VectorXd& diag, VectorXd& off) const;

 private:
  int d_;
  double gamma_, h_, coup_, invg_;  // coup_ = gamma/h^2
};

// The two symmetric minima (x_plus componentwise positive, x_minus = -x_plus),
// found by gradient descent with backtracking line search to |grad| < tol.
std::pair<VectorXd, VectorXd> find_minima(const GLPotential& pot, double tol = 1e-8);
// Independent damped-Newton solver (tridiagonal Newton steps with Levenberg
// damping); used to cross-check find_minima.
VectorXd find_minimum_newton(const GLPotential& pot, VectorXd x0, double tol = 1e-10);

}  // namespace tmm
