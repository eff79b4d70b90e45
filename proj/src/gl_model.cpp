#include "tmm/gl_model.hpp"

#include <cmath>

namespace tmm {

GLPotential::GLPotential(int d, double gamma) : d_(d), gamma_(gamma) {
  if (d < 1) throw ConfigError("GLPotential: d must be >= 1");
  if (gamma <= 0.0) throw ConfigError("GLPotential: gamma must be > 0");
  h_ = 1.0 / (d + 1.0);
  coup_ = gamma_ / (h_ * h_);
  invg_ = 1.0 / gamma_;
}

double GLPotential::value(const VectorXd& x) const {
  double v = 0.0;
  double prev = 0.0;
  for (int i = 0; i < d_; ++i) {
    const double dx = (x[i] - prev) / h_;
    const double q = 1.0 - x[i] * x[i];
    v += 0.5 * gamma_ * dx * dx + 0.25 * invg_ * q * q;
    prev = x[i];
  }
  // Boundary terms i = d+1: gradient link to the pinned end plus the constant quartic.
  const double dx = (0.0 - prev) / h_;
  v += 0.5 * gamma_ * dx * dx + 0.25 * invg_;
  return v;
}

void GLPotential::gradient(const double* x, double* g) const {
  for (int k = 0; k < d_; ++k) {
    const double left = (k > 0) ? x[k - 1] : 0.0;
    const double right = (k + 1 < d_) ? x[k + 1] : 0.0;
    g[k] = coup_ * (2.0 * x[k] - left - right) - invg_ * x[k] * (1.0 - x[k] * x[k]);
  }
}

VectorXd GLPotential::gradient(const VectorXd& x) const {
  VectorXd g(d_);
  gradient(x.data(), g.data());
  return g;
}

void GLPotential::hessian(const VectorXd& x, VectorXd& diag, VectorXd& off) const {
  diag.resize(d_);
  off.resize(std::max(0, d_ - 1));
  for (int k = 0; k < d_; ++k)
    diag[k] = 2.0 * coup_ - invg_ * (1.0 - 3.0 * x[k] * x[k]);
  for (int k = 0; k + 1 < d_; ++k) off[k] = -coup_;
}

std::pair<VectorXd, VectorXd> find_minima(const GLPotential& pot, double tol) {
  const int d = pot.d();
  VectorXd x = VectorXd::Constant(d, 0.5);
  double f = pot.value(x);
  double step = 1e-3;
  // Coarse descent into the positive-well basin; a Newton polish finishes
  // (plain descent plateaus near machine precision on the value and cannot
  // certify tight gradient tolerances).
  const double gd_tol = std::max(tol, 1e-4);
  for (int iter = 0; iter < 200000; ++iter) {
    const VectorXd g = pot.gradient(x);
    const double gn = g.norm();
    if (gn < gd_tol) break;
    // Backtracking line search on f along -g.
    double s = step * 2.0;
    for (int bt = 0; bt < 60; ++bt) {
      const VectorXd trial = x - s * g;
      const double ft = pot.value(trial);
      if (ft <= f - 1e-4 * s * gn * gn) {
        x = trial;
        f = ft;
        break;
      }
      s *= 0.5;
    }
    step = s;
  }
  x = find_minimum_newton(pot, x, tol);
  return {x, -x};
}

VectorXd find_minimum_newton(const GLPotential& pot, VectorXd x, double tol) {
  const int d = pot.d();
  VectorXd diag(d), off(std::max(0, d - 1));
  double lambda = 1e-3;
  for (int iter = 0; iter < 500; ++iter) {
    const VectorXd g = pot.gradient(x);
    if (g.norm() < tol) return x;
    pot.hessian(x, diag, off);
    // Thomas solve of (H + lambda I) s = g.
    VectorXd a = diag.array() + lambda;
    VectorXd c = off, rhs = g;
    for (int k = 1; k < d; ++k) {
      const double m = off[k - 1] / a[k - 1];
      a[k] -= m * off[k - 1];
      rhs[k] -= m * rhs[k - 1];
    }
    VectorXd s(d);
    s[d - 1] = rhs[d - 1] / a[d - 1];
    for (int k = d - 2; k >= 0; --k) s[k] = (rhs[k] - off[k] * s[k + 1]) / a[k];
    const VectorXd trial = x - s;
    if (pot.value(trial) < pot.value(x)) {
      x = trial;
      lambda = std::max(1e-12, lambda * 0.3);
    } else {
      lambda *= 10.0;
    }
  }
  throw DegeneracyError("find_minimum_newton: no convergence");
}

}  // namespace tmm
