#include <cmath>

#include "doctest.h"
#include "tmm/gl_model.hpp"
#include "tmm/langevin.hpp"

using namespace tmm;

TEST_SUITE("langevin") {

TEST_CASE("potential gradient matches central finite differences") {
  const GLPotential pot(6, 0.05);
  CounterRng rng(2, RngPurpose::TestPoint, 0);
  VectorXd x(6);
  for (Index k = 0; k < 6; ++k) x[k] = rng.uniform(-1.5, 1.5);
  const VectorXd g = pot.gradient(x);
  const double h = 1e-6;
  for (Index k = 0; k < 6; ++k) {
    VectorXd xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    const double fd = (pot.value(xp) - pot.value(xm)) / (2.0 * h);
    CHECK(g[k] == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("hessian tridiagonal entries match gradient differences") {
  const GLPotential pot(5, 0.1);
  VectorXd x(5);
  x << 0.4, -0.9, 1.2, 0.1, -0.4;
  VectorXd diag, off;
  pot.hessian(x, diag, off);
  const double h = 1e-6;
  for (Index k = 0; k < 5; ++k) {
    VectorXd xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    const VectorXd gp = pot.gradient(xp), gm = pot.gradient(xm);
    CHECK(diag[k] == doctest::Approx((gp[k] - gm[k]) / (2.0 * h)).epsilon(1e-4));
    if (k + 1 < 5)
      CHECK(off[k] ==
            doctest::Approx((gp[k + 1] - gm[k + 1]) / (2.0 * h)).epsilon(1e-4));
  }
}

TEST_CASE("the two minima are symmetric critical points near the wells") {
  const GLPotential pot(8, 0.1);
  const auto [xp, xm] = find_minima(pot);
  CHECK(pot.gradient(xp).norm() < 1e-6);
  CHECK(pot.gradient(xm).norm() < 1e-6);
  CHECK((xp + xm).cwiseAbs().maxCoeff() < 1e-6);  // sign symmetry
  for (Index k = 0; k < 8; ++k) CHECK(xp[k] > 0.1);
  CHECK(pot.value(xp) < pot.value(VectorXd::Zero(8)));
}

TEST_CASE("zero lag returns the start point untouched") {
  const GLPotential pot(3, 0.1);
  SimConfig cfg;
  cfg.dt = 1e-3;
  VectorXd x0(3);
  x0 << 0.2, -0.5, 1.0;
  CounterRng rng(1, RngPurpose::Trajectory, 0);
  const VectorXd y = simulate_endpoint(pot, x0, 0.0, cfg, rng);
  CHECK((y - x0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("near-quadratic limit relaxes to the gaussian law") {
  // d = 1 with a strong pinned coupling: V ~ (gamma (d+1)^2) x^2 plus an
  // O(1/gamma) quartic correction, so endpoints of a long simulation follow
  // a gaussian with variance close to 1 / (beta * 2 gamma (d+1)^2).
  const double gamma = 10.0;
  const GLPotential pot(1, gamma);
  SimConfig cfg;
  cfg.beta = 1.0;
  cfg.dt = 2e-4;
  cfg.L = 2.0;
  const double k_spring = 2.0 * gamma * 4.0;  // 2 gamma / h^2, h = 1/2
  const double var_exact = 1.0 / (cfg.beta * k_spring);
  const int n = 20000;
  double s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    CounterRng rng(33, RngPurpose::Trajectory, static_cast<std::uint64_t>(i));
    const VectorXd y = simulate_endpoint(pot, VectorXd::Zero(1), 0.3, cfg, rng);
    s1 += y[0];
    s2 += y[0] * y[0];
  }
  const double mean = s1 / n;
  const double var = s2 / n - mean * mean;
  CHECK(std::abs(mean) < 4.0 * std::sqrt(var_exact / n));
  CHECK(var == doctest::Approx(var_exact).epsilon(0.06));
}

TEST_CASE("reflection keeps every coordinate inside the box") {
  const GLPotential pot(4, 0.01);
  SimConfig cfg;
  cfg.beta = 0.01;  // enormous noise
  cfg.dt = 1e-3;
  cfg.L = 1.5;
  CounterRng rng(9, RngPurpose::Trajectory, 0);
  const VectorXd y = simulate_endpoint(pot, VectorXd::Zero(4), 0.5, cfg, rng);
  for (Index k = 0; k < 4; ++k) CHECK(std::abs(y[k]) <= 1.5);
}

TEST_CASE("identical seeds reproduce identical trajectories") {
  const GLPotential pot(5, 0.05);
  SimConfig cfg;
  cfg.dt = 1e-3;
  CounterRng a(7, RngPurpose::Trajectory, 3), b(7, RngPurpose::Trajectory, 3);
  const VectorXd x0 = VectorXd::Constant(5, 0.3);
  const VectorXd ya = simulate_endpoint(pot, x0, 0.1, cfg, a);
  const VectorXd yb = simulate_endpoint(pot, x0, 0.1, cfg, b);
  CHECK((ya - yb).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("stopped runs absorb, freeze, and classify") {
  const GLPotential pot(2, 0.1);
  SimConfig cfg;
  cfg.beta = 1.0;
  cfg.dt = 1e-3;
  StopRegions regions;
  regions.balls.push_back(Ball{VectorXd::Constant(2, 5.0), 1.0});   // unreachable
  regions.balls.push_back(Ball{VectorXd::Zero(2), 10.0});           // everywhere

  // Start inside region B: absorbed immediately, endpoint frozen at the start.
  CounterRng rng(1, RngPurpose::Trajectory, 0);
  StoppedTraj tr = simulate_stopped(pot, VectorXd::Zero(2), 0.05, 0.5, regions, cfg, rng);
  CHECK(tr.flag_at_lag == 2);
  CHECK(tr.eventual_flag == 2);
  CHECK(tr.y_at_lag.cwiseAbs().maxCoeff() == 0.0);

  // Outside both balls with an unreachable pair: never absorbed.
  StopRegions far;
  far.balls.push_back(Ball{VectorXd::Constant(2, 50.0), 0.5});
  far.balls.push_back(Ball{VectorXd::Constant(2, -50.0), 0.5});
  CounterRng rng2(1, RngPurpose::Trajectory, 1);
  tr = simulate_stopped(pot, VectorXd::Zero(2), 0.05, 0.2, far, cfg, rng2);
  CHECK(tr.flag_at_lag == 0);
  CHECK(tr.eventual_flag == 0);

  // Pure absorption run (t = 0) inside a ball classifies instantly.
  CounterRng rng3(1, RngPurpose::Trajectory, 2);
  tr = simulate_stopped(pot, VectorXd::Constant(2, 5.0), 0.0, 0.3, regions, cfg, rng3);
  CHECK(tr.flag_at_lag == 1);
  CHECK(tr.eventual_flag == 1);
}

TEST_CASE("equilibrium sampler matches the gaussian law in the quadratic limit") {
  const double gamma = 10.0;
  const GLPotential pot(1, gamma);
  SimConfig cfg;
  cfg.beta = 1.0;
  cfg.dt = 2e-4;
  cfg.L = 2.0;
  const double var_exact = 1.0 / (2.0 * gamma * 4.0);
  const MatrixXd xs = sample_equilibrium(pot, cfg, 4000, 5, 8, 20000, 50);
  REQUIRE(xs.cols() == 4000);
  const double mean = xs.row(0).mean();
  const double var = xs.row(0).cwiseAbs2().mean() - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(var == doctest::Approx(var_exact).epsilon(0.15));
}

TEST_CASE("mean-field sampling fills the pool deterministically") {
  const MeanFieldMeasure mu = MeanFieldMeasure::quartic_boltzmann(3, 2.0, 0.2, 0.05);
  const MatrixXd a = sample_mean_field(mu, 50, 123);
  const MatrixXd b = sample_mean_field(mu, 50, 123);
  REQUIRE(a.rows() == 3);
  REQUIRE(a.cols() == 50);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.cwiseAbs().maxCoeff() <= 2.0);
}

}  // TEST_SUITE
