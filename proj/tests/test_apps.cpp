#include <cmath>

#include "doctest.h"
#include "tmm/apps.hpp"

using namespace tmm;

TEST_SUITE("apps") {

TEST_CASE("unit-coefficient expansions match single cluster functions") {
  const MeanFieldMeasure mu = MeanFieldMeasure::uniform(3, 2.0);
  const UnivariateBasisFamily basis(BasisKind::Legendre, 2, mu);
  const ClusterIndexer ix(3, 2);
  CounterRng rng(2, RngPurpose::TestPoint, 0);
  for (Index j : {Index(0), Index(9), Index(25), Index(35)}) {
    VectorXd c = VectorXd::Zero(ix.size());
    c[j] = 1.0;
    for (int rep = 0; rep < 3; ++rep) {
      VectorXd x(3);
      for (int k = 0; k < 3; ++k) x[k] = rng.uniform(-2.0, 2.0);
      CHECK(evaluate_expansion(c, basis, ix, x) ==
            doctest::Approx(eval_cluster(basis, ix, j, x)).epsilon(1e-14));
    }
  }
}

TEST_CASE("projection recovers a function made of cluster terms") {
  const int d = 2;
  const MeanFieldMeasure mu = MeanFieldMeasure::uniform(d, 2.0);
  const UnivariateBasisFamily basis(BasisKind::Legendre, 2, mu);
  const ClusterIndexer ix(d, 2);
  const GramOperator gram(basis, mu, ix);
  const GLPotential pot(d, 0.1);
  SimConfig cfg;
  cfg.dt = 1e-3;
  const MatrixXd sources = sample_mean_field(mu, 4000, 91);
  const SamplePool pool = build_pool(pot, sources, 1, 0.0, cfg, 91, "uniform");
  const auto g = [&](const VectorXd& x) {
    return 2.0 * eval_cluster(basis, ix, 0, x) + 0.5 * eval_cluster(basis, ix, 7, x) -
           0.3 * eval_cluster(basis, ix, 13, x);
  };
  const VectorXd c = project_function(g, pool, basis, gram);
  CounterRng rng(7, RngPurpose::TestPoint, 0);
  for (int rep = 0; rep < 5; ++rep) {
    VectorXd x(d);
    for (int k = 0; k < d; ++k) x[k] = rng.uniform(-1.5, 1.5);
    CHECK(evaluate_expansion(c, basis, ix, x) == doctest::Approx(g(x)).epsilon(0.15));
  }
}

TEST_CASE("marginals match a brute tensor-quadrature integral") {
  const int d = 3;
  const MeanFieldMeasure mu =
      MeanFieldMeasure::quartic_boltzmann(d, 2.0, 0.4, 0.1);
  const UnivariateBasisFamily basis(BasisKind::Legendre, 2, mu);
  const ClusterIndexer ix(d, 2);
  VectorXd c(ix.size());
  CounterRng rng(11, RngPurpose::TestPoint, 0);
  for (Index j = 0; j < ix.size(); ++j) c[j] = rng.uniform(-0.5, 0.5);
  // Duplicate-symmetrize so both representations carry the same weight.
  for (Index j = 0; j < ix.size(); ++j) {
    const Index dual = ix.swap_dual(j);
    if (dual > j) {
      const double avg = 0.5 * (c[j] + c[dual]);
      c[j] = avg;
      c[dual] = avg;
    }
  }
  const Quadrature& q = mu.quad();

  SUBCASE("single-site marginal") {
    MatrixXd grid(1, 5);
    grid << -1.7, -0.6, 0.0, 0.9, 1.5;
    const VectorXd got = marginal_density(c, basis, mu, {1}, grid);
    for (Index g = 0; g < grid.cols(); ++g) {
      double acc = 0.0;
      for (Index qa = 0; qa < q.x.size(); ++qa) {
        for (Index qb = 0; qb < q.x.size(); ++qb) {
          VectorXd x(3);
          x << q.x[qa], grid(0, g), q.x[qb];
          double sum = 0.0;
          for (Index j = 0; j < ix.size(); ++j)
            sum += c[j] * eval_cluster(basis, ix, j, x);
          acc += q.w[qa] * q.w[qb] * mu.density(0, x[0]) * mu.density(2, x[2]) * sum;
        }
      }
      acc *= mu.density(1, grid(0, g));
      CHECK(got[g] == doctest::Approx(acc).scale(1.0).epsilon(1e-8));
    }
  }

  SUBCASE("two-site marginal") {
    MatrixXd grid(2, 4);
    grid.row(0) << -1.2, -0.3, 0.4, 1.6;
    grid.row(1) << 0.8, -1.5, 0.2, -0.7;
    const VectorXd got = marginal_density(c, basis, mu, {0, 2}, grid);
    for (Index g = 0; g < grid.cols(); ++g) {
      double acc = 0.0;
      for (Index qa = 0; qa < q.x.size(); ++qa) {
        VectorXd x(3);
        x << grid(0, g), q.x[qa], grid(1, g);
        double sum = 0.0;
        for (Index j = 0; j < ix.size(); ++j)
          sum += c[j] * eval_cluster(basis, ix, j, x);
        acc += q.w[qa] * mu.density(1, x[1]) * sum;
      }
      acc *= mu.density(0, grid(0, g)) * mu.density(2, grid(1, g));
      CHECK(got[g] == doctest::Approx(acc).scale(1.0).epsilon(1e-8));
    }
  }
}

TEST_CASE("the constant expansion integrates to unit mass") {
  const int d = 3;
  const MeanFieldMeasure mu = MeanFieldMeasure::quartic_boltzmann(d, 2.0, 0.3, 0.1);
  const UnivariateBasisFamily basis(BasisKind::Legendre, 2, mu);
  const ClusterIndexer ix(d, 2);
  VectorXd c = VectorXd::Zero(ix.size());
  c[0] = 1.0;  // the all-constant cluster: the density is mu itself
  const Quadrature& q = mu.quad();
  MatrixXd grid(1, q.x.size());
  grid.row(0) = q.x.transpose();
  const VectorXd m = marginal_density(c, basis, mu, {2}, grid);
  double mass = 0.0;
  for (Index g = 0; g < q.x.size(); ++g) mass += q.w[g] * m[g];
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("sphere samples sit on the sphere inside the box") {
  Ball ball;
  ball.center = VectorXd::Zero(5);
  ball.radius = 0.8;
  const MatrixXd pts = sample_sphere_points(ball, 200, 2.0, 17, 0);
  REQUIRE(pts.rows() == 5);
  REQUIRE(pts.cols() == 200);
  for (Index i = 0; i < 200; ++i)
    CHECK((pts.col(i) - ball.center).norm() == doctest::Approx(0.8).epsilon(1e-12));
  const MatrixXd again = sample_sphere_points(ball, 200, 2.0, 17, 0);
  CHECK((pts - again).cwiseAbs().maxCoeff() == 0.0);
  const MatrixXd other = sample_sphere_points(ball, 200, 2.0, 17, 1);
  CHECK((pts - other).cwiseAbs().maxCoeff() > 0.0);

  // A ball poking out of the box gets its samples clipped to the walls.
  Ball edge;
  edge.center = VectorXd::Constant(5, 1.8);
  edge.radius = 0.5;
  const MatrixXd clipped = sample_sphere_points(edge, 200, 2.0, 19, 0);
  CHECK(clipped.cwiseAbs().maxCoeff() <= 2.0);
}

TEST_CASE("committor predictions pin the regions to zero and one") {
  const MeanFieldMeasure mu = MeanFieldMeasure::uniform(2, 2.0);
  const UnivariateBasisFamily basis(BasisKind::Legendre, 2, mu);
  const ClusterIndexer ix(2, 2);
  StopRegions regions;
  regions.balls.push_back(Ball{VectorXd::Constant(2, 1.0), 0.4});
  regions.balls.push_back(Ball{VectorXd::Constant(2, -1.0), 0.4});
  VectorXd c(ix.size());
  CounterRng rng(23, RngPurpose::TestPoint, 0);
  for (Index j = 0; j < ix.size(); ++j) c[j] = rng.next_normal();
  CHECK(committor_value(c, basis, ix, regions, VectorXd::Constant(2, 1.0)) == 0.0);
  CHECK(committor_value(c, basis, ix, regions, VectorXd::Constant(2, -1.0)) == 1.0);
  VectorXd mid = VectorXd::Zero(2);
  CHECK(committor_value(c, basis, ix, regions, mid) ==
        doctest::Approx(evaluate_expansion(c, basis, ix, mid)).epsilon(1e-14));
}

TEST_CASE("zero-lag moment references are exact evaluations") {
  const GLPotential pot(3, 0.1);
  SimConfig cfg;
  cfg.dt = 1e-3;
  VectorXd x(3);
  x << 0.3, -0.8, 1.1;
  const auto g = [](const VectorXd& p) { return p.squaredNorm(); };
  const ReferenceStat stat = mc_reference_moment(pot, x, g, 0.0, 50, cfg, 5);
  CHECK(stat.value == doctest::Approx(g(x)).epsilon(1e-14));
  CHECK(stat.se == 0.0);
}

TEST_CASE("moment references track the near-quadratic mean decay") {
  // Strong pinning: the site relaxes like an Ornstein-Uhlenbeck coordinate
  // with rate 2 gamma (d+1)^2, so the conditional mean decays exponentially.
  const double gamma = 10.0;
  const GLPotential pot(1, gamma);
  SimConfig cfg;
  cfg.beta = 1.0;
  cfg.dt = 2e-4;
  const double k_spring = 2.0 * gamma * 4.0;
  const double T = 0.05;
  VectorXd x0(1);
  x0 << 0.5;
  const auto g = [](const VectorXd& p) { return p[0]; };
  const ReferenceStat stat = mc_reference_moment(pot, x0, g, T, 4000, cfg, 29);
  const double expect = 0.5 * std::exp(-k_spring * T);
  CHECK(std::abs(stat.value - expect) < 5.0 * stat.se + 3e-3);
  CHECK(stat.n_used == 4000);
}

TEST_CASE("committor references are exact inside the regions and symmetric between them") {
  const GLPotential pot(1, 0.1);
  SimConfig cfg;
  cfg.beta = 2.0;
  cfg.dt = 5e-4;
  StopRegions regions;
  regions.balls.push_back(Ball{VectorXd::Constant(1, -0.96), 0.3});
  regions.balls.push_back(Ball{VectorXd::Constant(1, 0.96), 0.3});
  const ReferenceStat in_a =
      mc_reference_committor(pot, VectorXd::Constant(1, -0.96), regions, 5.0, 10, cfg, 3);
  CHECK(in_a.value == 0.0);
  CHECK(in_a.se == 0.0);
  const ReferenceStat in_b =
      mc_reference_committor(pot, VectorXd::Constant(1, 0.96), regions, 5.0, 10, cfg, 3);
  CHECK(in_b.value == 1.0);
  const ReferenceStat mid =
      mc_reference_committor(pot, VectorXd::Zero(1), regions, 5.0, 2000, cfg, 31);
  CHECK(mid.n_excluded < 100);  // absorption is fast downhill from the saddle
  CHECK(std::abs(mid.value - 0.5) < 4.0 * mid.se + 0.02);
}

TEST_CASE("the committor solve pipeline produces a usable function") {
  const int d = 4;
  const double gamma = 0.1, beta = 2.0;
  const GLPotential pot(d, gamma);
  SimConfig cfg;
  cfg.beta = beta;
  cfg.dt = 5e-4;
  const auto [x_plus, x_minus] = find_minima(pot);
  StopRegions regions;
  regions.balls.push_back(Ball{x_plus, 0.8});   // A: committor 0
  regions.balls.push_back(Ball{x_minus, 0.8});  // B: committor 1
  const MatrixXd sources = sample_equilibrium(pot, cfg, 300, 37, 8, 20000, 40);
  const SamplePool pool =
      build_stopped_pool(pot, sources, 20, 0.1, 1.5, regions, cfg, 37, "equilibrium");

  const MeanFieldMeasure mu = MeanFieldMeasure::quartic_boltzmann(d, 2.0, beta, gamma);
  const UnivariateBasisFamily basis(BasisKind::Fourier, 2, mu);
  const ClusterIndexer ix(d, 2);
  const FactorTables tables = build_factor_tables(pool, basis);
  const CommittorRhs rhs = estimate_committor_rhs(pool, tables, ix);

  BuildOptions bopts;
  bopts.r1 = ix.size();  // lossless cross
  bopts.delta = d;       // verbatim slices
  bopts.psd = false;
  bopts.difference = true;
  bopts.seed = 41;
  const CompressedOperator op = build_compressed(pool, basis, bopts);

  CommittorOptions copts;
  copts.n_bc = 400;
  copts.rank = ix.size();
  copts.seed = 43;
  const CommittorSolution sol =
      solve_committor(op, rhs, regions, basis, 2.0, copts);
  CHECK(sol.row_weight > 0.0);
  CHECK(sol.residual_a < 0.3);
  CHECK(sol.residual_b < 0.3);
  CHECK(sol.boundary_a.cols() == 400);

  // Hard pins inside the regions, a crossing value at the symmetric midpoint.
  CHECK(committor_value(sol.c, basis, ix, regions, x_plus) == 0.0);
  CHECK(committor_value(sol.c, basis, ix, regions, x_minus) == 1.0);
  const double mid = committor_value(sol.c, basis, ix, regions, VectorXd::Zero(d));
  CHECK(mid > 0.15);
  CHECK(mid < 0.85);
}

TEST_CASE("propagation steps compose the operator with the gram pseudoinverse") {
  const int d = 2;
  const MeanFieldMeasure mu = MeanFieldMeasure::uniform(d, 2.0);
  const UnivariateBasisFamily basis(BasisKind::Legendre, 2, mu);
  const ClusterIndexer ix(d, 2);
  const GramOperator gram(basis, mu, ix);
  const GLPotential pot(d, 0.1);
  SimConfig cfg;
  cfg.dt = 1e-3;
  const MatrixXd sources = sample_mean_field(mu, 400, 47);
  const SamplePool pool = build_pool(pot, sources, 5, 0.05, cfg, 47, "uniform");
  BuildOptions opts;
  opts.r1 = ix.size();
  opts.delta = d;
  opts.psd = false;
  opts.seed = 49;
  const CompressedOperator op = build_compressed(pool, basis, opts);
  VectorXd c(ix.size());
  CounterRng rng(51, RngPurpose::TestPoint, 0);
  for (Index j = 0; j < ix.size(); ++j) c[j] = rng.next_normal();

  const VectorXd zero_steps = predict_moment(op, gram, c, 0);
  CHECK((zero_steps - c).cwiseAbs().maxCoeff() == 0.0);

  const VectorXd one = predict_moment(op, gram, c, 1);
  const VectorXd expect1 = gram.apply_pinv(matvec(op, c));
  CHECK((one - expect1).cwiseAbs().maxCoeff() < 1e-12);

  const VectorXd two = predict_moment(op, gram, c, 2);
  const VectorXd expect2 = gram.apply_pinv(matvec(op, expect1));
  CHECK((two - expect2).cwiseAbs().maxCoeff() < 1e-12);

  const VectorXd dens = predict_density(op, gram, c, 1);
  const VectorXd expectd = gram.apply_pinv(matvec_adjoint(op, c));
  CHECK((dens - expectd).cwiseAbs().maxCoeff() < 1e-12);
}

}  // TEST_SUITE
