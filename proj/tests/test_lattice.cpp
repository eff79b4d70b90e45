#include <cmath>
#include <map>

#include "doctest.h"
#include "tmm/lattice.hpp"

using namespace tmm;

namespace {

// Dense matrix exponential by scaling and squaring on a plain Taylor series;
// independent of the spectral route used by the library.
MatrixXd taylor_expm(const MatrixXd& a, int terms = 40) {
  int squarings = 0;
  double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  while (norm > 0.5) {
    norm /= 2.0;
    ++squarings;
  }
  const MatrixXd b = a / std::pow(2.0, squarings);
  MatrixXd out = MatrixXd::Identity(a.rows(), a.cols());
  MatrixXd term = out;
  for (int k = 1; k <= terms; ++k) {
    term = (term * b / static_cast<double>(k)).eval();
    out += term;
  }
  for (int s = 0; s < squarings; ++s) out = (out * out).eval();
  return out;
}

}  // namespace

TEST_SUITE("lattice") {

TEST_CASE("stationary density is a probability vector") {
  const LatticeModel model = make_chain(4, 3, 1.0, 0.7);
  const VectorXd rho = stationary_density(model);
  CHECK(rho.minCoeff() > 0.0);
  CHECK(rho.sum() == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("heat-bath rates satisfy detailed balance exactly") {
  const LatticeModel model = make_chain(4, 2, 1.0, 0.9);
  const VectorXd rho = stationary_density(model);
  for (Index s = 0; s < model.n_states; ++s) {
    for (int i = 0; i < model.d; ++i) {
      const int cur = model.digit(s, i);
      for (int a = 0; a < model.m; ++a) {
        if (a == cur) continue;
        const Index s2 = model.replace(s, i, a);
        const double fwd = model.rate(s, i, a) * rho[s];
        const double bwd = model.rate(s2, i, cur) * rho[s2];
        CHECK(std::abs(fwd - bwd) < 1e-12);
      }
    }
  }
}

TEST_CASE("generator rows sum to zero and kill constants") {
  const LatticeModel model = make_chain(3, 3, 1.0, 0.5);
  const MatrixXd gen = build_generator(model);
  CHECK(gen.rowwise().sum().cwiseAbs().maxCoeff() < 1e-12);
  for (Index s = 0; s < model.n_states; ++s) CHECK(gen(s, s) <= 0.0);
}

TEST_CASE("spectrum is ascending with a vanishing ground eigenvalue") {
  const LatticeModel model = make_chain(4, 2, 1.0, 0.6);
  const VectorXd rho = stationary_density(model);
  const SpectralData spec = eigendecompose(build_generator(model), rho);
  CHECK(std::abs(spec.lambda[0]) < 1e-10);
  CHECK(spec.gap() > 0.0);
  for (Index k = 1; k < spec.lambda.size(); ++k)
    CHECK(spec.lambda[k] >= spec.lambda[k - 1] - 1e-13);
  // The ground eigenfunction is the constant 1 (V.col(0) = sqrt_rho).
  const VectorXd w0 = spec.V.col(0).cwiseQuotient(spec.sqrt_rho);
  CHECK((w0.array() - w0[0]).abs().maxCoeff() < 1e-8);
}

TEST_CASE("semigroup action matches a direct matrix exponential") {
  const LatticeModel model = make_chain(3, 2, 1.0, 0.8);
  const VectorXd rho = stationary_density(model);
  const MatrixXd gen = build_generator(model);
  const SpectralData spec = eigendecompose(gen, rho);
  const MatrixXd pt = taylor_expm(gen * 0.7);
  VectorXd f(model.n_states);
  CounterRng rng(4, RngPurpose::TestPoint, 0);
  for (Index s = 0; s < model.n_states; ++s) f[s] = rng.uniform(-1.0, 1.0);
  const VectorXd via_spec = spec.semigroup(f, 0.7);
  const VectorXd via_expm = pt * f;
  CHECK((via_spec - via_expm).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("moment matrix equals the quadrature against the matrix exponential") {
  const LatticeModel model = make_chain(2, 2, 1.0, 0.5);
  const VectorXd rho = stationary_density(model);
  const MatrixXd gen = build_generator(model);
  const SpectralData spec = eigendecompose(gen, rho);
  const LatticeSiteBasis basis(model, rho, 2);
  const ClusterIndexer ix(2, 2);
  const MatrixXd psi = basis_table(model, basis, ix);
  const double t = 0.4;
  const MatrixXd m_spec = exact_moment_matrix(spec, psi, t);
  const MatrixXd m_expm = psi.transpose() * rho.asDiagonal() * taylor_expm(gen * t) * psi;
  REQUIRE(m_spec.rows() == ix.size());
  CHECK((m_spec - m_expm).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((m_spec - m_spec.transpose()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("committor solves the interior equation with pinned boundary sets") {
  const LatticeModel model = make_chain(4, 2, 1.0, 0.7);
  const MatrixXd gen = build_generator(model);
  std::vector<std::uint8_t> flags(static_cast<std::size_t>(model.n_states), 0);
  flags[0] = 1;                                             // all-down state
  flags[static_cast<std::size_t>(model.n_states - 1)] = 2;  // all-up state
  const VectorXd q = exact_committor(gen, flags);
  CHECK(q[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(q[model.n_states - 1] == doctest::Approx(1.0).epsilon(1e-12));
  const VectorXd resid = gen * q;
  for (Index s = 0; s < model.n_states; ++s) {
    if (flags[static_cast<std::size_t>(s)] == 0) CHECK(std::abs(resid[s]) < 1e-10);
    CHECK(q[s] >= -1e-12);
    CHECK(q[s] <= 1.0 + 1e-12);
  }
}

TEST_CASE("jump-chain endpoints follow the semigroup law") {
  const LatticeModel model = make_chain(3, 2, 1.0, 0.6);
  const MatrixXd gen = build_generator(model);
  const Index s0 = 5;
  const double t = 0.3;
  const MatrixXd pt = taylor_expm(gen * t);
  const int draws = 20000;
  VectorXd freq = VectorXd::Zero(model.n_states);
  for (int i = 0; i < draws; ++i) {
    CounterRng rng(21, RngPurpose::Trajectory, static_cast<std::uint64_t>(i));
    freq[gillespie_endpoint(model, s0, t, rng)] += 1.0;
  }
  freq /= draws;
  for (Index s = 0; s < model.n_states; ++s) {
    const double p = pt(s0, s);
    const double se = std::sqrt(std::max(p * (1.0 - p), 1e-12) / draws);
    CHECK(std::abs(freq[s] - p) < 5.0 * se + 1e-3);
  }
}

TEST_CASE("site basis functions are orthonormal under the site marginals") {
  const LatticeModel model = make_chain(3, 3, 1.0, 0.8);
  const VectorXd rho = stationary_density(model);
  const LatticeSiteBasis basis(model, rho, 3);
  std::vector<double> va(3);
  for (int site = 0; site < model.d; ++site) {
    const VectorXd marg = site_marginal(model, rho, site);
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        double acc = 0.0;
        for (int v = 0; v < model.m; ++v) {
          basis.fill(site, model.values[v], va.data());
          acc += marg[v] * va[static_cast<std::size_t>(a)] * va[static_cast<std::size_t>(b)];
        }
        CHECK(acc == doctest::Approx(a == b ? 1.0 : 0.0).scale(1.0).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("masked gram and stopped moments agree at lag zero") {
  const LatticeModel model = make_chain(3, 2, 1.0, 0.5);
  const VectorXd rho = stationary_density(model);
  const MatrixXd gen = build_generator(model);
  const LatticeSiteBasis basis(model, rho, 2);
  const ClusterIndexer ix(3, 2);
  const MatrixXd psi = basis_table(model, basis, ix);
  std::vector<std::uint8_t> absorbed(static_cast<std::size_t>(model.n_states), 0);
  absorbed[0] = 1;
  absorbed[7] = 2;
  const MatrixXd g_masked = exact_masked_gram(rho, psi, absorbed);
  const MatrixXd m0 = exact_stopped_moment_matrix(gen, rho, psi, absorbed, 0.0);
  CHECK((g_masked - m0).cwiseAbs().maxCoeff() < 1e-10);
  // With nothing absorbed the masked gram is the plain weighted gram.
  const std::vector<std::uint8_t> none(static_cast<std::size_t>(model.n_states), 0);
  const MatrixXd g_full = psi.transpose() * rho.asDiagonal() * psi;
  CHECK((exact_masked_gram(rho, psi, none) - g_full).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("lattice pools hold valid spin vectors with the right statistics") {
  const LatticeModel model = make_chain(4, 2, 1.0, 0.6);
  const VectorXd rho = stationary_density(model);
  const SamplePool pool = build_lattice_pool(model, rho, 800, 3, 0.5, 17);
  CHECK(pool.d == 4);
  CHECK(pool.n_src == 800);
  CHECK(pool.n_traj == 3);
  for (Index c = 0; c < pool.endpoints.cols(); ++c) {
    for (int k = 0; k < 4; ++k) {
      const double x = pool.endpoints(k, c);
      bool valid = false;
      for (int v = 0; v < model.m; ++v)
        if (x == model.values[v]) valid = true;
      CHECK(valid);
    }
  }
  // Empirical site-0 source marginal tracks the exact one.
  const VectorXd marg = site_marginal(model, rho, 0);
  double up = 0.0;
  for (Index i = 0; i < pool.n_src; ++i)
    if (pool.sources(0, i) == model.values[model.m - 1]) up += 1.0;
  up /= static_cast<double>(pool.n_src);
  CHECK(std::abs(up - marg[model.m - 1]) < 0.06);
  // Same seed reproduces the identical pool.
  const SamplePool again = build_lattice_pool(model, rho, 800, 3, 0.5, 17);
  CHECK((again.sources - pool.sources).cwiseAbs().maxCoeff() == 0.0);
  CHECK((again.endpoints - pool.endpoints).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("quick certification run passes on a small chain") {
  const LatticeModel model = make_chain(5, 2, 1.0, 0.6);
  const VerificationReport report =
      verify_inequalities(model, {0.5, 1.0}, 2, 30, 1.0, 19);
  CHECK(report.all_pass());
  CHECK_FALSE(report.records.empty());
  for (const auto& rec : report.records) {
    INFO(rec.name, ": lhs=", rec.lhs, " rhs=", rec.rhs);
    CHECK(rec.pass);
  }
  CHECK(report.gap > 0.0);
  CHECK(report.r_max > 0.0);
  CHECK(report.corr_slope < 0.0);
  CHECK_FALSE(report.correlation_table.empty());
}

}  // TEST_SUITE
