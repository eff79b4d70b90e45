#include <cmath>

#include <Eigen/Dense>

#include "doctest.h"
#include "tmm/basis.hpp"
#include "tmm/gram.hpp"

using namespace tmm;

namespace {

// Independent zero-lag Gram oracle: <psi_i, psi_j>_mu by per-site quadrature,
// exploiting only that the measure is a product over sites.
//   psi_i psi_j splits into per-site products of at most four factors.
MatrixXd brute_gram(const UnivariateBasisFamily& fam, const MeanFieldMeasure& mu,
                    const ClusterIndexer& ix) {
  const int d = ix.d();
  const Quadrature& q = mu.quad();
  MatrixXd out(ix.size(), ix.size());
  for (Index i = 0; i < ix.size(); ++i) {
    const ClusterIndex a = ix.to_cluster(i);
    for (Index j = 0; j < ix.size(); ++j) {
      const ClusterIndex b = ix.to_cluster(j);
      double prod = 1.0;
      for (int site = 1; site <= d; ++site) {
        double acc = 0.0;
        bool touched = (a.s1 == site) || (a.s2 == site) || (b.s1 == site) ||
                       (b.s2 == site);
        if (!touched) continue;
        const VectorXd& dens = mu.quad_density(site - 1);
        for (Index k = 0; k < q.x.size(); ++k) {
          double v = 1.0;
          if (a.s1 == site) v *= fam.eval(site - 1, a.b1, q.x[k]);
          if (a.s2 == site) v *= fam.eval(site - 1, a.b2, q.x[k]);
          if (b.s1 == site) v *= fam.eval(site - 1, b.b1, q.x[k]);
          if (b.s2 == site) v *= fam.eval(site - 1, b.b2, q.x[k]);
          acc += q.w[k] * dens[k] * v;
        }
        prod *= acc;
      }
      out(i, j) = prod;
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("gram") {

TEST_CASE("dense zero-lag gram matches the direct quadrature oracle") {
  const MeanFieldMeasure mu = MeanFieldMeasure::uniform(3, 2.0);
  const UnivariateBasisFamily fam(BasisKind::Legendre, 2, mu);
  const ClusterIndexer ix(3, 2);
  const GramOperator gram(fam, mu, ix);
  const MatrixXd got = gram.dense();
  const MatrixXd want = brute_gram(fam, mu, ix);
  CHECK((got - want).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("dense gram matches the oracle for a fourier family on a quartic measure") {
  const MeanFieldMeasure mu = MeanFieldMeasure::quartic_boltzmann(2, 2.0, 0.1, 0.02);
  const UnivariateBasisFamily fam(BasisKind::Fourier, 3, mu);
  const ClusterIndexer ix(2, 3);
  const GramOperator gram(fam, mu, ix);
  CHECK((gram.dense() - brute_gram(fam, mu, ix)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("multiply agrees with the dense matrix") {
  const MeanFieldMeasure mu = MeanFieldMeasure::uniform(3, 2.0);
  const UnivariateBasisFamily fam(BasisKind::Legendre, 2, mu);
  const ClusterIndexer ix(3, 2);
  const GramOperator gram(fam, mu, ix);
  const MatrixXd dense = gram.dense();
  CounterRng rng(4, RngPurpose::Probe, 0);
  for (int rep = 0; rep < 5; ++rep) {
    VectorXd w(ix.size());
    for (Index k = 0; k < w.size(); ++k) w[k] = rng.uniform(-1.0, 1.0);
    const VectorXd got = gram.multiply(w);
    const VectorXd want = dense * w;
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("pseudoinverse solves match a full svd pseudoinverse") {
  const MeanFieldMeasure mu = MeanFieldMeasure::uniform(2, 2.0);
  const UnivariateBasisFamily fam(BasisKind::Legendre, 3, mu);
  const ClusterIndexer ix(2, 3);
  const GramOperator gram(fam, mu, ix);
  const MatrixXd dense = gram.dense();

  Eigen::BDCSVD<MatrixXd> svd(dense, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd& sv = svd.singularValues();
  VectorXd inv = VectorXd::Zero(sv.size());
  for (Index k = 0; k < sv.size(); ++k)
    if (sv[k] > 1e-10 * sv[0]) inv[k] = 1.0 / sv[k];
  const MatrixXd pinv = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();

  CounterRng rng(8, RngPurpose::Probe, 1);
  for (int rep = 0; rep < 5; ++rep) {
    VectorXd z(ix.size());
    for (Index k = 0; k < z.size(); ++k) z[k] = rng.uniform(-1.0, 1.0);
    const VectorXd w = dense * z;  // guaranteed to lie in the range
    double residual = -1.0;
    const VectorXd c = gram.apply_pinv(w, &residual);
    CHECK((c - pinv * w).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(residual >= 0.0);
    CHECK(residual < 1e-8);
    CHECK((dense * c - w).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("duplicated clusters make the gram rank deficient, not the solver") {
  const MeanFieldMeasure mu = MeanFieldMeasure::uniform(2, 2.0);
  const UnivariateBasisFamily fam(BasisKind::Legendre, 2, mu);
  const ClusterIndexer ix(2, 2);
  const GramOperator gram(fam, mu, ix);
  const MatrixXd dense = gram.dense();
  Eigen::BDCSVD<MatrixXd> svd(dense);
  const VectorXd& sv = svd.singularValues();
  CHECK(sv[sv.size() - 1] < 1e-12 * sv[0]);  // swap duplicates collapse
  // A duplicate-symmetric right-hand side still solves consistently.
  VectorXd w = dense.col(ix.from_factors(1, 2)) + dense.col(ix.from_factors(2, 1));
  double residual = -1.0;
  const VectorXd c = gram.apply_pinv(w, &residual);
  CHECK(residual < 1e-8);
  CHECK((dense * c - w).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("extended product family closes for polynomials and trigonometrics") {
  const MeanFieldMeasure mu = MeanFieldMeasure::uniform(2, 2.0);
  const UnivariateBasisFamily leg(BasisKind::Legendre, 3, mu);
  const ClusterIndexer ix(2, 3);
  const GramOperator g1(leg, mu, ix);
  CHECK(g1.extended_order() >= 2 * 3 - 1);
  const UnivariateBasisFamily fou(BasisKind::Fourier, 3, mu);
  const GramOperator g2(fou, mu, ix);
  CHECK(g2.extended_order() >= 2 * 3 - 1);
}

TEST_CASE("radial site functions do not close into a finite product family") {
  const MeanFieldMeasure mu = MeanFieldMeasure::uniform(2, 2.0);
  const UnivariateBasisFamily rbf(BasisKind::Rbf, 3, mu);
  const ClusterIndexer ix(2, 3);
  CHECK_THROWS_AS(GramOperator(rbf, mu, ix), ConfigError);
}

}  // TEST_SUITE
