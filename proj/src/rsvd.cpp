#include "tmm/rsvd.hpp"

#include <Eigen/Dense>
#include <algorithm>

#include "tmm/rng.hpp"

namespace tmm {
namespace {

MatrixXd thin_q(const MatrixXd& y) {
  Eigen::HouseholderQR<MatrixXd> qr(y);
  return qr.householderQ() * MatrixXd::Identity(y.rows(), y.cols());
}

}  // namespace

VectorXd randomized_pinv_solve(const LinearOperator& op, const VectorXd& rhs,
                               const RandomizedSolveOptions& opts) {
  const Index m = op.rows();
  const Index k = op.cols();
  if (rhs.size() != m) throw ConfigError("randomized solve: rhs length mismatch");
  if (opts.rank <= 0) throw ConfigError("randomized solve: rank must be positive");

  const Index probes = std::min(opts.rank + opts.oversample, std::min(m, k));
  MatrixXd omega(k, probes);
  CounterRng gen(opts.seed, RngPurpose::Probe, 0);
  for (Index j = 0; j < probes; ++j) {
    for (Index i = 0; i < k; ++i) omega(i, j) = gen.next_normal();
  }

  MatrixXd q = thin_q(op.apply_block(omega));
  for (int p = 0; p < opts.powers; ++p) {
    MatrixXd z = thin_q(op.apply_adjoint_block(q));
    q = thin_q(op.apply_block(z));
  }

  // B = Q^T A, assembled through the adjoint: B^T = A^T Q.
  MatrixXd bt = op.apply_adjoint_block(q);
  Eigen::BDCSVD<MatrixXd> svd(bt.transpose(),
                              Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd& sv = svd.singularValues();
  if (sv.size() == 0 || !(sv[0] > 0.0)) {
    throw DegeneracyError("randomized solve: projected operator vanished");
  }
  const double cut = opts.rel_cutoff * sv[0];
  Index kept = 0;
  while (kept < sv.size() && kept < opts.rank && sv[kept] >= cut && sv[kept] > 0.0) {
    ++kept;
  }
  if (kept == 0) throw DegeneracyError("randomized solve: retained spectrum empty");

  // A ~= (Q U) S V^T, so  x = V S^{-1} (Q U)^T rhs.
  const VectorXd proj = (q * svd.matrixU().leftCols(kept)).transpose() * rhs;
  VectorXd x = VectorXd::Zero(k);
  for (Index j = 0; j < kept; ++j) {
    x.noalias() += svd.matrixV().col(j) * (proj[j] / sv[j]);
  }
  return x;
}

}  // namespace tmm
