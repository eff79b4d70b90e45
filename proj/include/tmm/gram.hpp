#pragma once

#include <vector>

#include "tmm/basis.hpp"
#include "tmm/types.hpp"

namespace tmm {

// Zero-lag Gram matrix M0(i,j) = <psi_i, psi_j>_mu of the duplicated
// two-cluster basis, held in factored form M0 = B^T B.  B expands every
// cluster function over an orthonormal product family: the constant, per-site
// extended univariate functions (products of two same-site factors lie in
// their span), and cross-site products of two non-constant factors.  The
// factorization makes the pseudoinverse exact and cheap,
//   pinv(M0) = B^T [(B B^T)^dagger]^2 B,
// where B B^T is block: a small arrow-shaped block over {constant, single
// site} coordinates, and exactly 2*I over cross-site coordinates (each
// cross product is hit by the two duplicate orderings).
class GramOperator {
 public:
  GramOperator(const UnivariateBasisFamily& family, const MeanFieldMeasure& measure,
               const ClusterIndexer& indexer, double rel_cutoff = 1e-10);

  Index size() const { return size_; }
  Index extended_size() const { return e_total_; }
  int extended_order() const { return m_; }

  // M0 w  (exact sparse product through the factors).
  VectorXd multiply(const VectorXd& w) const;

  // Least-norm solution of M0 c = w.  The relative residual of the returned
  // solution is written to *residual_out when given; a residual above 1e-6
  // additionally emits a warning on stderr (w outside the range of M0).
  VectorXd apply_pinv(const VectorXd& w, double* residual_out = nullptr) const;

  // Dense M0 for verification; guarded to (dn)^2 <= 4096.
  MatrixXd dense() const;

 private:
  struct ColumnEntry {
    Index coord;
    double coef;
  };

  VectorXd b_apply(const VectorXd& w) const;        // B w
  VectorXd b_apply_transpose(const VectorXd& y) const;  // B^T y

  Index size_ = 0;
  Index e_total_ = 0;
  Index arrow_size_ = 0;
  int d_ = 0;
  int n_ = 0;
  int m_ = 0;  // extended per-site order count
  std::vector<std::vector<ColumnEntry>> columns_;
  MatrixXd arrow_pinv_sq_;  // [(arrow block)^dagger]^2
};

}  // namespace tmm
