#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tmm/basis.hpp"
#include "tmm/entry_source.hpp"
#include "tmm/estimator.hpp"
#include "tmm/maxvol.hpp"
#include "tmm/pool.hpp"
#include "tmm/slice.hpp"
#include "tmm/types.hpp"

namespace tmm {

// Two-level compressed transition moment matrix: an r1 x r1 cross through
// pivot rows I and columns J with the core pseudoinverse M(I,J)^dagger, and
// one sparse-plus-low-rank slice per pivot column (and per pivot row for
// non-symmetric builds; symmetric builds alias rows to columns).
struct CompressedOperator {
  int d = 0;
  int n = 0;
  double t = 0.0;
  std::string measure_tag;
  bool psd = true;
  bool difference = false;  // holds (zero-lag Gram minus stopped operator)
  int delta = 0;
  std::vector<Index> rows;  // pivot rows I, ascending
  std::vector<Index> cols;  // pivot columns J, ascending
  MatrixXd core;            // pinv of the cross block M(I, J)
  std::vector<SliceFactorization> column_slices;  // one per pivot column
  std::vector<SliceFactorization> row_slices;     // empty when psd (aliased)
  FirstMoments moments;     // first-moment caches behind the slice splits
  ClusterIndexer ix{1, 1};

  Index r1() const { return static_cast<Index>(cols.size()); }
  const SliceFactorization& col_slice(Index k) const {
    return column_slices[static_cast<std::size_t>(k)];
  }
  const SliceFactorization& row_slice(Index k) const {
    return psd ? column_slices[static_cast<std::size_t>(k)]
               : row_slices[static_cast<std::size_t>(k)];
  }
};

struct BuildOptions {
  Index r1 = 1;
  int delta = 1;
  double svd_tol = 1e-3;   // relative spectral truncation of slice residuals
  int n_iter = 3;          // pivot improvement sweeps
  bool psd = true;
  bool difference = false; // estimate (I - stopped transfer) instead of M^t
  Index max_r2 = 0;        // optional cap on the per-slice residual rank
  double core_cutoff = 1e-10;
  double swap_tol = 1e-4;
  std::uint64_t seed = 0;
  Index candidate_cap = 0; // 0 = automatic
};

CompressedOperator build_compressed(const SamplePool& pool, const SiteBasis& basis,
                                    const BuildOptions& opts);

// y = (C core R) v applied slice-wise, never densifying the operator.
VectorXd matvec(const CompressedOperator& op, const VectorXd& v);
// y = (C core R)^T v.
VectorXd matvec_adjoint(const CompressedOperator& op, const VectorXd& v);

// Number of stored matrix entries: core plus every slice's sparse values and
// low-rank factors (aliased row slices counted once).
Index stored_entry_count(const CompressedOperator& op);
// The advertised memory budget 8 (r1^2 + d n r1 (r2_max + delta)).
Index stored_entry_bound(const CompressedOperator& op);

// Dense (dn)^2 x (dn)^2 assembly for verification; guarded to (dn)^2 <= 4096.
MatrixXd dense_reconstruct(const CompressedOperator& op);

void save_operator(const CompressedOperator& op, const std::string& path);
CompressedOperator load_operator(const std::string& path);

}  // namespace tmm
