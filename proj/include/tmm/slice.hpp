#pragma once

#include <vector>

#include "tmm/basis.hpp"
#include "tmm/types.hpp"

namespace tmm {

// Sparse-plus-low-rank factorization of one operator column (or row).  The
// sparse part lives on the locality mask; the smooth remainder, reshaped to a
// (dn) x (dn) matrix over the two factor positions, is kept as a truncated
// rank-r2 product U V.  Sparse positions are stored once per duplicate pair
// (p1 <= p2) and scattered onto both representations on reconstruction.
struct SliceFactorization {
  Index owner = 0;
  bool is_row = false;
  std::vector<Index> positions;  // canonical masked positions, ascending
  VectorXd values;               // sparse values, one per stored position
  MatrixXd u;                    // (dn) x r2
  MatrixXd v;                    // r2 x (dn)

  Index r2() const { return u.cols(); }
  Index stored_entries() const {
    return static_cast<Index>(positions.size()) + static_cast<Index>(u.size()) +
           static_cast<Index>(v.size());
  }
  // Dense (dn)^2 slice: smooth part at every entry plus the scattered sparse
  // part. Assumes the slice was built from duplicate-symmetric estimates.
  VectorXd reconstruct(const ClusterIndexer& ix) const;
};

// True when entry i is kept sparse for this owner: its clusters are within
// lattice distance delta of the owner's clusters, or its own two sites are
// within delta of each other.
bool in_mask(const ClusterIndexer& ix, Index i, Index owner, int delta);

// Count of canonical positions inside the mask (the stored sparse size).
Index mask_size(const ClusterIndexer& ix, Index owner, int delta);

// Split a raw estimated slice m into the masked sparse part and a truncated
// factorization of the smooth remainder:
//   sparse(i) = m(i) - a[p1(i)] a[p2(i)] b        on the mask,
//   A(p1,p2)  = a[p1] a[p2] b on the mask, m(i) off the mask,
// with A truncated at relative spectral tolerance svd_tol (keep sigma_k >=
// svd_tol * sigma_1; max_rank > 0 additionally caps the kept rank).  When
// delta >= d the raw slice is stored verbatim and the factors stay empty.
SliceFactorization factor_slice(const VectorXd& m, Index owner, bool is_row,
                                const VectorXd& a, double b,
                                const ClusterIndexer& ix, int delta,
                                double svd_tol, Index max_rank = 0);

}  // namespace tmm
