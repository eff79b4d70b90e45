#pragma once

#include <cstdint>
#include <vector>

#include "tmm/entry_source.hpp"
#include "tmm/types.hpp"

namespace tmm {

struct MaxvolOptions {
  Index r1 = 1;
  int n_iter = 3;            // alternating improvement sweeps after greedy growth
  bool psd = false;          // restrict to a principal submatrix (I == J)
  std::uint64_t seed = 0;    // drives the randomized part of the candidate set
  double swap_tol = 1e-4;    // accept a swap only if it grows |det| by 1 + tol
  double residual_tol = 1e-12;  // relative residual below which growth stops early
  Index candidate_cap = 0;   // 0 = automatic: max(512, 4*r1)
};

struct MaxvolResult {
  std::vector<Index> rows;  // I, sorted ascending
  std::vector<Index> cols;  // J, sorted ascending
};

// Select an r1 x r1 cross of large volume through the entry source.  The PSD
// path grows a principal pivot set by greedy pivoted Cholesky over a capped
// candidate set and then runs determinant-ratio swap sweeps; the general path
// grows by full-pivot greedy elimination on a candidate block and then runs
// classical alternating row/column swap sweeps.  A cross that stays singular
// after three restarts with fresh candidates raises DegeneracyError.
MaxvolResult maxvol_cross(EntrySource& source, const MaxvolOptions& opts);

// Moore-Penrose pseudoinverse of the cross block: singular values below
// rel_cutoff * sigma_max are zeroed.  An identically zero block (no singular
// value survives) raises DegeneracyError.
MatrixXd core_pinv(const MatrixXd& cross, double rel_cutoff);

}  // namespace tmm
