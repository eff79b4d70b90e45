#include "tmm/slice.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace tmm {

bool in_mask(const ClusterIndexer& ix, Index i, Index owner, int delta) {
  if (ix.diag_span(i) <= delta) return true;
  return ix.site_distance(i, owner) <= delta;
}

Index mask_size(const ClusterIndexer& ix, Index owner, int delta) {
  Index count = 0;
  const Index size = ix.size();
  for (Index i = 0; i < size; ++i) {
    if (ix.canonical(i) && in_mask(ix, i, owner, delta)) ++count;
  }
  return count;
}

VectorXd SliceFactorization::reconstruct(const ClusterIndexer& ix) const {
  const Index dn = ix.dn();
  VectorXd out = VectorXd::Zero(ix.size());
  if (r2() > 0) {
    const MatrixXd uv = u * v;
    for (Index f1 = 0; f1 < dn; ++f1) {
      for (Index f2 = 0; f2 < dn; ++f2) {
        out[ix.from_factors(f1, f2)] = uv(f1, f2);
      }
    }
  }
  for (std::size_t k = 0; k < positions.size(); ++k) {
    const Index i = positions[k];
    out[i] += values[static_cast<Index>(k)];
    const Index dual = ix.swap_dual(i);
    if (dual != i) out[dual] += values[static_cast<Index>(k)];
  }
  return out;
}

SliceFactorization factor_slice(const VectorXd& m, Index owner, bool is_row,
                                const VectorXd& a, double b,
                                const ClusterIndexer& ix, int delta,
                                double svd_tol, Index max_rank) {
  const Index dn = ix.dn();
  const Index size = ix.size();
  if (m.size() != size) throw ConfigError("factor_slice: slice length mismatch");
  if (a.size() != dn) throw ConfigError("factor_slice: first-moment length mismatch");
  if (owner < 0 || owner >= size) throw ConfigError("factor_slice: owner out of range");

  SliceFactorization out;
  out.owner = owner;
  out.is_row = is_row;

  if (delta >= ix.d()) {
    // Full bandwidth: every entry is masked; store the raw slice and skip the
    // smooth remainder entirely so reconstruction is exact.
    for (Index i = 0; i < size; ++i) {
      if (ix.canonical(i)) out.positions.push_back(i);
    }
    out.values.resize(static_cast<Index>(out.positions.size()));
    for (std::size_t k = 0; k < out.positions.size(); ++k) {
      out.values[static_cast<Index>(k)] = m[out.positions[k]];
    }
    return out;
  }

  MatrixXd amat(dn, dn);
  for (Index f1 = 0; f1 < dn; ++f1) {
    for (Index f2 = 0; f2 < dn; ++f2) {
      const Index i = ix.from_factors(f1, f2);
      const bool masked = in_mask(ix, i, owner, delta);
      amat(f1, f2) = masked ? a[f1] * a[f2] * b : m[i];
      if (masked && ix.canonical(i)) {
        out.positions.push_back(i);
      }
    }
  }
  std::sort(out.positions.begin(), out.positions.end());
  out.values.resize(static_cast<Index>(out.positions.size()));
  for (std::size_t k = 0; k < out.positions.size(); ++k) {
    const Index i = out.positions[k];
    out.values[static_cast<Index>(k)] =
        m[i] - a[ix.p1(i)] * a[ix.p2(i)] * b;
  }

  // Deterministic truncated factorization via the small-side normal matrix.
  const MatrixXd ata = amat.transpose() * amat;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(ata);
  if (es.info() != Eigen::Success) {
    throw DegeneracyError("factor_slice: eigendecomposition failed");
  }
  const VectorXd& ev = es.eigenvalues();  // ascending
  const double sigma1 = std::sqrt(std::max(ev[dn - 1], 0.0));
  Index r2 = 0;
  if (sigma1 > 0.0) {
    const double cut = svd_tol * sigma1;
    for (Index k = dn - 1; k >= 0; --k) {
      const double sigma = std::sqrt(std::max(ev[k], 0.0));
      if (sigma < cut) break;
      ++r2;
      if (max_rank > 0 && r2 >= max_rank) break;
    }
  }
  out.u.resize(dn, r2);
  out.v.resize(r2, dn);
  for (Index t = 0; t < r2; ++t) {
    VectorXd vec = es.eigenvectors().col(dn - 1 - t);
    // Deterministic sign: the largest-magnitude entry (smallest index on
    // ties) is made positive.
    Index arg = 0;
    double best = std::abs(vec[0]);
    for (Index q = 1; q < dn; ++q) {
      const double mag = std::abs(vec[q]);
      if (mag > best) {
        best = mag;
        arg = q;
      }
    }
    if (vec[arg] < 0.0) vec = -vec;
    out.u.col(t).noalias() = amat * vec;
    out.v.row(t) = vec.transpose();
  }
  return out;
}

}  // namespace tmm
