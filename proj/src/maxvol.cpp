#include "tmm/maxvol.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <unordered_set>
#include <utility>
#include <vector>

#include "tmm/rng.hpp"

namespace tmm {
namespace {

std::vector<Index> order_by_magnitude(const VectorXd& diag) {
  std::vector<Index> order(static_cast<std::size_t>(diag.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    const double ma = std::abs(diag[a]);
    const double mb = std::abs(diag[b]);
    if (ma != mb) return ma > mb;
    return a < b;
  });
  return order;
}

// Deterministic candidate pool: a magnitude-ranked head plus a random tail
// drawn from the remaining indices.  Restarts shrink the head so fresh random
// indices dominate the retry.
std::vector<Index> candidate_pool(const std::vector<Index>& order, Index cap,
                                  std::uint64_t seed, std::uint64_t stream,
                                  int restart) {
  const Index size = static_cast<Index>(order.size());
  if (cap >= size) {
    std::vector<Index> all(order.begin(), order.end());
    std::sort(all.begin(), all.end());
    return all;
  }
  Index head = cap - cap / 4;
  for (int r = 0; r < restart; ++r) head /= 2;
  std::vector<Index> picked(order.begin(), order.begin() + head);
  std::vector<Index> rest(order.begin() + head, order.end());
  CounterRng gen(seed, RngPurpose::PivotSearch, stream);
  const Index need = cap - head;
  for (Index i = 0; i < need; ++i) {
    const Index span = static_cast<Index>(rest.size()) - i;
    Index j = i + static_cast<Index>(gen.next_uniform() * static_cast<double>(span));
    j = std::min(j, i + span - 1);
    std::swap(rest[static_cast<std::size_t>(i)], rest[static_cast<std::size_t>(j)]);
    picked.push_back(rest[static_cast<std::size_t>(i)]);
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

std::vector<Index> complete_with_smallest(std::vector<Index> chosen, Index r1,
                                          Index size) {
  std::unordered_set<Index> used(chosen.begin(), chosen.end());
  for (Index i = 0; i < size && static_cast<Index>(chosen.size()) < r1; ++i) {
    if (used.insert(i).second) chosen.push_back(i);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

struct Attempt {
  bool ok = false;
  std::vector<Index> rows;
  std::vector<Index> cols;
};

// Principal-submatrix search: greedy pivoted Cholesky growth over a candidate
// block, then determinant-ratio swap polishing.  Exchanging pivot p for an
// outside index q multiplies det of the principal block by
//   s_q * H_pp + G(p,q)^2
// with H = M(S,S)^{-1}, G = H * M(S, C\S), and Schur diagonal
// s_q = M_qq - M(S,q)^T H M(S,q).
Attempt psd_attempt(EntrySource& source, const MaxvolOptions& opts,
                    const std::vector<Index>& order, Index cap, int restart) {
  Attempt out;
  const Index size = source.size();
  const Index r1 = opts.r1;
  const std::vector<Index> cand = candidate_pool(
      order, cap, opts.seed, static_cast<std::uint64_t>(restart), restart);
  const Index m = static_cast<Index>(cand.size());
  MatrixXd a = source.block(cand, cand);
  if (!a.allFinite()) return out;
  a = (0.5 * (a + a.transpose())).eval();

  VectorXd resid = a.diagonal();
  const double resid0 = resid.size() > 0 ? resid.maxCoeff() : 0.0;
  const double floor_val = std::max(opts.residual_tol * std::max(resid0, 0.0), 0.0);
  MatrixXd lfac(m, r1);
  std::vector<char> in_set(static_cast<std::size_t>(m), 0);
  std::vector<Index> sel;
  sel.reserve(static_cast<std::size_t>(r1));
  for (Index k = 0; k < r1; ++k) {
    Index best = -1;
    double best_val = floor_val;
    for (Index p = 0; p < m; ++p) {
      if (in_set[static_cast<std::size_t>(p)]) continue;
      if (resid[p] > best_val) {
        best_val = resid[p];
        best = p;
      }
    }
    if (best < 0) break;  // residual exhausted: block is effectively low rank
    VectorXd col = a.col(best);
    if (k > 0) col.noalias() -= lfac.leftCols(k) * lfac.row(best).head(k).transpose();
    col /= std::sqrt(resid[best]);
    lfac.col(k) = col;
    resid -= col.cwiseAbs2();
    in_set[static_cast<std::size_t>(best)] = 1;
    sel.push_back(best);
  }

  if (static_cast<Index>(sel.size()) < r1) {
    // Benign completion: the operator ran out of numerical rank, so any
    // completion leaves the cross singular in the directions the core
    // pseudoinverse will drop.  Fill with the smallest unused indices and
    // skip polishing.
    std::vector<Index> global;
    global.reserve(sel.size());
    for (Index p : sel) global.push_back(cand[static_cast<std::size_t>(p)]);
    out.rows = complete_with_smallest(std::move(global), r1, size);
    out.cols = out.rows;
    out.ok = true;
    return out;
  }

  std::vector<Index> comp;
  comp.reserve(static_cast<std::size_t>(m - r1));
  for (Index p = 0; p < m; ++p) {
    if (!in_set[static_cast<std::size_t>(p)]) comp.push_back(p);
  }
  const Index nc = static_cast<Index>(comp.size());
  Index swaps = 0;
  const Index max_swaps = 2 * r1;
  while (nc > 0 && swaps < max_swaps) {
    MatrixXd mss(r1, r1);
    for (Index i = 0; i < r1; ++i) {
      for (Index j = 0; j < r1; ++j) {
        mss(i, j) = a(sel[static_cast<std::size_t>(i)], sel[static_cast<std::size_t>(j)]);
      }
    }
    Eigen::LDLT<MatrixXd> ldlt(mss);
    if (ldlt.info() != Eigen::Success) return out;
    MatrixXd h = ldlt.solve(MatrixXd::Identity(r1, r1));
    if (!h.allFinite()) return out;
    MatrixXd msc(r1, nc);
    for (Index i = 0; i < r1; ++i) {
      for (Index q = 0; q < nc; ++q) {
        msc(i, q) = a(sel[static_cast<std::size_t>(i)], comp[static_cast<std::size_t>(q)]);
      }
    }
    MatrixXd g = h * msc;
    VectorXd schur(nc);
    for (Index q = 0; q < nc; ++q) {
      schur[q] = a(comp[static_cast<std::size_t>(q)], comp[static_cast<std::size_t>(q)]) -
                 msc.col(q).dot(g.col(q));
    }
    Index bp = -1;
    Index bq = -1;
    double best_ratio = 1.0 + opts.swap_tol;
    for (Index p = 0; p < r1; ++p) {
      const double hpp = h(p, p);
      for (Index q = 0; q < nc; ++q) {
        const double ratio = schur[q] * hpp + g(p, q) * g(p, q);
        if (ratio > best_ratio) {
          best_ratio = ratio;
          bp = p;
          bq = q;
        }
      }
    }
    if (bp < 0) break;  // converged: no exchange grows the determinant
    std::swap(sel[static_cast<std::size_t>(bp)], comp[static_cast<std::size_t>(bq)]);
    ++swaps;
  }

  std::vector<Index> global;
  global.reserve(static_cast<std::size_t>(r1));
  for (Index p : sel) global.push_back(cand[static_cast<std::size_t>(p)]);
  std::sort(global.begin(), global.end());
  out.rows = global;
  out.cols = std::move(global);
  out.ok = true;
  return out;
}

// General cross search: greedy full-pivot growth on a candidate block, then
// classical alternating row/column swap sweeps on the coefficient matrix
// B = A(:,J) M(I,J)^{-1}, applying the rank-one exchange update
//   B'_{ij} = B_ij - (B_ip - d_iq)(B_qj - d_jp) / B_qp.
Attempt general_attempt(EntrySource& source, const MaxvolOptions& opts,
                        const std::vector<Index>& order, Index cap, int restart) {
  Attempt out;
  const Index size = source.size();
  const Index r1 = opts.r1;
  const std::uint64_t sr = 1000 + 2 * static_cast<std::uint64_t>(restart);
  const std::uint64_t sc = sr + 1;
  const std::vector<Index> cr = candidate_pool(order, cap, opts.seed, sr, restart);
  const std::vector<Index> cc = candidate_pool(order, cap, opts.seed, sc, restart);
  MatrixXd a = source.block(cr, cc);
  if (!a.allFinite()) return out;
  const Index mr = a.rows();
  const Index mc = a.cols();

  MatrixXd res = a;
  std::vector<char> row_used(static_cast<std::size_t>(mr), 0);
  std::vector<char> col_used(static_cast<std::size_t>(mc), 0);
  std::vector<Index> selr;
  std::vector<Index> selc;
  double first_piv = 0.0;
  for (Index k = 0; k < r1; ++k) {
    Index bi = -1;
    Index bj = -1;
    double bv = 0.0;
    for (Index i = 0; i < mr; ++i) {
      if (row_used[static_cast<std::size_t>(i)]) continue;
      for (Index j = 0; j < mc; ++j) {
        if (col_used[static_cast<std::size_t>(j)]) continue;
        const double v = std::abs(res(i, j));
        if (v > bv) {
          bv = v;
          bi = i;
          bj = j;
        }
      }
    }
    if (bi < 0 || bv <= opts.residual_tol * first_piv || bv == 0.0) break;
    if (k == 0) first_piv = bv;
    row_used[static_cast<std::size_t>(bi)] = 1;
    col_used[static_cast<std::size_t>(bj)] = 1;
    selr.push_back(bi);
    selc.push_back(bj);
    const VectorXd uvec = res.col(bj) / res(bi, bj);
    const Eigen::RowVectorXd vvec = res.row(bi);
    res.noalias() -= uvec * vvec;
  }

  if (static_cast<Index>(selr.size()) < r1) {
    std::vector<Index> grows;
    std::vector<Index> gcols;
    for (Index i : selr) grows.push_back(cr[static_cast<std::size_t>(i)]);
    for (Index j : selc) gcols.push_back(cc[static_cast<std::size_t>(j)]);
    out.rows = complete_with_smallest(std::move(grows), r1, size);
    out.cols = complete_with_smallest(std::move(gcols), r1, size);
    out.ok = true;
    return out;
  }

  Index swaps = 0;
  const Index max_swaps = 2 * r1;
  for (int it = 0; it < opts.n_iter && swaps < max_swaps; ++it) {
    bool changed = false;

    MatrixXd cross(r1, r1);
    for (Index i = 0; i < r1; ++i) {
      for (Index j = 0; j < r1; ++j) {
        cross(i, j) = a(selr[static_cast<std::size_t>(i)], selc[static_cast<std::size_t>(j)]);
      }
    }
    Eigen::FullPivLU<MatrixXd> lu(cross);
    if (lu.rank() < r1) return out;
    MatrixXd inv = lu.inverse();
    if (!inv.allFinite()) return out;

    // Row sweep: candidate row q replaces pivot row p when |B(q,p)| > 1.
    {
      MatrixXd acj(mr, r1);
      for (Index j = 0; j < r1; ++j) acj.col(j) = a.col(selc[static_cast<std::size_t>(j)]);
      MatrixXd b = acj * inv;
      while (swaps < max_swaps) {
        Index bq = -1;
        Index bp = -1;
        double bv = 1.0 + opts.swap_tol;
        for (Index i = 0; i < mr; ++i) {
          if (row_used[static_cast<std::size_t>(i)]) continue;
          for (Index p = 0; p < r1; ++p) {
            const double v = std::abs(b(i, p));
            if (v > bv) {
              bv = v;
              bq = i;
              bp = p;
            }
          }
        }
        if (bq < 0) break;
        const double piv = b(bq, bp);
        VectorXd colp = b.col(bp);
        colp[bq] -= 1.0;
        Eigen::RowVectorXd rowq = b.row(bq);
        rowq[bp] -= 1.0;
        b.noalias() -= colp * (rowq / piv);
        row_used[static_cast<std::size_t>(selr[static_cast<std::size_t>(bp)])] = 0;
        row_used[static_cast<std::size_t>(bq)] = 1;
        selr[static_cast<std::size_t>(bp)] = bq;
        ++swaps;
        changed = true;
      }
    }

    // Column sweep on the refreshed cross.
    {
      for (Index i = 0; i < r1; ++i) {
        for (Index j = 0; j < r1; ++j) {
          cross(i, j) = a(selr[static_cast<std::size_t>(i)], selc[static_cast<std::size_t>(j)]);
        }
      }
      Eigen::FullPivLU<MatrixXd> lu2(cross);
      if (lu2.rank() < r1) return out;
      MatrixXd inv2 = lu2.inverse();
      if (!inv2.allFinite()) return out;
      MatrixXd aic(r1, mc);
      for (Index i = 0; i < r1; ++i) aic.row(i) = a.row(selr[static_cast<std::size_t>(i)]);
      MatrixXd c = inv2 * aic;
      while (swaps < max_swaps) {
        Index bj = -1;
        Index bp = -1;
        double bv = 1.0 + opts.swap_tol;
        for (Index j = 0; j < mc; ++j) {
          if (col_used[static_cast<std::size_t>(j)]) continue;
          for (Index p = 0; p < r1; ++p) {
            const double v = std::abs(c(p, j));
            if (v > bv) {
              bv = v;
              bp = p;
              bj = j;
            }
          }
        }
        if (bj < 0) break;
        const double piv = c(bp, bj);
        VectorXd colj = c.col(bj);
        colj[bp] -= 1.0;
        Eigen::RowVectorXd rowp = c.row(bp);
        rowp[bj] -= 1.0;
        c.noalias() -= colj * (rowp / piv);
        col_used[static_cast<std::size_t>(selc[static_cast<std::size_t>(bp)])] = 0;
        col_used[static_cast<std::size_t>(bj)] = 1;
        selc[static_cast<std::size_t>(bp)] = bj;
        ++swaps;
        changed = true;
      }
    }

    if (!changed) break;
  }

  for (Index i : selr) out.rows.push_back(cr[static_cast<std::size_t>(i)]);
  for (Index j : selc) out.cols.push_back(cc[static_cast<std::size_t>(j)]);
  std::sort(out.rows.begin(), out.rows.end());
  std::sort(out.cols.begin(), out.cols.end());
  out.ok = true;
  return out;
}

}  // namespace

MaxvolResult maxvol_cross(EntrySource& source, const MaxvolOptions& opts) {
  const Index size = source.size();
  if (opts.r1 <= 0) throw ConfigError("maxvol: pivot count must be positive");
  if (opts.r1 > size) throw ConfigError("maxvol: pivot count exceeds matrix size");

  MaxvolResult result;
  if (opts.r1 == size) {
    result.rows.resize(static_cast<std::size_t>(size));
    std::iota(result.rows.begin(), result.rows.end(), Index{0});
    result.cols = result.rows;
    return result;
  }

  Index cap = opts.candidate_cap > 0 ? opts.candidate_cap
                                     : std::max<Index>(512, 4 * opts.r1);
  cap = std::min(cap, size);
  cap = std::max(cap, opts.r1);

  const VectorXd diag = source.diagonal();
  if (!diag.allFinite()) throw DegeneracyError("maxvol: diagonal is not finite");
  const std::vector<Index> order = order_by_magnitude(diag);

  for (int restart = 0; restart < 3; ++restart) {
    Attempt att = opts.psd ? psd_attempt(source, opts, order, cap, restart)
                           : general_attempt(source, opts, order, cap, restart);
    if (att.ok) {
      result.rows = std::move(att.rows);
      result.cols = std::move(att.cols);
      return result;
    }
  }
  throw DegeneracyError("maxvol: cross block stayed singular through 3 restarts");
}

MatrixXd core_pinv(const MatrixXd& cross, double rel_cutoff) {
  if (cross.rows() != cross.cols()) throw ConfigError("core_pinv: block must be square");
  Eigen::BDCSVD<MatrixXd> svd(cross, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd& sv = svd.singularValues();
  if (sv.size() == 0 || !(sv[0] > 0.0)) {
    throw DegeneracyError("core_pinv: block has no nonzero singular value");
  }
  const double cut = rel_cutoff * sv[0];
  VectorXd inv = VectorXd::Zero(sv.size());
  for (Index k = 0; k < sv.size(); ++k) {
    if (sv[k] >= cut && sv[k] > 0.0) inv[k] = 1.0 / sv[k];
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

}  // namespace tmm
