#include "tmm/entry_source.hpp"

#include <algorithm>
#include <functional>

namespace tmm {

MatrixXd DenseEntrySource::block(const std::vector<Index>& rows,
                                 const std::vector<Index>& cols) {
  MatrixXd out(rows.size(), cols.size());
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t b = 0; b < cols.size(); ++b) out(a, b) = m_(rows[a], cols[b]);
  return out;
}

namespace {

VectorXd product_column(const MatrixXd& table, const ClusterIndexer& ix, Index j) {
  return table.col(ix.p1(j)).cwiseProduct(table.col(ix.p2(j)));
}

VectorXd segment_sums(const VectorXd& per_endpoint, Index n_src, Index n_traj) {
  VectorXd out(n_src);
  for (Index i = 0; i < n_src; ++i)
    out[i] = per_endpoint.segment(i * n_traj, n_traj).sum();
  return out;
}

// sum over endpoints of psi_j(x_src) psi_j(y) for every j, i.e. the diagonal
// of Phi^T S, assembled chunk-wise as a (dn) x (dn) Gram of mixed products.
MatrixXd mixed_product_gram(const FactorTables& t) {
  const Index dn = t.src.cols();
  MatrixXd gram = MatrixXd::Zero(dn, dn);
  const Index chunk = 8192;
  MatrixXd z;
  for (Index start = 0; start < t.n_end(); start += chunk) {
    Index len = std::min(chunk, t.n_end() - start);
    z.resize(len, dn);
    for (Index r = 0; r < len; ++r) {
      Index il = start + r;
      z.row(r) = t.src.row(il / t.n_traj).cwiseProduct(t.end.row(il));
    }
    gram.noalias() += z.transpose() * z;
  }
  return gram;
}

MatrixXd gather(const std::vector<Index>& idx,
                const std::function<const VectorXd&(Index)>& col, Index rows) {
  MatrixXd out(rows, idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Index>(k)) = col(idx[k]);
  return out;
}

}  // namespace

PoolEntrySource::PoolEntrySource(const FactorTables& tables,
                                 const ClusterIndexer& indexer)
    : tables_(tables), indexer_(indexer) {}

const VectorXd& PoolEntrySource::phi_col(Index j) {
  auto it = phi_cache_.find(j);
  if (it == phi_cache_.end())
    it = phi_cache_.emplace(j, product_column(tables_.src, indexer_, j)).first;
  return it->second;
}

const VectorXd& PoolEntrySource::esum_col(Index j) {
  auto it = esum_cache_.find(j);
  if (it == esum_cache_.end()) {
    VectorXd per_end = product_column(tables_.end, indexer_, j);
    it = esum_cache_.emplace(j, segment_sums(per_end, tables_.n_src, tables_.n_traj)).first;
  }
  return it->second;
}

double PoolEntrySource::entry(Index i, Index j) {
  double dij = phi_col(i).dot(esum_col(j));
  double dji = phi_col(j).dot(esum_col(i));
  return 0.5 * tables_.scale() * (dij + dji);
}

VectorXd PoolEntrySource::column(Index j) {
  const VectorXd& esum = esum_col(j);
  MatrixXd cols = tables_.src.transpose() * esum.asDiagonal() * tables_.src;
  VectorXd wrep(tables_.n_end());
  const VectorXd& phi = phi_col(j);
  for (Index c = 0; c < tables_.n_end(); ++c) wrep[c] = phi[c / tables_.n_traj];
  MatrixXd rows = tables_.end.transpose() * wrep.asDiagonal() * tables_.end;
  return 0.5 * tables_.scale() *
         (scatter_pairs(cols, indexer_) + scatter_pairs(rows, indexer_));
}

VectorXd PoolEntrySource::diagonal() {
  return scatter_pairs(mixed_product_gram(tables_), indexer_) * tables_.scale();
}

MatrixXd PoolEntrySource::block(const std::vector<Index>& rows,
                                const std::vector<Index>& cols) {
  auto phi = [this](Index j) -> const VectorXd& { return phi_col(j); };
  auto esm = [this](Index j) -> const VectorXd& { return esum_col(j); };
  MatrixXd phi_r = gather(rows, phi, tables_.n_src);
  MatrixXd phi_c = gather(cols, phi, tables_.n_src);
  MatrixXd es_r = gather(rows, esm, tables_.n_src);
  MatrixXd es_c = gather(cols, esm, tables_.n_src);
  MatrixXd d_rc = phi_r.transpose() * es_c;
  MatrixXd d_cr = phi_c.transpose() * es_r;
  return 0.5 * tables_.scale() * (d_rc + d_cr.transpose());
}

DiffEntrySource::DiffEntrySource(const FactorTables& tables,
                                 const ClusterIndexer& indexer)
    : tables_(tables), indexer_(indexer) {}

const VectorXd& DiffEntrySource::phi_col(Index j) {
  auto it = phi_cache_.find(j);
  if (it == phi_cache_.end())
    it = phi_cache_.emplace(j, product_column(tables_.src, indexer_, j)).first;
  return it->second;
}

const VectorXd& DiffEntrySource::dsum_col(Index j) {
  auto it = dsum_cache_.find(j);
  if (it == dsum_cache_.end()) {
    VectorXd per_end = product_column(tables_.end, indexer_, j);
    VectorXd diff = static_cast<double>(tables_.n_traj) * phi_col(j) -
                    segment_sums(per_end, tables_.n_src, tables_.n_traj);
    it = dsum_cache_.emplace(j, std::move(diff)).first;
  }
  return it->second;
}

double DiffEntrySource::entry(Index i, Index j) {
  double dij = phi_col(i).dot(dsum_col(j));
  double dji = phi_col(j).dot(dsum_col(i));
  return 0.5 * tables_.scale() * (dij + dji);
}

VectorXd DiffEntrySource::column(Index j) {
  const VectorXd& dsum = dsum_col(j);
  MatrixXd cols = tables_.src.transpose() * dsum.asDiagonal() * tables_.src;
  // Transposed part: N_traj-weighted source gram minus the endpoint gram with
  // the source value of psi_j repeated over replicas.
  const VectorXd& phi = phi_col(j);
  MatrixXd src_part = tables_.src.transpose() * phi.asDiagonal() * tables_.src;
  VectorXd wrep(tables_.n_end());
  for (Index c = 0; c < tables_.n_end(); ++c) wrep[c] = phi[c / tables_.n_traj];
  MatrixXd end_part = tables_.end.transpose() * wrep.asDiagonal() * tables_.end;
  MatrixXd rows = static_cast<double>(tables_.n_traj) * src_part - end_part;
  return 0.5 * tables_.scale() *
         (scatter_pairs(cols, indexer_) + scatter_pairs(rows, indexer_));
}

VectorXd DiffEntrySource::diagonal() {
  MatrixXd sq = tables_.src.cwiseAbs2();
  MatrixXd src_gram = sq.transpose() * sq;  // sum over sources of psi_j(x)^2
  VectorXd same = scatter_pairs(src_gram, indexer_);
  VectorXd mixed = scatter_pairs(mixed_product_gram(tables_), indexer_);
  return tables_.scale() * (static_cast<double>(tables_.n_traj) * same - mixed);
}

MatrixXd DiffEntrySource::block(const std::vector<Index>& rows,
                                const std::vector<Index>& cols) {
  auto phi = [this](Index j) -> const VectorXd& { return phi_col(j); };
  auto dsm = [this](Index j) -> const VectorXd& { return dsum_col(j); };
  MatrixXd phi_r = gather(rows, phi, tables_.n_src);
  MatrixXd phi_c = gather(cols, phi, tables_.n_src);
  MatrixXd ds_r = gather(rows, dsm, tables_.n_src);
  MatrixXd ds_c = gather(cols, dsm, tables_.n_src);
  MatrixXd d_rc = phi_r.transpose() * ds_c;
  MatrixXd d_cr = phi_c.transpose() * ds_r;
  return 0.5 * tables_.scale() * (d_rc + d_cr.transpose());
}

MatrixXd assemble_dense(const FactorTables& tables, const ClusterIndexer& indexer) {
  const Index k = indexer.size();
  MatrixXd phi(tables.n_src, k), esum(tables.n_src, k);
  VectorXd acc(k);
  for (Index i = 0; i < tables.n_src; ++i) {
    for (Index j = 0; j < k; ++j)
      phi(i, j) = tables.src(i, indexer.p1(j)) * tables.src(i, indexer.p2(j));
    acc.setZero();
    for (Index l = 0; l < tables.n_traj; ++l) {
      Index c = i * tables.n_traj + l;
      for (Index j = 0; j < k; ++j)
        acc[j] += tables.end(c, indexer.p1(j)) * tables.end(c, indexer.p2(j));
    }
    esum.row(i) = acc.transpose();
  }
  MatrixXd d = tables.scale() * (phi.transpose() * esum);
  return 0.5 * (d + d.transpose());
}

MatrixXd assemble_dense_diff(const FactorTables& tables, const ClusterIndexer& indexer) {
  const Index k = indexer.size();
  MatrixXd phi(tables.n_src, k), dsum(tables.n_src, k);
  VectorXd acc(k);
  for (Index i = 0; i < tables.n_src; ++i) {
    for (Index j = 0; j < k; ++j)
      phi(i, j) = tables.src(i, indexer.p1(j)) * tables.src(i, indexer.p2(j));
    acc.setZero();
    for (Index l = 0; l < tables.n_traj; ++l) {
      Index c = i * tables.n_traj + l;
      for (Index j = 0; j < k; ++j)
        acc[j] += tables.end(c, indexer.p1(j)) * tables.end(c, indexer.p2(j));
    }
    dsum.row(i) = static_cast<double>(tables.n_traj) * phi.row(i) - acc.transpose();
  }
  MatrixXd d = tables.scale() * (phi.transpose() * dsum);
  return 0.5 * (d + d.transpose());
}

}  // namespace tmm
