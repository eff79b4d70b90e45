#pragma once

#include <unordered_map>
#include <vector>

#include "tmm/estimator.hpp"

namespace tmm {

// On-demand access to entries of an estimated operator without ever holding
// the full (dn)^2 x (dn)^2 matrix. All implementations are deterministic
// functions of their inputs.
class EntrySource {
 public:
  virtual ~EntrySource() = default;
  virtual Index size() const = 0;
  virtual double entry(Index i, Index j) = 0;
  virtual VectorXd column(Index j) = 0;
  virtual VectorXd diagonal() = 0;
  virtual MatrixXd block(const std::vector<Index>& rows,
                         const std::vector<Index>& cols) = 0;
};

class DenseEntrySource final : public EntrySource {
 public:
  explicit DenseEntrySource(MatrixXd m) : m_(std::move(m)) {}
  Index size() const override { return m_.cols(); }
  double entry(Index i, Index j) override { return m_(i, j); }
  VectorXd column(Index j) override { return m_.col(j); }
  VectorXd diagonal() override { return m_.diagonal(); }
  MatrixXd block(const std::vector<Index>& rows,
                 const std::vector<Index>& cols) override;

 private:
  MatrixXd m_;
};

// Symmetrized shared-sample estimator (D + D^T)/2 of the transition moment
// matrix. The raw estimator factorizes over sources as D = scale * Phi^T S,
// where Phi(i,j) = psi_j(x_i) and S(i,j) = sum_l psi_j(y_il); blocks therefore
// cost O(N_src) per entry, and only full columns touch every endpoint.
class PoolEntrySource final : public EntrySource {
 public:
  PoolEntrySource(const FactorTables& tables, const ClusterIndexer& indexer);
  Index size() const override { return indexer_.size(); }
  double entry(Index i, Index j) override;
  VectorXd column(Index j) override;
  VectorXd diagonal() override;
  MatrixXd block(const std::vector<Index>& rows,
                 const std::vector<Index>& cols) override;

 private:
  const VectorXd& phi_col(Index j);   // psi_j at sources, masked
  const VectorXd& esum_col(Index j);  // per-source endpoint sums of psi_j

  const FactorTables& tables_;
  const ClusterIndexer& indexer_;
  std::unordered_map<Index, VectorXd> phi_cache_;
  std::unordered_map<Index, VectorXd> esum_cache_;
};

// Same access pattern for the time-difference operator of the committor
// pipeline: the symmetrized estimate of M^0 - M^{t up to absorption} from a
// single stopped pool, via per-source difference weights
// N_traj * psi_j(x_i) * 1{x_i outside} - sum over unabsorbed replicas psi_j(y).
class DiffEntrySource final : public EntrySource {
 public:
  DiffEntrySource(const FactorTables& tables, const ClusterIndexer& indexer);
  Index size() const override { return indexer_.size(); }
  double entry(Index i, Index j) override;
  VectorXd column(Index j) override;
  VectorXd diagonal() override;
  MatrixXd block(const std::vector<Index>& rows,
                 const std::vector<Index>& cols) override;

 private:
  const VectorXd& phi_col(Index j);
  const VectorXd& dsum_col(Index j);  // difference weights per source

  const FactorTables& tables_;
  const ClusterIndexer& indexer_;
  std::unordered_map<Index, VectorXd> phi_cache_;
  std::unordered_map<Index, VectorXd> dsum_cache_;
};

// Full dense assembly for moderate (dn)^2, via the source factorization; used
// by the spectrum pipeline and small-scale oracles.
MatrixXd assemble_dense(const FactorTables& tables, const ClusterIndexer& indexer);
MatrixXd assemble_dense_diff(const FactorTables& tables, const ClusterIndexer& indexer);

}  // namespace tmm
