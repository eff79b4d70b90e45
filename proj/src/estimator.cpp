#include "tmm/estimator.hpp"

#include <cmath>

namespace tmm {

FactorTables build_factor_tables(const SamplePool& pool, const SiteBasis& basis) {
  if (basis.d() != pool.d) throw ConfigError("basis dimension does not match pool");
  if (pool.stopped && pool.source_flags.empty())
    throw ConfigError("stopped pool lacks source classification; refresh it first");
  FactorTables tables;
  tables.n_src = pool.n_src;
  tables.n_traj = pool.n_traj;
  const Index dn = static_cast<Index>(basis.d()) * basis.n();
  tables.src.resize(pool.n_src, dn);
  tables.end.resize(pool.n_endpoints(), dn);
  VectorXd u(dn);
  for (Index i = 0; i < pool.n_src; ++i) {
    if (pool.stopped && pool.source_flags[static_cast<std::size_t>(i)] != 0) {
      tables.src.row(i).setZero();
      continue;
    }
    fill_factor_values(basis, pool.sources.col(i), u);
    tables.src.row(i) = u.transpose();
  }
  for (Index c = 0; c < pool.n_endpoints(); ++c) {
    if (pool.stopped && pool.flags[static_cast<std::size_t>(c)] != 0) {
      tables.end.row(c).setZero();
      continue;
    }
    fill_factor_values(basis, pool.endpoints.col(c), u);
    tables.end.row(c) = u.transpose();
  }
  return tables;
}

VectorXd scatter_pairs(const MatrixXd& pairs, const ClusterIndexer& indexer) {
  VectorXd v(indexer.size());
  for (Index j = 0; j < indexer.size(); ++j) v[j] = pairs(indexer.p1(j), indexer.p2(j));
  return v;
}

EntryEstimate estimate_entry(const FactorTables& tables, const ClusterIndexer& indexer,
                             Index j1, Index j2) {
  const Index a1 = indexer.p1(j1), a2 = indexer.p2(j1);
  const Index b1 = indexer.p1(j2), b2 = indexer.p2(j2);
  double mean = 0.0, m2 = 0.0;
  for (Index i = 0; i < tables.n_src; ++i) {
    double e = 0.0;
    for (Index l = 0; l < tables.n_traj; ++l) {
      Index c = i * tables.n_traj + l;
      e += tables.end(c, b1) * tables.end(c, b2);
    }
    double z = tables.src(i, a1) * tables.src(i, a2) * e / static_cast<double>(tables.n_traj);
    double delta = z - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (z - mean);
  }
  EntryEstimate est;
  est.value = mean;
  if (tables.n_src > 1)
    est.se = std::sqrt(m2 / static_cast<double>(tables.n_src - 1) /
                       static_cast<double>(tables.n_src));
  return est;
}

FirstMoments estimate_first_moments(const FactorTables& tables,
                                    const ClusterIndexer& indexer) {
  FirstMoments m;
  m.phi_src = tables.src.colwise().mean().transpose();
  m.phi_end = tables.end.colwise().mean().transpose();
  MatrixXd ss = tables.src.transpose() * tables.src / static_cast<double>(tables.n_src);
  MatrixXd ee = tables.end.transpose() * tables.end / static_cast<double>(tables.n_end());
  m.psi_src = scatter_pairs(ss, indexer);
  m.psi_end = scatter_pairs(ee, indexer);
  return m;
}

CommittorRhs estimate_committor_rhs(const SamplePool& pool, const FactorTables& tables,
                                    const ClusterIndexer& indexer) {
  if (!pool.stopped) throw ConfigError("committor right-hand side needs a stopped pool");
  if (pool.eventual.empty())
    throw ConfigError("pool lacks eventual-absorption flags (not serialized; rebuild)");
  VectorXd w(pool.n_src);
  Index interior_traj = 0, unabsorbed = 0;
  for (Index i = 0; i < pool.n_src; ++i) {
    double nb = 0.0;
    bool interior = pool.source_flags[static_cast<std::size_t>(i)] == 0;
    for (Index l = 0; l < pool.n_traj; ++l) {
      auto ev = pool.eventual[static_cast<std::size_t>(i * pool.n_traj + l)];
      if (ev == 2) nb += 1.0;
      if (interior) {
        ++interior_traj;
        if (ev == 0) ++unabsorbed;
      }
    }
    w[i] = nb;
  }
  // Masked source rows already exclude boundary-region sources.
  MatrixXd weighted = tables.src.transpose() * w.asDiagonal() * tables.src;
  CommittorRhs rhs;
  rhs.f = scatter_pairs(weighted, indexer) * tables.scale();
  rhs.unabsorbed_fraction =
      interior_traj > 0 ? static_cast<double>(unabsorbed) / interior_traj : 0.0;
  return rhs;
}

}  // namespace tmm
