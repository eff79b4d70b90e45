#pragma once

#include "tmm/basis.hpp"
#include "tmm/pool.hpp"

namespace tmm {

// Univariate basis values tabulated once per pool: row i of `src` holds the
// (dn) factor values at source i, row i*n_traj+l of `end` those at endpoint
// (i,l). For stopped pools, rows of excluded points (source inside a region /
// endpoint absorbed) are zeroed, which drops exactly those terms from every
// estimator downstream while keeping the 1/(N_src*N_traj) normalization.
struct FactorTables {
  MatrixXd src;
  MatrixXd end;
  Index n_src = 0;
  Index n_traj = 0;

  Index n_end() const { return n_src * n_traj; }
  double scale() const { return 1.0 / (static_cast<double>(n_src) * n_traj); }
};

FactorTables build_factor_tables(const SamplePool& pool, const SiteBasis& basis);

// Scatter a (dn) x (dn) factor-pair matrix into the linear two-cluster order.
VectorXd scatter_pairs(const MatrixXd& pairs, const ClusterIndexer& indexer);

struct EntryEstimate {
  double value = 0.0;
  double se = 0.0;  // standard error over sources (Welford)
};

// (1/(N_src N_traj)) sum_i psi_{j1}(x_i) sum_l psi_{j2}(y_il), O(N) per call.
EntryEstimate estimate_entry(const FactorTables& tables, const ClusterIndexer& indexer,
                             Index j1, Index j2);

// One pass over the pool: first moments of the factor functions and of all
// two-cluster products, at the sources and at the endpoints.
struct FirstMoments {
  VectorXd phi_src;  // <phi_p> over sources, size dn
  VectorXd phi_end;  // <P_t phi_p> over endpoints
  VectorXd psi_src;  // <psi_j> over sources, size (dn)^2
  VectorXd psi_end;  // <P_t psi_j> over endpoints
};

FirstMoments estimate_first_moments(const FactorTables& tables,
                                    const ClusterIndexer& indexer);

struct CommittorRhs {
  VectorXd f;                       // size (dn)^2
  double unabsorbed_fraction = 0.0; // among trajectories from interior sources
};

// f_j = (1/(N_src N_traj)) sum over interior sources of psi_j(x_i) * N_B(i),
// where N_B counts replicas eventually absorbed by the flag-2 region.
CommittorRhs estimate_committor_rhs(const SamplePool& pool, const FactorTables& tables,
                                    const ClusterIndexer& indexer);

}  // namespace tmm
