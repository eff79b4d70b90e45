#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "tmm/basis.hpp"
#include "tmm/coperator.hpp"
#include "tmm/estimator.hpp"
#include "tmm/gl_model.hpp"
#include "tmm/gram.hpp"
#include "tmm/langevin.hpp"
#include "tmm/pool.hpp"

namespace tmm {

using PointFunction = std::function<double(const VectorXd&)>;

// Monte-Carlo projection of an observable onto the two-cluster family:
// w_j = (1/N_src) sum_i g(x_i) psi_j(x_i) over the pool sources, then
// c = (M^0)^dagger w through the analytic Gram pseudoinverse.
VectorXd project_function(const PointFunction& g, const SamplePool& pool,
                          const SiteBasis& basis, const GramOperator& gram);

// sum_j c_j psi_j(x), evaluated as a quadratic form in the dn factor values.
double evaluate_expansion(const VectorXd& c, const SiteBasis& basis,
                          const ClusterIndexer& ix, const VectorXd& x);

// n_steps propagation steps of observable coefficients: c <- (M^0)^dagger (M c).
VectorXd predict_moment(const CompressedOperator& op, const GramOperator& gram,
                        VectorXd c, int n_steps);

// Adjoint propagation for density coefficients: c <- (M^0)^dagger (M^T c).
VectorXd predict_density(const CompressedOperator& op, const GramOperator& gram,
                         VectorXd c, int n_steps);

// Marginal of the density mu(x) sum_j c_j psi_j(x) over one or two sites,
// integrated in closed form over all other coordinates: factors on retained
// sites evaluate on the grid, factors elsewhere integrate to their site means
// (a same-site pair off the kept set integrates to its orthonormality
// Kronecker delta).  `sites` holds zero-based site indices; grid column g is
// one evaluation point with grid(k, g) the coordinate of sites[k].
VectorXd marginal_density(const VectorXd& c, const SiteBasis& basis,
                          const MeanFieldMeasure& measure,
                          const std::vector<int>& sites, const MatrixXd& grid);

// Points on a stopping sphere: isotropic Gaussian directions scaled to the
// ball radius, then clipped to the simulation box [-box_L, box_L]^d.
MatrixXd sample_sphere_points(const Ball& ball, Index count, double box_L,
                              std::uint64_t seed, std::uint64_t stream);

struct CommittorOptions {
  Index n_bc = 1000;        // boundary samples per sphere
  Index rank = 0;           // randomized solve rank; 0 = r1 + 128
  Index oversample = 10;
  int powers = 1;
  double rel_cutoff = 1e-8;
  int fro_probes = 8;       // stochastic Frobenius-norm probes for the row weight
  std::uint64_t seed = 0;
};

struct CommittorSolution {
  VectorXd c;               // Galerkin coefficients of the committor expansion
  MatrixXd boundary_a;      // d x n_bc samples on the A sphere
  MatrixXd boundary_b;      // d x n_bc samples on the B sphere
  double residual_a = 0.0;  // max |sum_j c_j psi_j| over boundary_a (target 0)
  double residual_b = 0.0;  // max |sum_j c_j psi_j - 1| over boundary_b
  double row_weight = 0.0;  // boundary row weight |M|_F / sqrt(n_bc)
  double unabsorbed_fraction = 0.0;  // carried over from the rhs estimate
};

// Solve the committor linear system without optimization: stack the
// compressed difference operator (zero-lag Gram minus stopped operator) with
// weighted boundary rows enforcing 0 on the A sphere and 1 on the B sphere,
// and invert through a randomized truncated pseudoinverse.
CommittorSolution solve_committor(const CompressedOperator& diff_op,
                                  const CommittorRhs& rhs, const StopRegions& regions,
                                  const SiteBasis& basis, double box_L,
                                  const CommittorOptions& opts);

// Committor prediction: 0 inside A, 1 inside B, the expansion elsewhere.
double committor_value(const VectorXd& c, const SiteBasis& basis,
                       const ClusterIndexer& ix, const StopRegions& regions,
                       const VectorXd& x);

struct ReferenceStat {
  double value = 0.0;
  double se = 0.0;       // standard error over the replicas used
  Index n_used = 0;
  Index n_excluded = 0;  // committor replicas unabsorbed at the horizon
};

// Brute-force Monte-Carlo moment (P_T g)(x) from n_rep independent
// trajectories; T <= 0 returns g(x) exactly.
ReferenceStat mc_reference_moment(const GLPotential& pot, const VectorXd& x,
                                  const PointFunction& g, double T, Index n_rep,
                                  const SimConfig& cfg, std::uint64_t seed);

// Brute-force committor estimate: fraction of replicas absorbed by B among
// those absorbed within the horizon.  Unabsorbed replicas are excluded with a
// warning; points already inside a region return exactly 0 or 1.
ReferenceStat mc_reference_committor(const GLPotential& pot, const VectorXd& x,
                                     const StopRegions& regions, double horizon,
                                     Index n_rep, const SimConfig& cfg,
                                     std::uint64_t seed);

}  // namespace tmm
