#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tmm/basis.hpp"
#include "tmm/pool.hpp"

namespace tmm {

// Reversible nearest-neighbour chain over a finite per-site state set with
// heat-bath rates. Small enough for dense generators, so everything the
// sampling stack only estimates can be computed exactly here.
struct LatticeModel {
  int d = 0;        // sites
  int m = 0;        // states per site
  int kappa = 1;    // interaction range of the rates
  double J = 1.0;   // nearest-neighbour coupling
  double beta = 0.0;
  VectorXd values;  // spin value of each local state, size m
  Index n_states = 0;

  int digit(Index s, int site) const {
    for (int k = 0; k < site; ++k) s /= m;
    return static_cast<int>(s % m);
  }
  Index replace(Index s, int site, int a) const {
    Index stride = 1;
    for (int k = 0; k < site; ++k) stride *= m;
    return s + (a - digit(s, site)) * stride;
  }
  VectorXd point(Index s) const {
    VectorXd x(d);
    for (int k = 0; k < d; ++k) {
      x[k] = values[s % m];
      s /= m;
    }
    return x;
  }
  double energy(Index s) const;
  // H(tau_{site,a} x) - H(x), evaluated from the neighbours only.
  double delta_energy(Index s, int site, int a) const;
  // Heat-bath rate for moving site `site` to local state `a` (any a, incl. rest).
  double rate(Index s, int site, int a) const;
};

LatticeModel make_chain(int d, int m, double J, double beta);

VectorXd stationary_density(const LatticeModel& model);
MatrixXd build_generator(const LatticeModel& model);

// max over (i, alpha, x) of the rate, and max over x of the total rate mass
// (both range over every alpha, the resting one included).
double max_rate(const LatticeModel& model);
double total_rate_bound(const LatticeModel& model);

// Eigendecomposition of the density-symmetrized generator. lambda is the
// ascending spectrum of -L (lambda[0] ~ 0); column k of V is the orthonormal
// eigenvector of the symmetrized matrix, so w_k = V.col(k)/sqrt_rho is the
// rho-orthonormal eigenfunction.
struct SpectralData {
  VectorXd lambda;
  MatrixXd V;
  VectorXd sqrt_rho;

  double gap() const { return lambda.size() > 1 ? lambda[1] : 0.0; }
  VectorXd semigroup(const VectorXd& f, double t) const;
  MatrixXd semigroup(const MatrixXd& F, double t) const;
};
SpectralData eigendecompose(const MatrixXd& gen, const VectorXd& rho);

double lattice_mean(const VectorXd& rho, const VectorXd& f);
double lattice_inner(const VectorXd& rho, const VectorXd& f, const VectorXd& g);

// Dirichlet forms: global from the generator, site-local both directly
// (-<L_i f, g>_rho) and through the half-sum symmetric formula.
double dirichlet_form(const MatrixXd& gen, const VectorXd& rho, const VectorXd& f,
                      const VectorXd& g);
double dirichlet_local(const LatticeModel& model, const VectorXd& rho,
                       const VectorXd& f, const VectorXd& g, int site);
double dirichlet_local_symmetric(const LatticeModel& model, const VectorXd& rho,
                                 const VectorXd& f, const VectorXd& g, int site);

double oscillation(const LatticeModel& model, const VectorXd& f, int site);
double osc_seminorm(const LatticeModel& model, const VectorXd& f);

VectorXd site_marginal(const LatticeModel& model, const VectorXd& rho, int site);

// Per-site polynomial functions {1, x, x^2, ...} orthonormalized under the
// exact site marginals; lets the generic cluster/estimator machinery run on
// lattice samples unchanged.
class LatticeSiteBasis : public SiteBasis {
 public:
  LatticeSiteBasis(const LatticeModel& model, const VectorXd& rho, int n);
  int d() const override { return d_; }
  int n() const override { return n_; }
  void fill(int site, double x, double* out) const override;

 private:
  int d_ = 0;
  int n_ = 0;
  std::vector<MatrixXd> coeff_;  // per site: lower-triangular n x n map from powers
};

// All two-cluster basis functions tabulated on the state space: column j of
// the result is psi_j evaluated at every state.
MatrixXd basis_table(const LatticeModel& model, const SiteBasis& basis,
                     const ClusterIndexer& indexer);

// <psi_i, P_t psi_j>_rho for all pairs, through the spectral representation.
MatrixXd exact_moment_matrix(const SpectralData& spec, const MatrixXd& psi, double t);

// Stopped variants: `absorbed` marks states of the absorbing set (nonzero).
// Terms with either endpoint absorbed are dropped, matching the estimator.
MatrixXd exact_masked_gram(const VectorXd& rho, const MatrixXd& psi,
                           const std::vector<std::uint8_t>& absorbed);
MatrixXd exact_stopped_moment_matrix(const MatrixXd& gen, const VectorXd& rho,
                                     const MatrixXd& psi,
                                     const std::vector<std::uint8_t>& absorbed,
                                     double t);

// Hitting probability of the flag-2 set before the flag-1 set, by dense solve.
VectorXd exact_committor(const MatrixXd& gen, const std::vector<std::uint8_t>& flags);

// Exact event-driven jump chain (resting moves carry no events).
Index gillespie_endpoint(const LatticeModel& model, Index s0, double t,
                         CounterRng& rng);

class LatticeSampler {
 public:
  LatticeSampler(const LatticeModel& model, const VectorXd& rho);
  Index sample(CounterRng& rng) const;

 private:
  std::vector<double> cdf_;
};

// Equilibrium sources + jump-chain endpoints mapped to spin-value vectors, in
// the same pool format the continuous estimator consumes. Trajectory (i,l)
// uses rng stream i*n_traj+l.
SamplePool build_lattice_pool(const LatticeModel& model, const VectorXd& rho,
                              Index n_src, Index n_traj, double t,
                              std::uint64_t seed);

struct InequalityRecord {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;  // rhs - lhs at the worst instance found
  bool pass = false;
};

struct VerificationReport {
  std::vector<InequalityRecord> records;
  double r_max = 0.0;
  double r_bar = 0.0;
  double gap = 0.0;
  double v = 0.0;
  double c0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  std::vector<std::pair<double, double>> correlation_table;  // (distance, value)
  double corr_slope = 0.0;
  double corr_r2 = 0.0;
  std::vector<std::pair<double, VectorXd>> singular_values;  // per lag time
  bool all_pass() const;
};

// Certifies every stated spectral/oscillation inequality on this model with
// the explicit constants, over randomized test functions. Identities pass
// below 1e-10; one-sided bounds allow -1e-12 of arithmetic slack.
VerificationReport verify_inequalities(const LatticeModel& model,
                                       const std::vector<double>& t_grid,
                                       int basis_n, int n_draws, double corr_t,
                                       std::uint64_t seed);

}  // namespace tmm
