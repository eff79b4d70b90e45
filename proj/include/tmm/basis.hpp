#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "tmm/quadrature.hpp"
#include "tmm/rng.hpp"
#include "tmm/types.hpp"

namespace tmm {

// ---------------------------------------------------------------------------
// Two-cluster index law.
//
// A cluster function is psi(x) = phi_{b1}^{s1}(x_{s1}) * phi_{b2}^{s2}(x_{s2})
// with 1-based sites s1,s2 in [d] and orders b1,b2 in [n]. Linear positions
// are 0-based in code; the 1-based law is
//   j = ((s1-1)*d + (s2-1))*n^2 + (b1-1)*n + b2,
// i.e. site-pair blocks ordered row-major, order pairs row-major inside.
// Both orderings of a pair are kept (deliberate duplicates), so the map is a
// bijection between [ (d n)^2 ] and the tuple set, not between functions.
// ---------------------------------------------------------------------------

struct ClusterIndex {
  int s1 = 1, s2 = 1, b1 = 1, b2 = 1;  // 1-based
  bool operator==(const ClusterIndex&) const = default;
};

class ClusterIndexer {
 public:
  ClusterIndexer(int d, int n);

  int d() const { return d_; }
  int n() const { return n_; }
  Index dn() const { return static_cast<Index>(d_) * n_; }
  Index size() const { return dn() * dn(); }  // (d n)^2 cluster functions

  Index to_linear(const ClusterIndex& c) const {
    check(c);
    return ((static_cast<Index>(c.s1 - 1) * d_ + (c.s2 - 1)) * n_ + (c.b1 - 1)) * n_ +
           (c.b2 - 1);
  }
  ClusterIndex to_cluster(Index j) const;

  // Composite univariate factor positions p = (s-1)*n + (b-1), 0-based in [dn).
  Index p1(Index j) const { return p1_[j]; }
  Index p2(Index j) const { return p2_[j]; }
  Index from_factors(Index p1, Index p2) const {
    const Index s1 = p1 / n_, b1 = p1 % n_, s2 = p2 / n_, b2 = p2 % n_;
    return ((s1 * d_ + s2) * n_ + b1) * n_ + b2;
  }
  // Index of the duplicate representation with the two factors swapped.
  Index swap_dual(Index j) const { return from_factors(p2_[j], p1_[j]); }
  bool canonical(Index j) const { return p1_[j] <= p2_[j]; }

  // Minimal site distance between the clusters of i and j (min over the four
  // cross pairs); diag_span is |s1 - s2| of one cluster.
  int site_distance(Index i, Index j) const;
  int diag_span(Index j) const;

 private:
  void check(const ClusterIndex& c) const;
  int d_, n_;
  std::vector<Index> p1_, p2_;
};

// ---------------------------------------------------------------------------
// Mean-field (separable) measure: per-site density on [-L, L] given by an
// unnormalized log-density, normalized by quadrature, sampled by inverse CDF.
// ---------------------------------------------------------------------------

class MeanFieldMeasure {
 public:
  using LogDensity = std::function<double(int site, double x)>;

  MeanFieldMeasure(int d, double L, LogDensity logd, int quad_panels = 1,
                   int quad_nodes = 64, int cdf_grid = 8192);

  static MeanFieldMeasure uniform(int d, double L, int quad_panels = 1,
                                  int quad_nodes = 64);
  // Per-site Boltzmann factor of the on-site quartic, exp(-beta (1-x^2)^2/(4 gamma)).
  static MeanFieldMeasure quartic_boltzmann(int d, double L, double beta, double gamma,
                                            int quad_panels = 32, int quad_nodes = 16);

  int d() const { return d_; }
  double L() const { return L_; }
  const Quadrature& quad() const { return quad_; }

  // Normalized site density and its values on the quadrature nodes.
  double density(int site, double x) const;
  const VectorXd& quad_density(int site) const {
    return quad_density_[site_slot(site)];
  }

  // Inverse-CDF draw for one site / a full point. Deterministic in the rng state.
  double sample_site(int site, CounterRng& rng) const;
  VectorXd sample_point(CounterRng& rng) const;

 private:
  int site_slot(int site) const { return shared_sites_ ? 0 : site; }
  int d_;
  double L_;
  LogDensity logd_;
  Quadrature quad_;
  bool shared_sites_;                  // all sites identical -> single table slot
  std::vector<double> log_norm_;       // log Z per slot
  std::vector<VectorXd> quad_density_; // normalized density at quad nodes per slot
  VectorXd cdf_x_;                     // shared CDF grid
  std::vector<VectorXd> cdf_;          // per-slot CDF values on the grid
};

// ---------------------------------------------------------------------------
// Univariate basis families and per-site orthonormalization.
// ---------------------------------------------------------------------------

enum class BasisKind { Legendre, Fourier, Rbf };

BasisKind basis_kind_from_string(const std::string& s);

// Abstract per-site univariate evaluator; the estimator tables only need this.
class SiteBasis {
 public:
  virtual ~SiteBasis() = default;
  virtual int d() const = 0;
  virtual int n() const = 0;
  // Writes phi_1..phi_n at x for `site` (0-based site) into out[0..n).
  virtual void fill(int site, double x, double* out) const = 0;
  double eval(int site, int order_1based, double x) const {
    std::vector<double> buf(n());
    fill(site, x, buf.data());
    return buf[order_1based - 1];
  }
};

// n raw functions per site (first one constant), orthonormalized per site
// against the measure with a lower-triangular Gram-Schmidt / Cholesky map:
// phi_b = sum_{a<=b} T[b][a] raw_a. The measure's quadrature is reused for
// all inner products, so the resulting Gram is the identity by construction
// up to rounding.
class UnivariateBasisFamily : public SiteBasis {
 public:
  UnivariateBasisFamily(BasisKind kind, int n, const MeanFieldMeasure& measure);

  int d() const override { return d_; }
  int n() const override { return n_; }
  BasisKind kind() const { return kind_; }
  double L() const { return L_; }

  void fill(int site, double x, double* out) const override;
  void fill_raw(double x, double* out) const;

  // Lower-triangular orthonormalization coefficients of a site.
  const MatrixXd& coeffs(int site) const { return T_[site_slot(site)]; }

  // Quadrature Gram of the orthonormalized family at a site ( = I up to fp).
  MatrixXd site_gram(int site, const MeanFieldMeasure& measure) const;

 private:
  int site_slot(int site) const { return shared_ ? 0 : site; }
  BasisKind kind_;
  int d_, n_;
  double L_;
  bool shared_;
  std::vector<MatrixXd> T_;
};

// ---------------------------------------------------------------------------
// Cluster evaluation and stopping regions.
// ---------------------------------------------------------------------------

struct Ball {
  VectorXd center;
  double radius = 0.0;
  // Closed-ball membership (boundary counts as inside: stopping semantics).
  bool contains(const VectorXd& x) const {
    return (x - center).squaredNorm() <= radius * radius;
  }
};

struct StopRegions {
  std::vector<Ball> balls;  // committor order: balls[0] = A, balls[1] = B
  bool empty() const { return balls.empty(); }
  // 0 = outside all balls, k = inside balls[k-1] (first hit wins).
  int which(const VectorXd& x) const {
    for (std::size_t k = 0; k < balls.size(); ++k)
      if (balls[k].contains(x)) return static_cast<int>(k) + 1;
    return 0;
  }
};

double eval_cluster(const SiteBasis& basis, const ClusterIndexer& ix, Index j,
                    const VectorXd& x);
// Masked variant: zero whenever x lies in one of the regions' balls.
double eval_cluster_masked(const SiteBasis& basis, const ClusterIndexer& ix, Index j,
                           const VectorXd& x, const StopRegions& regions);

// All dn univariate factor values at a point, u[p] = phi_{b(p)}^{s(p)}(x_s).
void fill_factor_values(const SiteBasis& basis, const VectorXd& x, VectorXd& u);

}  // namespace tmm
