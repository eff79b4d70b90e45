#include "tmm/basis.hpp"

#include <algorithm>
#include <cmath>

namespace tmm {

// ----------------------------------------------------------------- indexing

ClusterIndexer::ClusterIndexer(int d, int n) : d_(d), n_(n) {
  if (d < 1 || n < 1) throw ConfigError("ClusterIndexer: d and n must be >= 1");
  const Index sz = size();
  p1_.resize(sz);
  p2_.resize(sz);
  for (Index j = 0; j < sz; ++j) {
    const ClusterIndex c = to_cluster(j);
    p1_[j] = static_cast<Index>(c.s1 - 1) * n_ + (c.b1 - 1);
    p2_[j] = static_cast<Index>(c.s2 - 1) * n_ + (c.b2 - 1);
  }
}

void ClusterIndexer::check(const ClusterIndex& c) const {
  if (c.s1 < 1 || c.s1 > d_ || c.s2 < 1 || c.s2 > d_)
    throw ConfigError("cluster index: site out of range");
  if (c.b1 < 1 || c.b1 > n_ || c.b2 < 1 || c.b2 > n_)
    throw ConfigError("cluster index: order out of range");
}

ClusterIndex ClusterIndexer::to_cluster(Index j) const {
  if (j < 0 || j >= size()) throw ConfigError("cluster index: linear position out of range");
  const Index nn = static_cast<Index>(n_) * n_;
  const Index sites = j / nn, orders = j % nn;
  ClusterIndex c;
  c.s1 = static_cast<int>(sites / d_) + 1;
  c.s2 = static_cast<int>(sites % d_) + 1;
  c.b1 = static_cast<int>(orders / n_) + 1;
  c.b2 = static_cast<int>(orders % n_) + 1;
  return c;
}

int ClusterIndexer::site_distance(Index i, Index j) const {
  const int a1 = static_cast<int>(p1_[i] / n_), a2 = static_cast<int>(p2_[i] / n_);
  const int c1 = static_cast<int>(p1_[j] / n_), c2 = static_cast<int>(p2_[j] / n_);
  return std::min(std::min(std::abs(a1 - c1), std::abs(a1 - c2)),
                  std::min(std::abs(a2 - c1), std::abs(a2 - c2)));
}

int ClusterIndexer::diag_span(Index j) const {
  return std::abs(static_cast<int>(p1_[j] / n_) - static_cast<int>(p2_[j] / n_));
}

// ------------------------------------------------------------------ measure

MeanFieldMeasure::MeanFieldMeasure(int d, double L, LogDensity logd, int quad_panels,
                                   int quad_nodes, int cdf_grid)
    : d_(d), L_(L), logd_(std::move(logd)) {
  if (d < 1 || L <= 0.0) throw ConfigError("MeanFieldMeasure: need d >= 1 and L > 0");
  quad_ = composite_gauss_legendre(quad_panels, quad_nodes, -L, L);

  // Detect identical sites so tables are built once.
  shared_sites_ = true;
  for (int q = 0; q < quad_.x.size() && shared_sites_; q += 7)
    for (int s = 1; s < d_; ++s)
      if (logd_(s, quad_.x[q]) != logd_(0, quad_.x[q])) {
        shared_sites_ = false;
        break;
      }
  const int slots = shared_sites_ ? 1 : d_;

  log_norm_.resize(slots);
  quad_density_.resize(slots);
  cdf_.resize(slots);
  cdf_x_ = VectorXd::LinSpaced(cdf_grid, -L, L);
  for (int s = 0; s < slots; ++s) {
    // Subtract the max log-density before exponentiating.
    double mx = -1e300;
    for (int q = 0; q < quad_.x.size(); ++q) mx = std::max(mx, logd_(s, quad_.x[q]));
    VectorXd vals(quad_.x.size());
    double z = 0.0;
    for (int q = 0; q < quad_.x.size(); ++q) {
      vals[q] = std::exp(logd_(s, quad_.x[q]) - mx);
      z += quad_.w[q] * vals[q];
    }
    if (!(z > 0.0) || !std::isfinite(z))
      throw ConfigError("MeanFieldMeasure: site density does not normalize");
    log_norm_[s] = std::log(z) + mx;
    quad_density_[s] = vals / z;

    // Trapezoid CDF on the fine grid for inverse-CDF sampling.
    VectorXd c(cdf_grid);
    c[0] = 0.0;
    double prev = std::exp(logd_(s, cdf_x_[0]) - log_norm_[s]);
    for (int g = 1; g < cdf_grid; ++g) {
      const double cur = std::exp(logd_(s, cdf_x_[g]) - log_norm_[s]);
      c[g] = c[g - 1] + 0.5 * (prev + cur) * (cdf_x_[g] - cdf_x_[g - 1]);
      prev = cur;
    }
    cdf_[s] = c / c[cdf_grid - 1];
  }
}

MeanFieldMeasure MeanFieldMeasure::uniform(int d, double L, int quad_panels,
                                           int quad_nodes) {
  return MeanFieldMeasure(d, L, [](int, double) { return 0.0; }, quad_panels, quad_nodes);
}

MeanFieldMeasure MeanFieldMeasure::quartic_boltzmann(int d, double L, double beta,
                                                     double gamma, int quad_panels,
                                                     int quad_nodes) {
  const double c = beta / (4.0 * gamma);
  return MeanFieldMeasure(
      d, L,
      [c](int, double x) {
        const double q = 1.0 - x * x;
        return -c * q * q;
      },
      quad_panels, quad_nodes);
}

double MeanFieldMeasure::density(int site, double x) const {
  return std::exp(logd_(site_slot(site), x) - log_norm_[site_slot(site)]);
}

double MeanFieldMeasure::sample_site(int site, CounterRng& rng) const {
  const VectorXd& c = cdf_[site_slot(site)];
  const double u = rng.next_uniform();
  // Binary search for the bracketing grid cell, then linear interpolation.
  int lo = 0, hi = static_cast<int>(c.size()) - 1;
  while (hi - lo > 1) {
    const int mid = (lo + hi) / 2;
    (c[mid] <= u ? lo : hi) = mid;
  }
  const double span = c[hi] - c[lo];
  const double t = span > 0.0 ? (u - c[lo]) / span : 0.5;
  return cdf_x_[lo] + t * (cdf_x_[hi] - cdf_x_[lo]);
}

VectorXd MeanFieldMeasure::sample_point(CounterRng& rng) const {
  VectorXd x(d_);
  for (int s = 0; s < d_; ++s) x[s] = sample_site(s, rng);
  return x;
}

// ------------------------------------------------------------------- family

BasisKind basis_kind_from_string(const std::string& s) {
  if (s == "legendre") return BasisKind::Legendre;
  if (s == "fourier") return BasisKind::Fourier;
  if (s == "rbf") return BasisKind::Rbf;
  throw ConfigError("unknown basis kind '" + s + "' (legendre|fourier|rbf)");
}

UnivariateBasisFamily::UnivariateBasisFamily(BasisKind kind, int n,
                                             const MeanFieldMeasure& measure)
    : kind_(kind), d_(measure.d()), n_(n), L_(measure.L()) {
  if (n < 1) throw ConfigError("UnivariateBasisFamily: n must be >= 1");
  const Quadrature& quad = measure.quad();

  // Raw values at all quadrature nodes.
  MatrixXd raw(quad.x.size(), n_);
  std::vector<double> buf(n_);
  for (int q = 0; q < quad.x.size(); ++q) {
    fill_raw(quad.x[q], buf.data());
    for (int b = 0; b < n_; ++b) raw(q, b) = buf[b];
  }

  // One slot if every site's density tables coincide.
  shared_ = true;
  for (int s = 1; s < d_ && shared_; ++s)
    if (measure.quad_density(s) != measure.quad_density(0)) shared_ = false;
  const int slots = shared_ ? 1 : d_;

  T_.resize(slots);
  for (int s = 0; s < slots; ++s) {
    const VectorXd wmu = quad.w.cwiseProduct(measure.quad_density(s));
    const MatrixXd G = raw.transpose() * wmu.asDiagonal() * raw;
    // Manual Cholesky so a degenerate order can be reported precisely.
    const auto chol = [&](const MatrixXd& A) {
      MatrixXd Lc = MatrixXd::Zero(n_, n_);
      for (int i = 0; i < n_; ++i) {
        for (int k = 0; k < i; ++k) {
          double sum = A(i, k);
          for (int m = 0; m < k; ++m) sum -= Lc(i, m) * Lc(k, m);
          Lc(i, k) = sum / Lc(k, k);
        }
        double diag = A(i, i);
        for (int m = 0; m < i; ++m) diag -= Lc(i, m) * Lc(i, m);
        if (!(diag > 1e-13 * std::max(1.0, A(i, i))))
          throw DegeneracyError("basis family degenerate at site " + std::to_string(s + 1) +
                                ", order " + std::to_string(i + 1));
        Lc(i, i) = std::sqrt(diag);
      }
      return Lc;
    };
    // Two factorization passes: one inverse application of the raw Cholesky
    // leaves an O(kappa * eps) Gram residual for near-dependent raw families
    // (wide radial bumps). Re-measure the mapped family's Gram from fresh
    // node values — not as T G T^T, whose rounding is kappa-amplified — and
    // absorb one more triangular correction.
    MatrixXd T = chol(G).triangularView<Eigen::Lower>()
                     .solve(MatrixXd::Identity(n_, n_));
    const MatrixXd vals = raw * T.transpose();
    const MatrixXd G1 = vals.transpose() * wmu.asDiagonal() * vals;
    T_[s] = chol(G1).triangularView<Eigen::Lower>().solve(T);
  }
}

void UnivariateBasisFamily::fill_raw(double x, double* out) const {
  switch (kind_) {
    case BasisKind::Legendre: {
      const double z = x / L_;
      if (n_ >= 1) out[0] = 1.0;
      if (n_ >= 2) out[1] = z;
      for (int k = 2; k < n_; ++k)
        out[k] = ((2.0 * k - 1.0) * z * out[k - 1] - (k - 1.0) * out[k - 2]) / k;
      break;
    }
    case BasisKind::Fourier: {
      out[0] = 1.0;
      const double t = 3.14159265358979323846 * x / L_;
      for (int k = 1; k < n_; ++k) {
        const int m = (k + 1) / 2;
        out[k] = (k % 2 == 1) ? std::sin(m * t) : std::cos(m * t);
      }
      break;
    }
    case BasisKind::Rbf: {
      out[0] = 1.0;
      if (n_ == 1) break;
      const double spacing = 2.0 * L_ / (n_ - 1);
      const double sigma = 2.0 * spacing;
      for (int k = 1; k < n_; ++k) {
        const double c = -L_ + (k - 0.5) * spacing;
        const double z = (x - c) / sigma;
        out[k] = std::exp(-0.5 * z * z);
      }
      break;
    }
  }
}

void UnivariateBasisFamily::fill(int site, double x, double* out) const {
  double raw[64];
  if (n_ > 64) throw ConfigError("UnivariateBasisFamily: n > 64 unsupported");
  fill_raw(x, raw);
  const MatrixXd& T = T_[site_slot(site)];
  for (int b = 0; b < n_; ++b) {
    double acc = 0.0;
    for (int a = 0; a <= b; ++a) acc += T(b, a) * raw[a];
    out[b] = acc;
  }
}

MatrixXd UnivariateBasisFamily::site_gram(int site, const MeanFieldMeasure& measure) const {
  const Quadrature& quad = measure.quad();
  MatrixXd vals(quad.x.size(), n_);
  std::vector<double> buf(n_);
  for (int q = 0; q < quad.x.size(); ++q) {
    fill(site, quad.x[q], buf.data());
    for (int b = 0; b < n_; ++b) vals(q, b) = buf[b];
  }
  const VectorXd wmu = quad.w.cwiseProduct(measure.quad_density(site));
  return vals.transpose() * wmu.asDiagonal() * vals;
}

// --------------------------------------------------------------- evaluation

double eval_cluster(const SiteBasis& basis, const ClusterIndexer& ix, Index j,
                    const VectorXd& x) {
  const ClusterIndex c = ix.to_cluster(j);
  return basis.eval(c.s1 - 1, c.b1, x[c.s1 - 1]) * basis.eval(c.s2 - 1, c.b2, x[c.s2 - 1]);
}

double eval_cluster_masked(const SiteBasis& basis, const ClusterIndexer& ix, Index j,
                           const VectorXd& x, const StopRegions& regions) {
  if (regions.which(x) != 0) return 0.0;
  return eval_cluster(basis, ix, j, x);
}

void fill_factor_values(const SiteBasis& basis, const VectorXd& x, VectorXd& u) {
  const int d = basis.d(), n = basis.n();
  u.resize(static_cast<Index>(d) * n);
  for (int s = 0; s < d; ++s) basis.fill(s, x[s], u.data() + static_cast<Index>(s) * n);
}

}  // namespace tmm
