#include "tmm/gram.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

namespace tmm {
namespace {

// Per-site expansion tensor E3(a,b,c) = <phi_a phi_b chi_c> and the worst
// closure residual max_ab | <(phi_a phi_b)^2> - sum_c E3(a,b,c)^2 |.
struct SiteExpansion {
  MatrixXd e3;      // (n*n) x m, row index a*n+b (0-based orders)
  double residual = 0.0;
};

SiteExpansion expand_site(const UnivariateBasisFamily& family,
                          const UnivariateBasisFamily& extended,
                          const MeanFieldMeasure& measure, int site) {
  const int n = family.n();
  const int m = extended.n();
  const Quadrature& quad = measure.quad();
  const Index nq = quad.x.size();
  const VectorXd& dens = measure.quad_density(site);

  MatrixXd p(n, nq);
  MatrixXd x(m, nq);
  std::vector<double> buf(static_cast<std::size_t>(std::max(n, m)));
  for (Index q = 0; q < nq; ++q) {
    family.fill(site, quad.x[q], buf.data());
    for (int b = 0; b < n; ++b) p(b, q) = buf[static_cast<std::size_t>(b)];
    extended.fill(site, quad.x[q], buf.data());
    for (int c = 0; c < m; ++c) x(c, q) = buf[static_cast<std::size_t>(c)];
  }
  VectorXd wq(nq);
  for (Index q = 0; q < nq; ++q) wq[q] = quad.w[q] * dens[q];

  SiteExpansion out;
  out.e3.resize(static_cast<Index>(n) * n, m);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      VectorXd prod(nq);
      for (Index q = 0; q < nq; ++q) prod[q] = p(a, q) * p(b, q);
      double sq = 0.0;
      for (Index q = 0; q < nq; ++q) sq += wq[q] * prod[q] * prod[q];
      double sum_c2 = 0.0;
      for (int c = 0; c < m; ++c) {
        double e = 0.0;
        for (Index q = 0; q < nq; ++q) e += wq[q] * prod[q] * x(c, q);
        out.e3(static_cast<Index>(a) * n + b, c) = e;
        sum_c2 += e * e;
      }
      out.residual = std::max(out.residual, std::abs(sq - sum_c2));
    }
  }
  return out;
}

}  // namespace

GramOperator::GramOperator(const UnivariateBasisFamily& family,
                           const MeanFieldMeasure& measure,
                           const ClusterIndexer& indexer, double rel_cutoff) {
  d_ = indexer.d();
  n_ = indexer.n();
  size_ = indexer.size();
  if (family.d() != d_ || family.n() != n_) {
    throw ConfigError("gram: basis and indexer disagree on (d, n)");
  }

  // Find an extended order whose span closes the same-site products.
  std::vector<SiteExpansion> sites;
  bool closed = false;
  for (int m = 2 * n_ - 1; m <= 2 * n_ + 3; m += 2) {
    UnivariateBasisFamily extended(family.kind(), m, measure);
    sites.clear();
    sites.reserve(static_cast<std::size_t>(d_));
    double worst = 0.0;
    for (int s = 0; s < d_; ++s) {
      sites.push_back(expand_site(family, extended, measure, s));
      worst = std::max(worst, sites.back().residual);
    }
    if (worst <= 1e-8) {
      m_ = m;
      closed = true;
      break;
    }
  }
  if (!closed) {
    throw ConfigError(
        "gram: same-site basis products do not close in an extended family; "
        "the factored Gram is unavailable for this basis kind");
  }

  arrow_size_ = 1 + static_cast<Index>(d_) * (m_ - 1);
  const Index pairs = static_cast<Index>(d_) * (d_ - 1) / 2;
  const Index per_pair = static_cast<Index>(n_ - 1) * (n_ - 1);
  e_total_ = arrow_size_ + pairs * per_pair;

  const auto single_coord = [&](int site, int order) {
    // order is 1-based in [2, m]
    return 1 + static_cast<Index>(site) * (m_ - 1) + (order - 2);
  };
  const auto cross_coord = [&](int s_lo, int b_lo, int s_hi, int b_hi) {
    // sites 0-based with s_lo < s_hi, orders 1-based in [2, n]
    const Index rank = static_cast<Index>(s_lo) * d_ -
                       static_cast<Index>(s_lo) * (s_lo + 1) / 2 +
                       (s_hi - s_lo - 1);
    return arrow_size_ + rank * per_pair +
           static_cast<Index>(b_lo - 2) * (n_ - 1) + (b_hi - 2);
  };

  columns_.resize(static_cast<std::size_t>(size_));
  for (Index j = 0; j < size_; ++j) {
    const auto c = indexer.to_cluster(j);
    auto& col = columns_[static_cast<std::size_t>(j)];
    if (c.s1 != c.s2) {
      if (c.b1 == 1 && c.b2 == 1) {
        col.push_back({0, 1.0});
      } else if (c.b1 == 1) {
        col.push_back({single_coord(c.s2 - 1, c.b2), 1.0});
      } else if (c.b2 == 1) {
        col.push_back({single_coord(c.s1 - 1, c.b1), 1.0});
      } else if (c.s1 < c.s2) {
        col.push_back({cross_coord(c.s1 - 1, c.b1, c.s2 - 1, c.b2), 1.0});
      } else {
        col.push_back({cross_coord(c.s2 - 1, c.b2, c.s1 - 1, c.b1), 1.0});
      }
    } else {
      const int site = c.s1 - 1;
      const SiteExpansion& se = sites[static_cast<std::size_t>(site)];
      const Index row = static_cast<Index>(c.b1 - 1) * n_ + (c.b2 - 1);
      for (int cc = 1; cc <= m_; ++cc) {
        const double coef = se.e3(row, cc - 1);
        if (std::abs(coef) <= 1e-13) continue;
        col.push_back({cc == 1 ? Index{0} : single_coord(site, cc), coef});
      }
    }
  }

  // Dense arrow block of B B^T (cross coordinates contribute exactly 2 I).
  MatrixXd arrow = MatrixXd::Zero(arrow_size_, arrow_size_);
  for (const auto& col : columns_) {
    for (const auto& ea : col) {
      if (ea.coord >= arrow_size_) continue;
      for (const auto& eb : col) {
        if (eb.coord >= arrow_size_) continue;
        arrow(ea.coord, eb.coord) += ea.coef * eb.coef;
      }
    }
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(arrow);
  if (es.info() != Eigen::Success) {
    throw DegeneracyError("gram: arrow block eigendecomposition failed");
  }
  const VectorXd& ev = es.eigenvalues();
  const double cut = rel_cutoff * std::max(ev.cwiseAbs().maxCoeff(), 0.0);
  VectorXd inv_sq = VectorXd::Zero(arrow_size_);
  for (Index k = 0; k < arrow_size_; ++k) {
    if (ev[k] > cut) inv_sq[k] = 1.0 / (ev[k] * ev[k]);
  }
  arrow_pinv_sq_ = es.eigenvectors() * inv_sq.asDiagonal() *
                   es.eigenvectors().transpose();
}

VectorXd GramOperator::b_apply(const VectorXd& w) const {
  VectorXd y = VectorXd::Zero(e_total_);
  for (Index j = 0; j < size_; ++j) {
    const double wj = w[j];
    if (wj == 0.0) continue;
    for (const auto& e : columns_[static_cast<std::size_t>(j)]) {
      y[e.coord] += e.coef * wj;
    }
  }
  return y;
}

VectorXd GramOperator::b_apply_transpose(const VectorXd& y) const {
  VectorXd out(size_);
  for (Index j = 0; j < size_; ++j) {
    double acc = 0.0;
    for (const auto& e : columns_[static_cast<std::size_t>(j)]) {
      acc += e.coef * y[e.coord];
    }
    out[j] = acc;
  }
  return out;
}

VectorXd GramOperator::multiply(const VectorXd& w) const {
  if (w.size() != size_) throw ConfigError("gram: vector length mismatch");
  return b_apply_transpose(b_apply(w));
}

VectorXd GramOperator::apply_pinv(const VectorXd& w, double* residual_out) const {
  if (w.size() != size_) throw ConfigError("gram: vector length mismatch");
  VectorXd y = b_apply(w);
  VectorXd z(e_total_);
  z.head(arrow_size_).noalias() = arrow_pinv_sq_ * y.head(arrow_size_);
  z.tail(e_total_ - arrow_size_) = y.tail(e_total_ - arrow_size_) / 4.0;
  VectorXd c = b_apply_transpose(z);

  const double wn = w.norm();
  const double rel = wn > 0.0 ? (multiply(c) - w).norm() / wn : 0.0;
  if (residual_out != nullptr) *residual_out = rel;
  if (rel > 1e-6) {
    std::fprintf(stderr,
                 "[gram] warning: right-hand side leaves the Gram range "
                 "(relative residual %.3e)\n",
                 rel);
  }
  return c;
}

MatrixXd GramOperator::dense() const {
  if (size_ > 4096) throw ConfigError("gram: dense form guarded to (dn)^2 <= 4096");
  MatrixXd b = MatrixXd::Zero(e_total_, size_);
  for (Index j = 0; j < size_; ++j) {
    for (const auto& e : columns_[static_cast<std::size_t>(j)]) {
      b(e.coord, j) += e.coef;
    }
  }
  return b.transpose() * b;
}

}  // namespace tmm
