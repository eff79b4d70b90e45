#include "tmm/apps.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "tmm/rng.hpp"
#include "tmm/rsvd.hpp"

namespace tmm {
namespace {

// Coefficient vector reshaped over factor positions: F(p1, p2) = c[j(p1, p2)].
MatrixXd reshape_coefficients(const VectorXd& c, const ClusterIndexer& ix) {
  const Index dn = ix.dn();
  MatrixXd f(dn, dn);
  for (Index p2 = 0; p2 < dn; ++p2)
    for (Index p1 = 0; p1 < dn; ++p1) f(p1, p2) = c[ix.from_factors(p1, p2)];
  return f;
}

}  // namespace

VectorXd project_function(const PointFunction& g, const SamplePool& pool,
                          const SiteBasis& basis, const GramOperator& gram) {
  const ClusterIndexer ix(pool.d, basis.n());
  if (gram.size() != ix.size())
    throw ConfigError("projection: Gram size does not match the pool basis");
  const FactorTables tables = build_factor_tables(pool, basis);
  VectorXd gv(pool.n_src);
  for (Index i = 0; i < pool.n_src; ++i) gv[i] = g(pool.sources.col(i));
  gv /= static_cast<double>(pool.n_src);
  const MatrixXd pairs = tables.src.transpose() * gv.asDiagonal() * tables.src;
  return gram.apply_pinv(scatter_pairs(pairs, ix));
}

double evaluate_expansion(const VectorXd& c, const SiteBasis& basis,
                          const ClusterIndexer& ix, const VectorXd& x) {
  if (c.size() != ix.size())
    throw ConfigError("expansion: coefficient length mismatch");
  VectorXd u;
  fill_factor_values(basis, x, u);
  const MatrixXd f = reshape_coefficients(c, ix);
  return u.dot(f * u);
}

VectorXd predict_moment(const CompressedOperator& op, const GramOperator& gram,
                        VectorXd c, int n_steps) {
  if (c.size() != op.ix.size() || gram.size() != op.ix.size())
    throw ConfigError("prediction: coefficient length mismatch");
  for (int s = 0; s < n_steps; ++s) c = gram.apply_pinv(matvec(op, c));
  return c;
}

VectorXd predict_density(const CompressedOperator& op, const GramOperator& gram,
                         VectorXd c, int n_steps) {
  if (c.size() != op.ix.size() || gram.size() != op.ix.size())
    throw ConfigError("prediction: coefficient length mismatch");
  for (int s = 0; s < n_steps; ++s) c = gram.apply_pinv(matvec_adjoint(op, c));
  return c;
}

VectorXd marginal_density(const VectorXd& c, const SiteBasis& basis,
                          const MeanFieldMeasure& measure,
                          const std::vector<int>& sites, const MatrixXd& grid) {
  const int d = basis.d(), n = basis.n();
  const ClusterIndexer ix(d, n);
  if (c.size() != ix.size())
    throw ConfigError("marginal: coefficient length mismatch");
  if (sites.empty() || sites.size() > 2)
    throw ConfigError("marginal: one or two sites supported");
  for (int s : sites)
    if (s < 0 || s >= d) throw ConfigError("marginal: site out of range");
  if (sites.size() == 2 && sites[0] == sites[1])
    throw ConfigError("marginal: kept sites must differ");
  if (grid.rows() != static_cast<Index>(sites.size()))
    throw ConfigError("marginal: grid rows must match the kept sites");

  // Site means <phi_b>_mu by quadrature; the Kronecker delta_{b1} whenever the
  // first family member is the constant.
  const Quadrature& q = measure.quad();
  MatrixXd means = MatrixXd::Zero(d, n);
  VectorXd vals(n);
  for (int s = 0; s < d; ++s) {
    const VectorXd& dens = measure.quad_density(s);
    for (Index k = 0; k < q.x.size(); ++k) {
      basis.fill(s, q.x[k], vals.data());
      means.row(s) += q.w[k] * dens[k] * vals.transpose();
    }
  }

  const MatrixXd f = reshape_coefficients(c, ix);
  const Index dn = ix.dn();
  const auto slot_of = [&](int s) -> int {
    for (std::size_t k = 0; k < sites.size(); ++k)
      if (sites[k] == s) return static_cast<int>(k);
    return -1;
  };

  VectorXd out(grid.cols());
  VectorXd fac(dn);
  for (Index g = 0; g < grid.cols(); ++g) {
    double base = 1.0;
    for (std::size_t k = 0; k < sites.size(); ++k)
      base *= measure.density(sites[k], grid(static_cast<Index>(k), g));
    // Separable per-position weights: evaluation on kept sites, site means
    // elsewhere.
    for (Index p = 0; p < dn; ++p) {
      const int s = static_cast<int>(p / n), b = static_cast<int>(p % n);
      const int slot = slot_of(s);
      fac[p] = slot >= 0 ? basis.eval(s, b + 1, grid(slot, g)) : means(s, b);
    }
    double total = fac.dot(f * fac);
    // Same-site pairs off the kept set integrate to the orthonormality delta,
    // not to the product of means; swap in the exact value.
    for (int s = 0; s < d; ++s) {
      if (slot_of(s) >= 0) continue;
      for (int b1 = 0; b1 < n; ++b1) {
        for (int b2 = 0; b2 < n; ++b2) {
          const Index p1 = static_cast<Index>(s) * n + b1;
          const Index p2 = static_cast<Index>(s) * n + b2;
          const double exact = (b1 == b2) ? 1.0 : 0.0;
          total += f(p1, p2) * (exact - means(s, b1) * means(s, b2));
        }
      }
    }
    out[g] = base * total;
  }
  return out;
}

MatrixXd sample_sphere_points(const Ball& ball, Index count, double box_L,
                              std::uint64_t seed, std::uint64_t stream) {
  const Index d = ball.center.size();
  MatrixXd out(d, count);
  CounterRng rng(seed, RngPurpose::BoundarySample, stream);
  VectorXd z(d);
  for (Index i = 0; i < count; ++i) {
    rng.fill_normal(z.data(), static_cast<int>(d));
    double nrm = z.norm();
    if (!(nrm > 1e-300)) {
      z.setZero();
      z[0] = 1.0;
      nrm = 1.0;
    }
    for (Index k = 0; k < d; ++k) {
      const double x = ball.center[k] + ball.radius * z[k] / nrm;
      out(k, i) = std::clamp(x, -box_L, box_L);
    }
  }
  return out;
}

CommittorSolution solve_committor(const CompressedOperator& op,
                                  const CommittorRhs& rhs, const StopRegions& regions,
                                  const SiteBasis& basis, double box_L,
                                  const CommittorOptions& opts) {
  if (!op.difference)
    throw ConfigError("committor: needs a zero-lag-minus-stopped difference operator");
  if (regions.balls.size() != 2)
    throw ConfigError("committor: exactly two stopping regions required");
  if (opts.n_bc <= 0) throw ConfigError("committor: n_bc must be positive");
  if (opts.fro_probes <= 0) throw ConfigError("committor: fro_probes must be positive");
  const ClusterIndexer& ix = op.ix;
  const Index K = ix.size();
  const Index r1 = op.r1();
  const Index dn = ix.dn();
  if (rhs.f.size() != K) throw ConfigError("committor: rhs length mismatch");
  const double bytes = 8.0 * static_cast<double>(K) * r1 * (op.psd ? 1 : 2);
  if (bytes > 3.5e9)
    throw ConfigError("committor: materialized slice factors exceed the memory budget");

  // Thin factors of the compressed operator, M ~ C core R; symmetric builds
  // share R^T = C.
  MatrixXd cmat(K, r1);
  for (Index k = 0; k < r1; ++k) cmat.col(k) = op.col_slice(k).reconstruct(ix);
  MatrixXd rt_store;
  if (!op.psd) {
    rt_store.resize(K, r1);
    for (Index k = 0; k < r1; ++k) rt_store.col(k) = op.row_slice(k).reconstruct(ix);
  }
  const MatrixXd& rt = op.psd ? cmat : rt_store;
  const auto core_apply = [&](const MatrixXd& x) -> MatrixXd {
    return cmat * (op.core * (rt.transpose() * x));
  };

  CommittorSolution sol;
  sol.unabsorbed_fraction = rhs.unabsorbed_fraction;
  sol.boundary_a =
      sample_sphere_points(regions.balls[0], opts.n_bc, box_L, opts.seed, 0);
  sol.boundary_b =
      sample_sphere_points(regions.balls[1], opts.n_bc, box_L, opts.seed, 1);

  MatrixXd fa(opts.n_bc, dn), fb(opts.n_bc, dn);
  VectorXd u(dn);
  for (Index i = 0; i < opts.n_bc; ++i) {
    fill_factor_values(basis, sol.boundary_a.col(i), u);
    fa.row(i) = u.transpose();
    fill_factor_values(basis, sol.boundary_b.col(i), u);
    fb.row(i) = u.transpose();
  }

  // Row weight |M|_F / sqrt(n_bc), the norm estimated stochastically from a
  // few Gaussian probes (E |M z|^2 = |M|_F^2).
  {
    CounterRng rng(opts.seed, RngPurpose::Probe, 999);
    MatrixXd z(K, opts.fro_probes);
    for (Index j = 0; j < z.cols(); ++j)
      for (Index i = 0; i < K; ++i) z(i, j) = rng.next_normal();
    const double ms = core_apply(z).squaredNorm() / opts.fro_probes;
    sol.row_weight = std::sqrt(ms / static_cast<double>(opts.n_bc));
  }
  if (!(sol.row_weight > 0.0))
    throw DegeneracyError("committor: difference operator vanished");
  const double w = sol.row_weight;

  const auto sphere_eval = [&](const MatrixXd& f, const VectorXd& v) -> VectorXd {
    const MatrixXd vm = reshape_coefficients(v, ix);
    return ((f * vm).cwiseProduct(f)).rowwise().sum();
  };
  const Index rows_total = K + 2 * opts.n_bc;
  const auto fwd_block = [&](const MatrixXd& x) -> MatrixXd {
    MatrixXd out(rows_total, x.cols());
    out.topRows(K) = core_apply(x);
    for (Index j = 0; j < x.cols(); ++j) {
      const MatrixXd vm = reshape_coefficients(x.col(j), ix);
      out.col(j).segment(K, opts.n_bc) =
          w * ((fa * vm).cwiseProduct(fa)).rowwise().sum();
      out.col(j).tail(opts.n_bc) = w * ((fb * vm).cwiseProduct(fb)).rowwise().sum();
    }
    return out;
  };
  const auto adj_block = [&](const MatrixXd& y) -> MatrixXd {
    MatrixXd out = rt * (op.core.transpose() * (cmat.transpose() * y.topRows(K)));
    for (Index j = 0; j < y.cols(); ++j) {
      const VectorXd ya = y.col(j).segment(K, opts.n_bc);
      const VectorXd yb = y.col(j).tail(opts.n_bc);
      const MatrixXd g = fa.transpose() * ya.asDiagonal() * fa +
                         fb.transpose() * yb.asDiagonal() * fb;
      out.col(j).noalias() += w * scatter_pairs(g, ix);
    }
    return out;
  };
  const FunctionOperator stacked(
      rows_total, K,
      [&](const VectorXd& v) -> VectorXd { return fwd_block(v).col(0); },
      [&](const VectorXd& v) -> VectorXd { return adj_block(v).col(0); },
      fwd_block, adj_block);

  VectorXd b = VectorXd::Zero(rows_total);
  b.head(K) = rhs.f;
  b.tail(opts.n_bc).setConstant(w);

  RandomizedSolveOptions ropts;
  ropts.rank = opts.rank > 0 ? opts.rank : std::min(K, r1 + 128);
  ropts.oversample = opts.oversample;
  ropts.powers = opts.powers;
  ropts.rel_cutoff = opts.rel_cutoff;
  ropts.seed = opts.seed;
  sol.c = randomized_pinv_solve(stacked, b, ropts);

  sol.residual_a = sphere_eval(fa, sol.c).cwiseAbs().maxCoeff();
  sol.residual_b = (sphere_eval(fb, sol.c).array() - 1.0).abs().maxCoeff();
  return sol;
}

double committor_value(const VectorXd& c, const SiteBasis& basis,
                       const ClusterIndexer& ix, const StopRegions& regions,
                       const VectorXd& x) {
  const int w = regions.which(x);
  if (w == 1) return 0.0;
  if (w == 2) return 1.0;
  return evaluate_expansion(c, basis, ix, x);
}

ReferenceStat mc_reference_moment(const GLPotential& pot, const VectorXd& x,
                                  const PointFunction& g, double T, Index n_rep,
                                  const SimConfig& cfg, std::uint64_t seed) {
  if (n_rep <= 0) throw ConfigError("reference moment: n_rep must be positive");
  ReferenceStat out;
  if (T <= 0.0) {
    out.value = g(x);
    out.n_used = n_rep;
    return out;
  }
  double mean = 0.0, m2 = 0.0;
  for (Index rep = 0; rep < n_rep; ++rep) {
    CounterRng rng(seed, RngPurpose::Reference, static_cast<std::uint64_t>(rep));
    const double v = g(simulate_endpoint(pot, x, T, cfg, rng));
    const double delta = v - mean;
    mean += delta / static_cast<double>(rep + 1);
    m2 += delta * (v - mean);
  }
  out.value = mean;
  out.n_used = n_rep;
  if (n_rep > 1)
    out.se = std::sqrt(std::max(0.0, m2) /
                       (static_cast<double>(n_rep) * static_cast<double>(n_rep - 1)));
  return out;
}

ReferenceStat mc_reference_committor(const GLPotential& pot, const VectorXd& x,
                                     const StopRegions& regions, double horizon,
                                     Index n_rep, const SimConfig& cfg,
                                     std::uint64_t seed) {
  if (n_rep <= 0) throw ConfigError("reference committor: n_rep must be positive");
  ReferenceStat out;
  const int w0 = regions.which(x);
  if (w0 != 0) {
    out.value = (w0 == 2) ? 1.0 : 0.0;
    out.n_used = n_rep;
    return out;
  }
  Index nb = 0, used = 0;
  for (Index rep = 0; rep < n_rep; ++rep) {
    CounterRng rng(seed, RngPurpose::Reference, static_cast<std::uint64_t>(rep));
    const int flag =
        simulate_stopped(pot, x, 0.0, horizon, regions, cfg, rng).eventual_flag;
    if (flag == 0) {
      ++out.n_excluded;
      continue;
    }
    ++used;
    if (flag == 2) ++nb;
  }
  if (out.n_excluded > 0) {
    std::fprintf(stderr,
                 "warning: committor reference left %lld of %lld replicas "
                 "unabsorbed at the horizon; they are excluded\n",
                 static_cast<long long>(out.n_excluded),
                 static_cast<long long>(n_rep));
  }
  if (used == 0)
    throw DegeneracyError("committor reference: no replica absorbed in time");
  const double p = static_cast<double>(nb) / static_cast<double>(used);
  out.value = p;
  out.n_used = used;
  out.se = std::sqrt(std::max(0.0, p * (1.0 - p) / static_cast<double>(used)));
  return out;
}

}  // namespace tmm
