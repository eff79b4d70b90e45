#include "tmm/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

namespace tmm {

double LatticeModel::energy(Index s) const {
  double h = 0.0;
  double prev = values[digit(s, 0)];
  for (int k = 1; k < d; ++k) {
    double cur = values[digit(s, k)];
    h -= J * prev * cur;
    prev = cur;
  }
  return h;
}

double LatticeModel::delta_energy(Index s, int site, int a) const {
  double nb = 0.0;
  if (site > 0) nb += values[digit(s, site - 1)];
  if (site + 1 < d) nb += values[digit(s, site + 1)];
  return -J * (values[a] - values[digit(s, site)]) * nb;
}

double LatticeModel::rate(Index s, int site, int a) const {
  // rho(tau x) / (rho(x) + rho(tau x)) with the energies cancelled locally.
  return 1.0 / (1.0 + std::exp(beta * delta_energy(s, site, a)));
}

LatticeModel make_chain(int d, int m, double J, double beta) {
  if (d < 1 || m < 2) throw ConfigError("chain needs d >= 1 and m >= 2");
  LatticeModel model;
  model.d = d;
  model.m = m;
  model.J = J;
  model.beta = beta;
  model.kappa = 1;
  model.values.resize(m);
  if (m == 2) {
    model.values << -1.0, 1.0;
  } else {
    for (int a = 0; a < m; ++a) model.values[a] = -1.0 + 2.0 * a / (m - 1);
  }
  Index n = 1;
  for (int k = 0; k < d; ++k) {
    n *= m;
    if (n > 4096) throw ConfigError("state space exceeds 4096 states");
  }
  model.n_states = n;
  return model;
}

VectorXd stationary_density(const LatticeModel& model) {
  VectorXd logw(model.n_states);
  for (Index s = 0; s < model.n_states; ++s) logw[s] = -model.beta * model.energy(s);
  double shift = logw.maxCoeff();
  VectorXd rho = (logw.array() - shift).exp();
  rho /= rho.sum();
  return rho;
}

MatrixXd build_generator(const LatticeModel& model) {
  MatrixXd gen = MatrixXd::Zero(model.n_states, model.n_states);
  for (Index s = 0; s < model.n_states; ++s) {
    double out = 0.0;
    for (int i = 0; i < model.d; ++i) {
      int cur = model.digit(s, i);
      for (int a = 0; a < model.m; ++a) {
        if (a == cur) continue;
        double r = model.rate(s, i, a);
        gen(s, model.replace(s, i, a)) += r;
        out += r;
      }
    }
    gen(s, s) = -out;
  }
  return gen;
}

double max_rate(const LatticeModel& model) {
  double r = 0.0;
  for (Index s = 0; s < model.n_states; ++s)
    for (int i = 0; i < model.d; ++i)
      for (int a = 0; a < model.m; ++a) r = std::max(r, model.rate(s, i, a));
  return r;
}

double total_rate_bound(const LatticeModel& model) {
  double worst = 0.0;
  for (Index s = 0; s < model.n_states; ++s) {
    double tot = 0.0;
    for (int i = 0; i < model.d; ++i)
      for (int a = 0; a < model.m; ++a) tot += model.rate(s, i, a);
    worst = std::max(worst, tot);
  }
  return worst;
}

VectorXd SpectralData::semigroup(const VectorXd& f, double t) const {
  if (t == 0.0) return f;
  VectorXd c = V.transpose() * (sqrt_rho.cwiseProduct(f));
  c = c.cwiseProduct((-t * lambda.array()).exp().matrix());
  return (V * c).cwiseQuotient(sqrt_rho);
}

MatrixXd SpectralData::semigroup(const MatrixXd& F, double t) const {
  if (t == 0.0) return F;
  MatrixXd c = V.transpose() * (sqrt_rho.asDiagonal() * F);
  c = (-t * lambda.array()).exp().matrix().asDiagonal() * c;
  return sqrt_rho.cwiseInverse().asDiagonal() * (V * c);
}

SpectralData eigendecompose(const MatrixXd& gen, const VectorXd& rho) {
  Index n = gen.rows();
  SpectralData spec;
  spec.sqrt_rho = rho.cwiseSqrt();
  MatrixXd sym = spec.sqrt_rho.asDiagonal() * gen * spec.sqrt_rho.cwiseInverse().asDiagonal();
  sym = 0.5 * (sym + sym.transpose());  // kill asymmetric roundoff dust
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym);
  if (es.info() != Eigen::Success) throw DegeneracyError("generator eigensolve failed");
  // SelfAdjointEigenSolver sorts ascending; -L wants 0 = lambda_0 first.
  spec.lambda.resize(n);
  spec.V.resize(n, n);
  for (Index k = 0; k < n; ++k) {
    spec.lambda[k] = -es.eigenvalues()[n - 1 - k];
    spec.V.col(k) = es.eigenvectors().col(n - 1 - k);
    Index imax;
    spec.V.col(k).cwiseAbs().maxCoeff(&imax);
    if (spec.V(imax, k) < 0) spec.V.col(k) = -spec.V.col(k);
  }
  return spec;
}

double lattice_mean(const VectorXd& rho, const VectorXd& f) { return rho.dot(f); }

double lattice_inner(const VectorXd& rho, const VectorXd& f, const VectorXd& g) {
  return (rho.cwiseProduct(f)).dot(g);
}

double dirichlet_form(const MatrixXd& gen, const VectorXd& rho, const VectorXd& f,
                      const VectorXd& g) {
  return -lattice_inner(rho, gen * f, g);
}

double dirichlet_local(const LatticeModel& model, const VectorXd& rho,
                       const VectorXd& f, const VectorXd& g, int site) {
  double acc = 0.0;
  for (Index s = 0; s < model.n_states; ++s) {
    int cur = model.digit(s, site);
    double lf = 0.0;
    for (int a = 0; a < model.m; ++a) {
      if (a == cur) continue;
      lf += model.rate(s, site, a) * (f[model.replace(s, site, a)] - f[s]);
    }
    acc += rho[s] * g[s] * lf;
  }
  return -acc;
}

double dirichlet_local_symmetric(const LatticeModel& model, const VectorXd& rho,
                                 const VectorXd& f, const VectorXd& g, int site) {
  double acc = 0.0;
  for (Index s = 0; s < model.n_states; ++s) {
    int cur = model.digit(s, site);
    for (int a = 0; a < model.m; ++a) {
      if (a == cur) continue;
      Index sp = model.replace(s, site, a);
      acc += model.rate(s, site, a) * (f[sp] - f[s]) * (g[sp] - g[s]) * rho[s];
    }
  }
  return 0.5 * acc;
}

double oscillation(const LatticeModel& model, const VectorXd& f, int site) {
  Index stride = 1;
  for (int k = 0; k < site; ++k) stride *= model.m;
  double osc = 0.0;
  for (Index s = 0; s < model.n_states; ++s) {
    if (model.digit(s, site) != 0) continue;  // one representative per fiber
    double lo = f[s], hi = f[s];
    for (int a = 1; a < model.m; ++a) {
      double val = f[s + a * stride];
      lo = std::min(lo, val);
      hi = std::max(hi, val);
    }
    osc = std::max(osc, hi - lo);
  }
  return osc;
}

double osc_seminorm(const LatticeModel& model, const VectorXd& f) {
  double acc = 0.0;
  for (int i = 0; i < model.d; ++i) acc += oscillation(model, f, i);
  return acc;
}

VectorXd site_marginal(const LatticeModel& model, const VectorXd& rho, int site) {
  VectorXd marg = VectorXd::Zero(model.m);
  for (Index s = 0; s < model.n_states; ++s) marg[model.digit(s, site)] += rho[s];
  return marg;
}

LatticeSiteBasis::LatticeSiteBasis(const LatticeModel& model, const VectorXd& rho,
                                   int n)
    : d_(model.d), n_(n) {
  if (n < 1 || n > model.m)
    throw ConfigError("lattice site basis needs 1 <= n <= m");
  coeff_.reserve(d_);
  for (int site = 0; site < d_; ++site) {
    VectorXd w = site_marginal(model, rho, site);
    MatrixXd raw(model.m, n);
    for (int a = 0; a < model.m; ++a) {
      double p = 1.0;
      for (int o = 0; o < n; ++o) {
        raw(a, o) = p;
        p *= model.values[a];
      }
    }
    MatrixXd gram = raw.transpose() * w.asDiagonal() * raw;
    Eigen::LLT<MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success)
      throw DegeneracyError("degenerate site marginal for lattice basis");
    MatrixXd T = MatrixXd::Identity(n, n);
    llt.matrixL().solveInPlace(T);  // rows of T map raw powers to orthonormal
    // Leading coefficient positive so the family is deterministic.
    for (int o = 0; o < n; ++o)
      if (T(o, o) < 0) T.row(o) = -T.row(o);
    coeff_.push_back(T);
  }
}

void LatticeSiteBasis::fill(int site, double x, double* out) const {
  double powers[16];
  double p = 1.0;
  for (int o = 0; o < n_; ++o) {
    powers[o] = p;
    p *= x;
  }
  const MatrixXd& T = coeff_[site];
  for (int o = 0; o < n_; ++o) {
    double acc = 0.0;
    for (int k = 0; k <= o; ++k) acc += T(o, k) * powers[k];
    out[o] = acc;
  }
}

MatrixXd basis_table(const LatticeModel& model, const SiteBasis& basis,
                     const ClusterIndexer& indexer) {
  MatrixXd psi(model.n_states, indexer.size());
  VectorXd u(indexer.dn());
  for (Index s = 0; s < model.n_states; ++s) {
    fill_factor_values(basis, model.point(s), u);
    for (Index j = 0; j < indexer.size(); ++j)
      psi(s, j) = u[indexer.p1(j)] * u[indexer.p2(j)];
  }
  return psi;
}

MatrixXd exact_moment_matrix(const SpectralData& spec, const MatrixXd& psi, double t) {
  MatrixXd A = spec.V.transpose() * (spec.sqrt_rho.asDiagonal() * psi);
  MatrixXd B = (-t * spec.lambda.array()).exp().matrix().asDiagonal() * A;
  return A.transpose() * B;
}

MatrixXd exact_masked_gram(const VectorXd& rho, const MatrixXd& psi,
                           const std::vector<std::uint8_t>& absorbed) {
  VectorXd w = rho;
  for (Index s = 0; s < w.size(); ++s)
    if (absorbed[static_cast<std::size_t>(s)] != 0) w[s] = 0.0;
  return psi.transpose() * w.asDiagonal() * psi;
}

MatrixXd exact_stopped_moment_matrix(const MatrixXd& gen, const VectorXd& rho,
                                     const MatrixXd& psi,
                                     const std::vector<std::uint8_t>& absorbed,
                                     double t) {
  std::vector<Index> keep;
  for (Index s = 0; s < gen.rows(); ++s)
    if (absorbed[static_cast<std::size_t>(s)] == 0) keep.push_back(s);
  Index nk = static_cast<Index>(keep.size());
  if (nk == 0) return MatrixXd::Zero(psi.cols(), psi.cols());
  // Paths through the absorbing set are frozen there, so the survivor block of
  // the stopped semigroup is the exponential of the restricted generator.
  MatrixXd genk(nk, nk);
  VectorXd srho(nk);
  MatrixXd psik(nk, psi.cols());
  for (Index a = 0; a < nk; ++a) {
    srho[a] = std::sqrt(rho[keep[a]]);
    psik.row(a) = psi.row(keep[a]);
    for (Index b = 0; b < nk; ++b) genk(a, b) = gen(keep[a], keep[b]);
  }
  MatrixXd sym = srho.asDiagonal() * genk * srho.cwiseInverse().asDiagonal();
  sym = 0.5 * (sym + sym.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym);
  if (es.info() != Eigen::Success) throw DegeneracyError("restricted eigensolve failed");
  MatrixXd A = es.eigenvectors().transpose() * (srho.asDiagonal() * psik);
  VectorXd decay = (t * es.eigenvalues().array()).exp();  // eigenvalues of L are <= 0
  return A.transpose() * decay.asDiagonal() * A;
}

VectorXd exact_committor(const MatrixXd& gen, const std::vector<std::uint8_t>& flags) {
  Index n = gen.rows();
  std::vector<Index> interior;
  for (Index s = 0; s < n; ++s)
    if (flags[static_cast<std::size_t>(s)] == 0) interior.push_back(s);
  Index ni = static_cast<Index>(interior.size());
  VectorXd q(n);
  for (Index s = 0; s < n; ++s)
    q[s] = flags[static_cast<std::size_t>(s)] == 2 ? 1.0 : 0.0;
  if (ni == 0) return q;
  MatrixXd A(ni, ni);
  VectorXd b = VectorXd::Zero(ni);
  for (Index a = 0; a < ni; ++a) {
    for (Index c = 0; c < ni; ++c) A(a, c) = gen(interior[a], interior[c]);
    for (Index s = 0; s < n; ++s)
      if (flags[static_cast<std::size_t>(s)] == 2) b[a] -= gen(interior[a], s);
  }
  VectorXd qi = A.fullPivLu().solve(b);
  for (Index a = 0; a < ni; ++a) q[interior[a]] = qi[a];
  return q;
}

Index gillespie_endpoint(const LatticeModel& model, Index s0, double t,
                         CounterRng& rng) {
  Index s = s0;
  double remaining = t;
  const int n_moves = model.d * (model.m - 1);
  std::vector<double> rates(static_cast<std::size_t>(n_moves));
  std::vector<Index> targets(static_cast<std::size_t>(n_moves));
  while (true) {
    double total = 0.0;
    int idx = 0;
    for (int i = 0; i < model.d; ++i) {
      int cur = model.digit(s, i);
      for (int a = 0; a < model.m; ++a) {
        if (a == cur) continue;
        double r = model.rate(s, i, a);
        rates[static_cast<std::size_t>(idx)] = r;
        targets[static_cast<std::size_t>(idx)] = model.replace(s, i, a);
        total += r;
        ++idx;
      }
    }
    double wait = -std::log1p(-rng.next_uniform()) / total;
    if (wait >= remaining) return s;
    remaining -= wait;
    double pick = rng.next_uniform() * total;
    double acc = 0.0;
    int chosen = n_moves - 1;
    for (int k = 0; k < n_moves; ++k) {
      acc += rates[static_cast<std::size_t>(k)];
      if (pick < acc) {
        chosen = k;
        break;
      }
    }
    s = targets[static_cast<std::size_t>(chosen)];
  }
}

LatticeSampler::LatticeSampler(const LatticeModel& model, const VectorXd& rho) {
  cdf_.resize(static_cast<std::size_t>(model.n_states));
  double acc = 0.0;
  for (Index s = 0; s < model.n_states; ++s) {
    acc += rho[s];
    cdf_[static_cast<std::size_t>(s)] = acc;
  }
  cdf_.back() = 1.0;
}

Index LatticeSampler::sample(CounterRng& rng) const {
  double u = rng.next_uniform();
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) --it;
  return static_cast<Index>(it - cdf_.begin());
}

SamplePool build_lattice_pool(const LatticeModel& model, const VectorXd& rho,
                              Index n_src, Index n_traj, double t,
                              std::uint64_t seed) {
  LatticeSampler sampler(model, rho);
  std::vector<Index> src_states(static_cast<std::size_t>(n_src));
  CounterRng src_rng(seed, RngPurpose::SourceSample, 0);
  SamplePool pool;
  pool.d = model.d;
  pool.n_src = n_src;
  pool.n_traj = n_traj;
  pool.t = t;
  pool.stopped = false;
  pool.seed = seed;
  pool.measure_tag = "lattice";
  pool.sources.resize(model.d, n_src);
  pool.endpoints.resize(model.d, n_src * n_traj);
  pool.flags.assign(static_cast<std::size_t>(n_src * n_traj), 0);
  for (Index i = 0; i < n_src; ++i) {
    Index s = sampler.sample(src_rng);
    src_states[static_cast<std::size_t>(i)] = s;
    pool.sources.col(i) = model.point(s);
  }
  for (Index i = 0; i < n_src; ++i) {
    for (Index l = 0; l < n_traj; ++l) {
      CounterRng rng(seed, RngPurpose::Trajectory,
                     static_cast<std::uint64_t>(i * n_traj + l));
      Index y = gillespie_endpoint(model, src_states[static_cast<std::size_t>(i)], t, rng);
      pool.endpoints.col(i * n_traj + l) = model.point(y);
    }
  }
  return pool;
}

bool VerificationReport::all_pass() const {
  for (const auto& rec : records)
    if (!rec.pass) return false;
  return true;
}

namespace {

// Worst-instance tracker for "lhs <= rhs" records.
struct BoundRecord {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = std::numeric_limits<double>::infinity();
  void update(double l, double r) {
    if (r - l < margin) {
      margin = r - l;
      lhs = l;
      rhs = r;
    }
  }
  InequalityRecord finish() const {
    // One-sided bounds get -1e-12 of arithmetic slack.
    return {name, lhs, rhs, margin, margin >= -1e-12};
  }
};

InequalityRecord identity_record(const std::string& name, double residual, double tol) {
  return {name, residual, tol, tol - residual, residual < tol};
}

}  // namespace

VerificationReport verify_inequalities(const LatticeModel& model,
                                       const std::vector<double>& t_grid,
                                       int basis_n, int n_draws, double corr_t,
                                       std::uint64_t seed) {
  VerificationReport rep;
  const Index ns = model.n_states;
  VectorXd rho = stationary_density(model);
  MatrixXd gen = build_generator(model);
  SpectralData spec = eigendecompose(gen, rho);

  rep.r_max = max_rate(model);
  rep.r_bar = total_rate_bound(model);
  rep.gap = spec.gap();
  const double kappa = model.kappa;
  rep.v = 2.0 * (std::exp(1.0) - 1.0) * (2.0 * kappa + 1.0) * kappa *
          (model.m * rep.r_max + rep.r_bar);
  rep.c1 = model.m * rep.r_max * std::max(1.0 / rep.gap, kappa / rep.v);

  // --- exact structural identities ---
  double db = 0.0;
  for (Index s = 0; s < ns; ++s)
    for (int i = 0; i < model.d; ++i) {
      int cur = model.digit(s, i);
      for (int a = 0; a < model.m; ++a) {
        if (a == cur) continue;
        Index sp = model.replace(s, i, a);
        db = std::max(db, std::abs(rho[s] * model.rate(s, i, a) -
                                   rho[sp] * model.rate(sp, i, cur)));
      }
    }
  rep.records.push_back(identity_record("detailed-balance", db, 1e-12));
  rep.records.push_back(
      identity_record("generator-row-sums", gen.rowwise().sum().cwiseAbs().maxCoeff(), 1e-12));
  rep.records.push_back(identity_record("lambda0-zero", std::abs(spec.lambda[0]), 1e-10));

  // --- randomized function sweeps ---
  CounterRng draw_rng(seed, RngPurpose::Probe, 0);
  double sym_resid = 0.0;
  BoundRecord cs{"cauchy-schwarz"};
  BoundRecord le{"local-energy-bound"};
  BoundRecord poin{"poincare"};
  BoundRecord lr{"lieb-robinson"};
  VectorXd f(ns), g(ns);
  for (int draw = 0; draw < n_draws; ++draw) {
    draw_rng.fill_normal(f.data(), static_cast<std::size_t>(ns));
    draw_rng.fill_normal(g.data(), static_cast<std::size_t>(ns));
    f /= f.cwiseAbs().maxCoeff();
    g /= g.cwiseAbs().maxCoeff();
    for (int i = 0; i < model.d; ++i) {
      double eff = dirichlet_local_symmetric(model, rho, f, f, i);
      double egg = dirichlet_local_symmetric(model, rho, g, g, i);
      double efg = dirichlet_local_symmetric(model, rho, f, g, i);
      sym_resid = std::max(sym_resid,
                           std::abs(efg - dirichlet_local(model, rho, f, g, i)));
      cs.update(std::abs(efg), std::sqrt(std::max(eff, 0.0) * std::max(egg, 0.0)));
      le.update(std::abs(efg), 0.5 * model.m * rep.r_max *
                                   oscillation(model, f, i) * oscillation(model, g, i));
    }
    double ef0 = dirichlet_form(gen, rho, f, f);
    for (double t : t_grid) {
      VectorXd ft = spec.semigroup(f, t);
      poin.update(dirichlet_form(gen, rho, ft, ft),
                  std::exp(-2.0 * rep.gap * t) * ef0);
      for (int i = 0; i < model.d; ++i) {
        double rhs = 0.0;
        for (int j = 0; j < model.d; ++j)
          rhs += std::exp(-(std::abs(i - j) - rep.v * t) / kappa) *
                 oscillation(model, f, j);
        lr.update(oscillation(model, ft, i), rhs);
      }
    }
  }
  rep.records.push_back(identity_record("symmetric-representation", sym_resid, 1e-10));
  rep.records.push_back(cs.finish());
  rep.records.push_back(le.finish());
  rep.records.push_back(poin.finish());
  rep.records.push_back(lr.finish());

  // --- two-cluster basis sweeps ---
  ClusterIndexer indexer(model.d, basis_n);
  LatticeSiteBasis basis(model, rho, basis_n);
  MatrixXd psi = basis_table(model, basis, indexer);
  const Index nb = indexer.size();
  VectorXd psi_l2(nb), psi_osc(nb), psi_mean(nb);
  for (Index j = 0; j < nb; ++j) {
    psi_l2[j] = std::sqrt(lattice_inner(rho, psi.col(j), psi.col(j)));
    psi_osc[j] = osc_seminorm(model, psi.col(j));
    psi_mean[j] = lattice_mean(rho, psi.col(j));
  }
  rep.c0 = std::max(psi_l2.maxCoeff(), psi_osc.maxCoeff());
  rep.c2 = rep.c1 * std::max(rep.c0 * rep.c0, rep.c0 * rep.c0 * rep.c0);

  BoundRecord overlap{"overlap-bound"};
  BoundRecord decay{"decay-of-correlation"};
  for (double t : t_grid) {
    if (t <= 0.0) continue;
    MatrixXd psit = spec.semigroup(psi, t);
    MatrixXd energy = -(psit.transpose() * (rho.asDiagonal() * (gen * psit)));
    MatrixXd mt = exact_moment_matrix(spec, psi, t);
    for (Index i = 0; i < nb; ++i) {
      for (Index j = 0; j < nb; ++j) {
        double xi = static_cast<double>(indexer.site_distance(i, j));
        double oscij = psi_osc[i] * psi_osc[j];
        overlap.update(std::abs(energy(i, j)),
                       0.5 * model.m * rep.r_max *
                           std::min(std::exp(-2.0 * rep.gap * t),
                                    model.d * std::exp(-(xi - 2.0 * rep.v * t) / kappa)) *
                           oscij);
        decay.update(std::abs(mt(i, j) - psi_mean[i] * psi_mean[j]),
                     rep.c1 * model.d *
                         std::exp(-rep.gap * xi / (rep.v + rep.gap * kappa)) * oscij);
      }
    }
  }
  rep.records.push_back(overlap.finish());
  rep.records.push_back(decay.finish());

  BoundRecord lowrank{"low-rank-tail"};
  for (double t : {0.5, 1.0, 2.0}) {
    MatrixXd mt = exact_moment_matrix(spec, psi, t);
    Eigen::BDCSVD<MatrixXd> svd(mt);
    rep.singular_values.emplace_back(t, svd.singularValues());
    for (int r = 1; r <= 10 && r + 1 <= svd.singularValues().size(); ++r) {
      lowrank.update(svd.singularValues()[r],
                     rep.c0 * rep.c0 * static_cast<double>(nb) *
                         std::exp(-spec.lambda[r] * t));
    }
  }
  rep.records.push_back(lowrank.finish());

  // --- empirical one-cluster correlation decay ---
  MatrixXd sites(ns, model.d);
  for (Index s = 0; s < ns; ++s) sites.row(s) = model.point(s).transpose();
  MatrixXd sites_t = spec.semigroup(sites, corr_t);
  MatrixXd corr = sites.transpose() * (rho.asDiagonal() * sites_t);
  VectorXd means = sites.transpose() * rho;
  std::vector<double> by_dist(static_cast<std::size_t>(model.d), 0.0);
  for (int i = 0; i < model.d; ++i)
    for (int j = 0; j < model.d; ++j) {
      double val = std::abs(corr(i, j) - means[i] * means[j]);
      auto& slot = by_dist[static_cast<std::size_t>(std::abs(i - j))];
      slot = std::max(slot, val);
    }
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  int cnt = 0;
  for (int xi = 0; xi < model.d; ++xi) {
    double val = by_dist[static_cast<std::size_t>(xi)];
    if (val <= 0.0) continue;
    rep.correlation_table.emplace_back(static_cast<double>(xi), val);
    double y = std::log(val);
    sx += xi; sy += y; sxx += xi * xi; sxy += xi * y; syy += y * y;
    ++cnt;
  }
  if (cnt >= 3) {
    double denom = cnt * sxx - sx * sx;
    rep.corr_slope = (cnt * sxy - sx * sy) / denom;
    double ss_tot = syy - sy * sy / cnt;
    double intercept = (sy - rep.corr_slope * sx) / cnt;
    double ss_res = 0.0;
    for (auto& [xi, val] : rep.correlation_table) {
      double resid = std::log(val) - (intercept + rep.corr_slope * xi);
      ss_res += resid * resid;
    }
    rep.corr_r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  }
  rep.records.push_back({"correlation-slope-negative", rep.corr_slope, 0.0,
                         -rep.corr_slope, rep.corr_slope < 0.0});
  rep.records.push_back({"correlation-fit-r2", 0.9, rep.corr_r2,
                         rep.corr_r2 - 0.9, rep.corr_r2 > 0.9});
  return rep;
}

}  // namespace tmm
