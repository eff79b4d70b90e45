#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "CLI11.hpp"
#include "tmm/apps.hpp"
#include "tmm/basis.hpp"
#include "tmm/coperator.hpp"
#include "tmm/entry_source.hpp"
#include "tmm/estimator.hpp"
#include "tmm/gl_model.hpp"
#include "tmm/gram.hpp"
#include "tmm/io.hpp"
#include "tmm/langevin.hpp"
#include "tmm/lattice.hpp"
#include "tmm/maxvol.hpp"
#include "tmm/pool.hpp"
#include "tmm/rng.hpp"
#include "tmm/slice.hpp"
#include "tmm/types.hpp"

namespace tmm {
namespace {

constexpr const char* kToolVersion = "1.0.0";

// ---------------------------------------------------------------------------
// Flat section.key = value configuration with unknown-key detection.
// ---------------------------------------------------------------------------

class Config {
 public:
  explicit Config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find_first_of("#;");
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw ConfigError("malformed section header in " + path + " line " +
                            std::to_string(lineno));
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("expected key = value in " + path + " line " +
                          std::to_string(lineno));
      std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty())
        throw ConfigError("empty key in " + path + " line " + std::to_string(lineno));
      if (!section.empty()) key = section + "." + key;
      if (kv_.count(key)) throw ConfigError("duplicate config key: " + key);
      kv_[key] = value;
    }
  }

  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  void override_value(const std::string& key, const std::string& value) {
    kv_[key] = value;
  }

  std::string str(const std::string& key) {
    const auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError("missing required config key: " + key);
    return record(key, it->second);
  }
  std::string str_or(const std::string& key, const std::string& dflt) {
    const auto it = kv_.find(key);
    return record(key, it == kv_.end() ? dflt : it->second);
  }
  double num(const std::string& key) { return to_num(key, str(key)); }
  double num_or(const std::string& key, double dflt) {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return to_num(key, record(key, format_g17(dflt)));
    return to_num(key, record(key, it->second));
  }
  std::int64_t integer(const std::string& key) { return to_int(key, str(key)); }
  std::int64_t integer_or(const std::string& key, std::int64_t dflt) {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return to_int(key, record(key, std::to_string(dflt)));
    return to_int(key, record(key, it->second));
  }
  bool flag_or(const std::string& key, bool dflt) {
    const auto it = kv_.find(key);
    const std::string v = record(key, it == kv_.end() ? (dflt ? "1" : "0") : it->second);
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw ConfigError("config key " + key + " expects a boolean, got '" + v + "'");
  }

  // Every provided key must have been consumed by the subcommand.
  void finish() const {
    for (const auto& [key, value] : kv_) {
      (void)value;
      if (!consumed_.count(key)) throw ConfigError("unknown config key: " + key);
    }
  }

  // Deterministic record of every key the run actually used (with defaults).
  std::string resolved_text() const {
    std::string out;
    for (const auto& [key, value] : resolved_) out += key + " = " + value + "\n";
    return out;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }
  std::string record(const std::string& key, const std::string& value) {
    consumed_.insert(key);
    resolved_[key] = value;
    return value;
  }
  double to_num(const std::string& key, const std::string& v) {
    try {
      std::size_t pos = 0;
      const double x = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw ConfigError("config key " + key + " expects a number, got '" + v + "'");
    }
  }
  std::int64_t to_int(const std::string& key, const std::string& v) {
    try {
      std::size_t pos = 0;
      const long long x = std::stoll(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw ConfigError("config key " + key + " expects an integer, got '" + v + "'");
    }
  }

  std::map<std::string, std::string> kv_;
  std::set<std::string> consumed_;
  std::map<std::string, std::string> resolved_;
};

struct RunContext {
  std::string out_dir;
  std::uint64_t seed = 0;
  std::string subcommand;
  std::string manifest_hash;

  std::string path(const std::string& name) const {
    return (std::filesystem::path(out_dir) / name).string();
  }
};

// Resolves the manifest (config + seed + versions), writes it, returns hash.
void write_manifest(RunContext& ctx, const Config& cfg) {
  std::string text;
  text += "# transition moment matrix toolkit run manifest\n";
  text += "tool_version = " + std::string(kToolVersion) + "\n";
  text += "subcommand = " + ctx.subcommand + "\n";
  text += "seed = " + std::to_string(ctx.seed) + "\n";
  text += cfg.resolved_text();
  std::filesystem::create_directories(ctx.out_dir);
  write_text_file(ctx.path("manifest.txt"), text);
  ctx.manifest_hash = fnv1a64_hex(text);
}

void write_summary(const RunContext& ctx,
                   const std::vector<std::pair<std::string, std::string>>& rows) {
  std::string text = "# manifest " + ctx.manifest_hash + "\n";
  for (const auto& [k, v] : rows) text += k + " = " + v + "\n";
  write_text_file(ctx.path("summary.txt"), text);
}

// ---------------------------------------------------------------------------
// Shared model construction from config sections.
// ---------------------------------------------------------------------------

struct ModelSetup {
  int d = 0;
  double gamma = 0.0, beta = 0.0, box_l = 2.0;
  std::string measure_name;
  BasisKind kind = BasisKind::Legendre;
  int n = 0;
  double dt = 0.0;
};

ModelSetup read_model(Config& cfg) {
  ModelSetup m;
  m.d = static_cast<int>(cfg.integer("model.d"));
  m.gamma = cfg.num("model.gamma");
  m.beta = cfg.num("model.beta");
  m.box_l = cfg.num_or("model.box_l", 2.0);
  m.measure_name = cfg.str_or("model.measure", "quartic");
  if (m.measure_name != "uniform" && m.measure_name != "quartic")
    throw ConfigError("model.measure must be uniform or quartic");
  m.kind = basis_kind_from_string(cfg.str("basis.kind"));
  m.n = static_cast<int>(cfg.integer("basis.n"));
  m.dt = cfg.num("sim.dt");
  if (m.d <= 0 || m.n <= 0 || m.dt <= 0.0)
    throw ConfigError("model.d, basis.n, and sim.dt must be positive");
  return m;
}

MeanFieldMeasure make_measure(Config& cfg, const ModelSetup& m) {
  if (m.measure_name == "uniform") {
    const int panels = static_cast<int>(cfg.integer_or("model.quad_panels", 1));
    const int nodes = static_cast<int>(cfg.integer_or("model.quad_nodes", 64));
    return MeanFieldMeasure::uniform(m.d, m.box_l, panels, nodes);
  }
  const int panels = static_cast<int>(cfg.integer_or("model.quad_panels", 32));
  const int nodes = static_cast<int>(cfg.integer_or("model.quad_nodes", 16));
  return MeanFieldMeasure::quartic_boltzmann(m.d, m.box_l, m.beta, m.gamma, panels,
                                             nodes);
}

SimConfig make_sim(const ModelSetup& m) {
  SimConfig cfg;
  cfg.beta = m.beta;
  cfg.dt = m.dt;
  cfg.L = m.box_l;
  return cfg;
}

struct PoolSetup {
  Index n_src = 0, n_traj = 0;
  double t = 0.0;
  std::string source;
  bool stopped = false;
  double horizon = 0.0;
  Index burn_steps = 100000, thin_steps = 100;
  int chains = 32;
};

PoolSetup read_pool(Config& cfg, bool stopped_default = false) {
  PoolSetup p;
  p.n_src = cfg.integer("pool.n_src");
  p.n_traj = cfg.integer("pool.n_traj");
  p.t = cfg.num("pool.t");
  p.source = cfg.str_or("pool.source", "mean_field");
  if (p.source != "mean_field" && p.source != "equilibrium")
    throw ConfigError("pool.source must be mean_field or equilibrium");
  p.stopped = cfg.flag_or("pool.stopped", stopped_default);
  if (p.stopped) p.horizon = cfg.num_or("pool.horizon", 50.0 * p.t);
  if (p.source == "equilibrium") {
    p.burn_steps = cfg.integer_or("pool.burn_steps", 100000);
    p.thin_steps = cfg.integer_or("pool.thin_steps", 100);
    p.chains = static_cast<int>(cfg.integer_or("pool.chains", 32));
  }
  if (p.n_src <= 0 || p.n_traj <= 0 || p.t < 0.0)
    throw ConfigError("pool.n_src, pool.n_traj must be positive and pool.t >= 0");
  return p;
}

StopRegions read_regions(Config& cfg, const GLPotential& pot) {
  const double radius = cfg.num("regions.radius");
  if (radius <= 0.0) throw ConfigError("regions.radius must be positive");
  const auto [x_plus, x_minus] = find_minima(pot);
  StopRegions regions;
  regions.balls.push_back(Ball{x_plus, radius});   // A around the + minimum
  regions.balls.push_back(Ball{x_minus, radius});  // B around the - minimum
  return regions;
}

MatrixXd make_sources(const PoolSetup& p, const GLPotential& pot,
                      const MeanFieldMeasure& mu, const SimConfig& sim,
                      std::uint64_t seed) {
  if (p.source == "equilibrium")
    return sample_equilibrium(pot, sim, p.n_src, seed, p.chains, p.burn_steps,
                              p.thin_steps);
  return sample_mean_field(mu, p.n_src, seed);
}

SamplePool make_pool(const PoolSetup& p, const GLPotential& pot,
                     const MeanFieldMeasure& mu, const SimConfig& sim,
                     const StopRegions* regions, std::uint64_t seed,
                     const std::string& tag) {
  const MatrixXd sources = make_sources(p, pot, mu, sim, seed);
  if (p.stopped) {
    if (regions == nullptr)
      throw ConfigError("stopped pool requested without stopping regions");
    return build_stopped_pool(pot, sources, p.n_traj, p.t, p.horizon, *regions, sim,
                              seed, tag);
  }
  return build_pool(pot, sources, p.n_traj, p.t, sim, seed, tag);
}

BuildOptions read_operator(Config& cfg, std::uint64_t seed) {
  BuildOptions opts;
  opts.r1 = cfg.integer("operator.r1");
  opts.delta = static_cast<int>(cfg.integer("operator.delta"));
  opts.svd_tol = cfg.num_or("operator.svd_tol", 1e-3);
  opts.n_iter = static_cast<int>(cfg.integer_or("operator.n_iter", 3));
  opts.psd = cfg.flag_or("operator.psd", true);
  opts.difference = cfg.flag_or("operator.difference", false);
  opts.max_r2 = cfg.integer_or("operator.max_r2", 0);
  opts.core_cutoff = cfg.num_or("operator.core_cutoff", 1e-10);
  opts.swap_tol = cfg.num_or("operator.swap_tol", 1e-4);
  opts.candidate_cap = cfg.integer_or("operator.candidate_cap", 0);
  opts.seed = seed;
  return opts;
}

std::uint64_t point_seed(std::uint64_t base, std::uint64_t salt, Index idx) {
  std::uint64_t h = base ^ (0x9E3779B97F4A7C15ull * (salt + 1));
  h ^= 0xBF58476D1CE4E5B9ull * static_cast<std::uint64_t>(idx + 1);
  return h;
}

PointFunction make_observable(const std::string& name, int d) {
  const double scale = 1.0 / static_cast<double>(d);
  if (name == "fplus") {
    return [scale](const VectorXd& x) {
      return scale * (x.array() - 1.0).square().sum();
    };
  }
  if (name == "fminus") {
    return [scale](const VectorXd& x) {
      return scale * (x.array() + 1.0).square().sum();
    };
  }
  throw ConfigError("unknown observable: " + name + " (expected fplus or fminus)");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

VectorXd singular_values_of(const MatrixXd& m) {
  Eigen::BDCSVD<MatrixXd> svd(m);
  return svd.singularValues();
}

// ---------------------------------------------------------------------------
// Subcommands.
// ---------------------------------------------------------------------------

int cmd_build_pool(Config& cfg, RunContext& ctx) {
  const ModelSetup m = read_model(cfg);
  PoolSetup p = read_pool(cfg);
  const bool dump = cfg.flag_or("pool.dump", false);
  const GLPotential pot(m.d, m.gamma);
  const MeanFieldMeasure mu = make_measure(cfg, m);
  const SimConfig sim = make_sim(m);
  StopRegions regions;
  if (p.stopped) regions = read_regions(cfg, pot);
  cfg.finish();
  write_manifest(ctx, cfg);

  const SamplePool pool = make_pool(p, pot, mu, sim, p.stopped ? &regions : nullptr,
                                    ctx.seed, m.measure_name);
  save_pool(pool, ctx.path("pool.bin"));
  if (dump) dump_trajectories(pool, ctx.path("trajectories.csv"), ctx.manifest_hash);

  Index absorbed = 0;
  for (const auto f : pool.flags) absorbed += (f != 0);
  write_summary(ctx, {{"d", std::to_string(pool.d)},
                      {"n_src", std::to_string(pool.n_src)},
                      {"n_traj", std::to_string(pool.n_traj)},
                      {"t", format_g17(pool.t)},
                      {"stopped", pool.stopped ? "1" : "0"},
                      {"absorbed_at_lag", std::to_string(absorbed)}});
  return 0;
}

int cmd_build_operator(Config& cfg, RunContext& ctx) {
  const ModelSetup m = read_model(cfg);
  const bool difference = cfg.flag_or("operator.difference", false);
  cfg.override_value("operator.difference", difference ? "1" : "0");
  PoolSetup p = read_pool(cfg, difference);
  const BuildOptions opts = read_operator(cfg, ctx.seed);
  const GLPotential pot(m.d, m.gamma);
  const MeanFieldMeasure mu = make_measure(cfg, m);
  const SimConfig sim = make_sim(m);
  StopRegions regions;
  if (p.stopped) regions = read_regions(cfg, pot);
  cfg.finish();
  write_manifest(ctx, cfg);

  const SamplePool pool = make_pool(p, pot, mu, sim, p.stopped ? &regions : nullptr,
                                    ctx.seed, m.measure_name);
  const UnivariateBasisFamily family(m.kind, m.n, mu);
  const CompressedOperator op = build_compressed(pool, family, opts);
  save_operator(op, ctx.path("operator.bin"));

  write_summary(ctx, {{"d", std::to_string(op.d)},
                      {"n", std::to_string(op.n)},
                      {"r1", std::to_string(op.r1())},
                      {"delta", std::to_string(op.delta)},
                      {"psd", op.psd ? "1" : "0"},
                      {"difference", op.difference ? "1" : "0"},
                      {"t", format_g17(op.t)},
                      {"stored_entries", std::to_string(stored_entry_count(op))},
                      {"stored_entry_bound", std::to_string(stored_entry_bound(op))}});
  return 0;
}

int cmd_spectrum(Config& cfg, RunContext& ctx) {
  const ModelSetup m = read_model(cfg);
  PoolSetup p = read_pool(cfg);
  const double t_small = cfg.num_or("spectrum.t_small", 1e-4);
  const double t_large = cfg.num_or("spectrum.t_large", 1.0);
  const Index k_report = cfg.integer_or("spectrum.k_report", 50);
  const GLPotential pot(m.d, m.gamma);
  const MeanFieldMeasure mu = make_measure(cfg, m);
  const SimConfig sim = make_sim(m);
  cfg.finish();
  write_manifest(ctx, cfg);

  const UnivariateBasisFamily family(m.kind, m.n, mu);
  const ClusterIndexer ix(m.d, m.n);
  const MatrixXd sources = make_sources(p, pot, mu, sim, ctx.seed);

  VectorXd sv_small, sv_large;
  for (int pass = 0; pass < 2; ++pass) {
    const double t = pass == 0 ? t_small : t_large;
    const SamplePool pool =
        build_pool(pot, sources, p.n_traj, t, sim, ctx.seed, m.measure_name);
    const FactorTables tables = build_factor_tables(pool, family);
    const MatrixXd dense = assemble_dense(tables, ix);
    (pass == 0 ? sv_small : sv_large) = singular_values_of(dense);
  }

  const Index rows = std::min<Index>(k_report, std::min(sv_small.size(), sv_large.size()));
  {
    ColumnarWriter w(ctx.path("spectrum.csv"), ctx.manifest_hash,
                     {"k", "sigma_t_small", "ratio_t_small", "sigma_t_large",
                      "ratio_t_large"});
    for (Index k = 0; k < rows; ++k) {
      w.field(static_cast<std::int64_t>(k + 1));
      w.field(sv_small[k]);
      w.field(sv_small[k] / sv_small[0]);
      w.field(sv_large[k]);
      w.field(sv_large[k] / sv_large[0]);
      w.end_row();
    }
  }
  const Index kk = rows - 1;
  write_summary(ctx,
                {{"t_small", format_g17(t_small)},
                 {"t_large", format_g17(t_large)},
                 {"k_report", std::to_string(rows)},
                 {"ratio_t_small", format_g17(sv_small[kk] / sv_small[0])},
                 {"ratio_t_large", format_g17(sv_large[kk] / sv_large[0])}});
  return 0;
}

int cmd_slice_report(Config& cfg, RunContext& ctx) {
  const ModelSetup m = read_model(cfg);
  PoolSetup p = read_pool(cfg);
  ClusterIndex owner_ix;
  owner_ix.s1 = static_cast<int>(cfg.integer("slice.s1"));
  owner_ix.b1 = static_cast<int>(cfg.integer("slice.b1"));
  owner_ix.s2 = static_cast<int>(cfg.integer("slice.s2"));
  owner_ix.b2 = static_cast<int>(cfg.integer("slice.b2"));
  const int delta = static_cast<int>(cfg.integer("slice.delta"));
  const double svd_tol = cfg.num_or("slice.svd_tol", 1e-3);
  const Index k_report = cfg.integer_or("slice.k_report", 50);
  const GLPotential pot(m.d, m.gamma);
  const MeanFieldMeasure mu = make_measure(cfg, m);
  const SimConfig sim = make_sim(m);
  cfg.finish();
  write_manifest(ctx, cfg);

  const SamplePool pool = make_pool(p, pot, mu, sim, nullptr, ctx.seed, m.measure_name);
  const UnivariateBasisFamily family(m.kind, m.n, mu);
  const ClusterIndexer ix(m.d, m.n);
  const Index owner = ix.to_linear(owner_ix);
  const FactorTables tables = build_factor_tables(pool, family);
  const FirstMoments moments = estimate_first_moments(tables, ix);
  PoolEntrySource source(tables, ix);
  const VectorXd col = source.column(owner);

  // Residual matrix: first-moment products on the mask, raw estimates off it.
  const Index dn = ix.dn();
  const VectorXd& a = moments.phi_src;
  const double b = moments.psi_end[owner];
  MatrixXd resid(dn, dn), slice(dn, dn);
  Index nnz = 0;
  for (Index p2 = 0; p2 < dn; ++p2) {
    for (Index p1 = 0; p1 < dn; ++p1) {
      const Index i = ix.from_factors(p1, p2);
      slice(p1, p2) = col[i];
      const bool masked = in_mask(ix, i, owner, delta);
      nnz += masked;
      resid(p1, p2) = masked ? a[p1] * a[p2] * b : col[i];
    }
  }
  const VectorXd sv_slice = singular_values_of(slice);
  const VectorXd sv_resid = singular_values_of(resid);

  const SliceFactorization fac =
      factor_slice(col, owner, false, a, b, ix, delta, svd_tol);
  const VectorXd recon = fac.reconstruct(ix);
  const double recon_err = (recon - col).cwiseAbs().maxCoeff();

  const Index rows = std::min<Index>(k_report, dn);
  {
    ColumnarWriter w(ctx.path("slice_spectrum.csv"), ctx.manifest_hash,
                     {"k", "sigma_slice", "ratio_slice", "sigma_residual",
                      "ratio_residual"});
    for (Index k = 0; k < rows; ++k) {
      w.field(static_cast<std::int64_t>(k + 1));
      w.field(sv_slice[k]);
      w.field(sv_slice[k] / sv_slice[0]);
      w.field(sv_resid[k]);
      w.field(sv_resid[k] / sv_resid[0]);
      w.end_row();
    }
  }
  const Index k5 = std::min<Index>(4, dn - 1);
  write_summary(
      ctx, {{"owner", std::to_string(owner)},
            {"sparse_nnz_canonical", std::to_string(static_cast<Index>(
                                         fac.positions.size()))},
            {"mask_entries", std::to_string(nnz)},
            {"r2", std::to_string(fac.r2())},
            {"stored_entries", std::to_string(fac.stored_entries())},
            {"sigma5_ratio_residual", format_g17(sv_resid[k5] / sv_resid[0])},
            {"sigma5_ratio_slice", format_g17(sv_slice[k5] / sv_slice[0])},
            {"reconstruction_max_abs_err", format_g17(recon_err)}});
  return 0;
}

int cmd_predict_moment(Config& cfg, RunContext& ctx) {
  const ModelSetup m = read_model(cfg);
  PoolSetup p = read_pool(cfg);
  const BuildOptions opts = read_operator(cfg, ctx.seed);
  const int n_steps = static_cast<int>(cfg.integer_or("predict.n_steps", 5));
  const Index n_points = cfg.integer_or("predict.n_points", 500);
  const Index n_rep = cfg.integer_or("predict.n_rep_reference", 100);
  const std::vector<std::string> observables =
      split_list(cfg.str_or("predict.observables", "fplus,fminus"));
  const GLPotential pot(m.d, m.gamma);
  const MeanFieldMeasure mu = make_measure(cfg, m);
  const SimConfig sim = make_sim(m);
  cfg.finish();
  write_manifest(ctx, cfg);

  const SamplePool pool = make_pool(p, pot, mu, sim, nullptr, ctx.seed, m.measure_name);
  const UnivariateBasisFamily family(m.kind, m.n, mu);
  const ClusterIndexer ix(m.d, m.n);
  const CompressedOperator op = build_compressed(pool, family, opts);
  const GramOperator gram(family, mu, ix);
  const double t_total = n_steps * pool.t;

  // Test points drawn uniformly from the simulation box.
  MatrixXd points(m.d, n_points);
  {
    CounterRng rng(ctx.seed, RngPurpose::TestPoint, 0);
    for (Index i = 0; i < n_points; ++i)
      for (int k = 0; k < m.d; ++k) points(k, i) = rng.uniform(-m.box_l, m.box_l);
  }

  std::vector<std::pair<std::string, std::string>> summary{
      {"t", format_g17(pool.t)},
      {"n_steps", std::to_string(n_steps)},
      {"t_total", format_g17(t_total)}};
  for (std::size_t oi = 0; oi < observables.size(); ++oi) {
    const std::string& name = observables[oi];
    const PointFunction g = make_observable(name, m.d);
    const VectorXd c0 = project_function(g, pool, family, gram);
    const VectorXd ct = predict_moment(op, gram, c0, n_steps);

    VectorXd pred(n_points), ref(n_points);
    for (Index i = 0; i < n_points; ++i) {
      pred[i] = evaluate_expansion(ct, family, ix, points.col(i));
      ref[i] = mc_reference_moment(pot, points.col(i), g, t_total, n_rep, sim,
                                   point_seed(ctx.seed, oi, i))
                   .value;
    }
    const double rel_l2 = (pred - ref).norm() / ref.norm();

    std::vector<std::string> cols;
    for (int k = 1; k <= m.d; ++k) cols.push_back("x_" + std::to_string(k));
    cols.insert(cols.end(), {"predicted", "reference", "abs_err"});
    ColumnarWriter w(ctx.path("moment_" + name + ".csv"), ctx.manifest_hash, cols);
    for (Index i = 0; i < n_points; ++i) {
      for (int k = 0; k < m.d; ++k) w.field(points(k, i));
      w.field(pred[i]);
      w.field(ref[i]);
      w.field(std::abs(pred[i] - ref[i]));
      w.end_row();
    }
    summary.emplace_back("rel_l2_" + name, format_g17(rel_l2));
  }
  write_summary(ctx, summary);
  return 0;
}

int cmd_predict_density(Config& cfg, RunContext& ctx) {
  const ModelSetup m = read_model(cfg);
  PoolSetup p = read_pool(cfg);
  const BuildOptions opts = read_operator(cfg, ctx.seed);
  const int n_steps = static_cast<int>(cfg.integer_or("density.n_steps", 1));
  const int site = static_cast<int>(cfg.integer("density.site"));  // 1-based
  const double grid_lo = cfg.num_or("density.grid_lo", -m.box_l);
  const double grid_hi = cfg.num_or("density.grid_hi", m.box_l);
  const Index grid_n = cfg.integer_or("density.grid_n", 101);
  const int site2_a = static_cast<int>(cfg.integer_or("density.site2_a", 25));
  const int site2_b = static_cast<int>(cfg.integer_or("density.site2_b", 26));
  const Index grid2_n = cfg.integer_or("density.grid2_n", 21);
  const Index n_ref = cfg.integer_or("density.n_reference", 20000);
  if (site < 1 || site > m.d || site2_a < 1 || site2_a > m.d || site2_b < 1 ||
      site2_b > m.d)
    throw ConfigError("density sites must lie in [1, d]");
  const GLPotential pot(m.d, m.gamma);
  const MeanFieldMeasure mu = make_measure(cfg, m);
  const SimConfig sim = make_sim(m);
  cfg.finish();
  write_manifest(ctx, cfg);

  const SamplePool pool = make_pool(p, pot, mu, sim, nullptr, ctx.seed, m.measure_name);
  const UnivariateBasisFamily family(m.kind, m.n, mu);
  const ClusterIndexer ix(m.d, m.n);
  const CompressedOperator op = build_compressed(pool, family, opts);
  const GramOperator gram(family, mu, ix);
  const double t_total = n_steps * pool.t;

  // Initial density mu itself: unit constant expansion coefficient.
  VectorXd c0 = VectorXd::Zero(ix.size());
  c0[0] = 1.0;
  const VectorXd ct = predict_density(op, gram, c0, n_steps);

  // Reference: direct simulations from the initial density.
  MatrixXd ref_samples(m.d, n_ref);
  {
    const MatrixXd starts =
        sample_mean_field(mu, n_ref, point_seed(ctx.seed, 101, 0));
    for (Index i = 0; i < n_ref; ++i) {
      CounterRng rng(point_seed(ctx.seed, 102, i), RngPurpose::Reference, 0);
      ref_samples.col(i) = simulate_endpoint(pot, starts.col(i), t_total, sim, rng);
    }
  }

  // One-dimensional marginal vs a Gaussian kernel density estimate.
  MatrixXd grid1(1, grid_n);
  for (Index i = 0; i < grid_n; ++i)
    grid1(0, i) = grid_lo + (grid_hi - grid_lo) * i / static_cast<double>(grid_n - 1);
  const VectorXd marg1 = marginal_density(ct, family, mu, {site - 1}, grid1);
  VectorXd kde = VectorXd::Zero(grid_n);
  {
    const VectorXd s = ref_samples.row(site - 1).transpose();
    const double sd = std::sqrt((s.array() - s.mean()).square().sum() /
                                static_cast<double>(s.size() - 1));
    const double h =
        1.06 * sd * std::pow(static_cast<double>(s.size()), -0.2);
    for (Index i = 0; i < grid_n; ++i) {
      const double z =
          (((s.array() - grid1(0, i)) / h).square() * (-0.5)).exp().sum();
      kde[i] = z / (static_cast<double>(s.size()) * h * std::sqrt(2.0 * M_PI));
    }
  }
  const double rel_l2 = (marg1 - kde).norm() / kde.norm();
  {
    ColumnarWriter w(ctx.path("marginal_x.csv"), ctx.manifest_hash,
                     {"x", "predicted", "reference_kde", "abs_err"});
    for (Index i = 0; i < grid_n; ++i) {
      w.field(grid1(0, i));
      w.field(marg1[i]);
      w.field(kde[i]);
      w.field(std::abs(marg1[i] - kde[i]));
      w.end_row();
    }
  }

  // Two-dimensional marginal vs the reference histogram (cell densities).
  const double cell = (grid_hi - grid_lo) / static_cast<double>(grid2_n);
  MatrixXd grid2(2, grid2_n * grid2_n);
  for (Index ib = 0; ib < grid2_n; ++ib)
    for (Index ia = 0; ia < grid2_n; ++ia) {
      const Index idx = ib * grid2_n + ia;
      grid2(0, idx) = grid_lo + cell * (ia + 0.5);
      grid2(1, idx) = grid_lo + cell * (ib + 0.5);
    }
  const VectorXd marg2 =
      marginal_density(ct, family, mu, {site2_a - 1, site2_b - 1}, grid2);
  MatrixXd hist = MatrixXd::Zero(grid2_n, grid2_n);
  for (Index i = 0; i < n_ref; ++i) {
    const double xa = ref_samples(site2_a - 1, i), xb = ref_samples(site2_b - 1, i);
    const Index ia = std::clamp<Index>(
        static_cast<Index>(std::floor((xa - grid_lo) / cell)), 0, grid2_n - 1);
    const Index ib = std::clamp<Index>(
        static_cast<Index>(std::floor((xb - grid_lo) / cell)), 0, grid2_n - 1);
    hist(ia, ib) += 1.0;
  }
  hist /= static_cast<double>(n_ref) * cell * cell;
  {
    ColumnarWriter w(ctx.path("marginal_2d.csv"), ctx.manifest_hash,
                     {"x_a", "x_b", "predicted", "reference_hist"});
    for (Index idx = 0; idx < grid2.cols(); ++idx) {
      const Index ia = idx % grid2_n, ib = idx / grid2_n;
      w.field(grid2(0, idx));
      w.field(grid2(1, idx));
      w.field(marg2[idx]);
      w.field(hist(ia, ib));
      w.end_row();
    }
  }

  // Mode agreement: argmax cells over each half-plane (the density is
  // two-peaked along the diagonal), 3x3-smoothed to tame histogram noise.
  const auto smooth = [&](const MatrixXd& f) {
    MatrixXd out = MatrixXd::Zero(grid2_n, grid2_n);
    for (Index ib = 0; ib < grid2_n; ++ib)
      for (Index ia = 0; ia < grid2_n; ++ia) {
        double acc = 0.0;
        int cnt = 0;
        for (Index db = -1; db <= 1; ++db)
          for (Index da = -1; da <= 1; ++da) {
            const Index ja = ia + da, jb = ib + db;
            if (ja < 0 || jb < 0 || ja >= grid2_n || jb >= grid2_n) continue;
            acc += f(ja, jb);
            ++cnt;
          }
        out(ia, ib) = acc / cnt;
      }
    return out;
  };
  const auto modes = [&](const MatrixXd& f) {
    std::vector<std::pair<Index, Index>> out(2, {0, 0});
    double best_lo = -1.0, best_hi = -1.0;
    for (Index ib = 0; ib < grid2_n; ++ib)
      for (Index ia = 0; ia < grid2_n; ++ia) {
        const bool hi = (ia + ib) >= grid2_n;  // upper-right half (around +1,+1)
        const double v = f(ia, ib);
        if (hi && v > best_hi) {
          best_hi = v;
          out[1] = {ia, ib};
        } else if (!hi && v > best_lo) {
          best_lo = v;
          out[0] = {ia, ib};
        }
      }
    return out;
  };
  MatrixXd pred_grid = MatrixXd::Zero(grid2_n, grid2_n);
  for (Index idx = 0; idx < grid2.cols(); ++idx)
    pred_grid(idx % grid2_n, idx / grid2_n) = marg2[idx];
  const auto mp = modes(smooth(pred_grid));
  const auto mh = modes(smooth(hist));
  const Index mode_dist_lo = std::max(std::abs(mp[0].first - mh[0].first),
                                      std::abs(mp[0].second - mh[0].second));
  const Index mode_dist_hi = std::max(std::abs(mp[1].first - mh[1].first),
                                      std::abs(mp[1].second - mh[1].second));

  write_summary(ctx, {{"t", format_g17(pool.t)},
                      {"n_steps", std::to_string(n_steps)},
                      {"t_total", format_g17(t_total)},
                      {"site", std::to_string(site)},
                      {"rel_l2_marginal", format_g17(rel_l2)},
                      {"mode_cell_dist_lo", std::to_string(mode_dist_lo)},
                      {"mode_cell_dist_hi", std::to_string(mode_dist_hi)}});
  return 0;
}

int cmd_committor(Config& cfg, RunContext& ctx) {
  const ModelSetup m = read_model(cfg);
  PoolSetup p = read_pool(cfg, true);
  if (!p.stopped) throw ConfigError("committor requires pool.stopped = 1");
  BuildOptions opts = read_operator(cfg, ctx.seed);
  if (!opts.difference)
    throw ConfigError("committor requires operator.difference = 1");
  CommittorOptions copts;
  copts.n_bc = cfg.integer_or("committor.n_bc", 1000);
  copts.rank = cfg.integer_or("committor.rank", 0);
  copts.oversample = cfg.integer_or("committor.oversample", 10);
  copts.powers = static_cast<int>(cfg.integer_or("committor.powers", 1));
  copts.rel_cutoff = cfg.num_or("committor.rel_cutoff", 1e-8);
  copts.fro_probes = cfg.integer_or("committor.fro_probes", 8);
  copts.seed = ctx.seed;
  const Index n_diag = cfg.integer_or("committor.n_diag", 25);
  const double diag_lo = cfg.num_or("committor.diag_lo", -1.2);
  const double diag_hi = cfg.num_or("committor.diag_hi", 1.2);
  const Index n_rep_diag = cfg.integer_or("committor.n_rep_diag", 2000);
  const Index n_points = cfg.integer_or("committor.n_points", 500);
  const Index n_rep_points = cfg.integer_or("committor.n_rep_points", 100);
  const double ref_horizon = cfg.num_or("committor.ref_horizon", 5.0 * p.horizon);
  const GLPotential pot(m.d, m.gamma);
  const MeanFieldMeasure mu = make_measure(cfg, m);
  const SimConfig sim = make_sim(m);
  const StopRegions regions = read_regions(cfg, pot);
  cfg.finish();
  write_manifest(ctx, cfg);

  const SamplePool pool =
      make_pool(p, pot, mu, sim, &regions, ctx.seed, m.measure_name);
  const UnivariateBasisFamily family(m.kind, m.n, mu);
  const ClusterIndexer ix(m.d, m.n);
  const CompressedOperator op = build_compressed(pool, family, opts);
  const FactorTables tables = build_factor_tables(pool, family);
  const CommittorRhs rhs = estimate_committor_rhs(pool, tables, ix);
  const CommittorSolution sol =
      solve_committor(op, rhs, regions, family, m.box_l, copts);

  // Diagonal slice q(alpha * ones).
  VectorXd diag_pred(n_diag), diag_ref(n_diag), alphas(n_diag);
  for (Index i = 0; i < n_diag; ++i) {
    const double alpha =
        diag_lo + (diag_hi - diag_lo) * i / static_cast<double>(n_diag - 1);
    alphas[i] = alpha;
    const VectorXd x = VectorXd::Constant(m.d, alpha);
    diag_pred[i] = committor_value(sol.c, family, ix, regions, x);
    diag_ref[i] = mc_reference_committor(pot, x, regions, ref_horizon, n_rep_diag,
                                         sim, point_seed(ctx.seed, 7, i))
                      .value;
  }
  const double rel_err_diag = (diag_pred - diag_ref).norm() / diag_ref.norm();
  {
    ColumnarWriter w(ctx.path("committor_diag.csv"), ctx.manifest_hash,
                     {"alpha", "predicted", "reference", "abs_err"});
    for (Index i = 0; i < n_diag; ++i) {
      w.field(alphas[i]);
      w.field(diag_pred[i]);
      w.field(diag_ref[i]);
      w.field(std::abs(diag_pred[i] - diag_ref[i]));
      w.end_row();
    }
  }
  // Midpoint of the diagonal (alpha = 0) for the symmetry check.
  const double midpoint = committor_value(sol.c, family, ix, regions,
                                          VectorXd::Zero(m.d));

  // Sampled equilibrium points.
  const MatrixXd points =
      sample_equilibrium(pot, sim, n_points, point_seed(ctx.seed, 11, 0), 32,
                         p.burn_steps, p.thin_steps);
  VectorXd s_pred(n_points), s_ref(n_points);
  Index outside_range = 0;
  for (Index i = 0; i < n_points; ++i) {
    s_pred[i] = committor_value(sol.c, family, ix, regions, points.col(i));
    s_ref[i] = mc_reference_committor(pot, points.col(i), regions, ref_horizon,
                                      n_rep_points, sim, point_seed(ctx.seed, 13, i))
                   .value;
    outside_range += (s_pred[i] < -0.05 || s_pred[i] > 1.05);
  }
  const double rel_err_points = (s_pred - s_ref).norm() / s_ref.norm();
  {
    std::vector<std::string> cols;
    for (int k = 1; k <= m.d; ++k) cols.push_back("x_" + std::to_string(k));
    cols.insert(cols.end(), {"predicted", "reference", "abs_err"});
    ColumnarWriter w(ctx.path("committor_points.csv"), ctx.manifest_hash, cols);
    for (Index i = 0; i < n_points; ++i) {
      for (int k = 0; k < m.d; ++k) w.field(points(k, i));
      w.field(s_pred[i]);
      w.field(s_ref[i]);
      w.field(std::abs(s_pred[i] - s_ref[i]));
      w.end_row();
    }
  }

  write_summary(
      ctx,
      {{"rel_err_diag", format_g17(rel_err_diag)},
       {"rel_err_points", format_g17(rel_err_points)},
       {"midpoint", format_g17(midpoint)},
       {"residual_a", format_g17(sol.residual_a)},
       {"residual_b", format_g17(sol.residual_b)},
       {"row_weight", format_g17(sol.row_weight)},
       {"unabsorbed_fraction", format_g17(sol.unabsorbed_fraction)},
       {"range_violation_frac",
        format_g17(static_cast<double>(outside_range) /
                   static_cast<double>(n_points))}});
  return 0;
}

int cmd_verify_lattice(Config& cfg, RunContext& ctx) {
  const int d = static_cast<int>(cfg.integer_or("lattice.d", 8));
  const int st = static_cast<int>(cfg.integer_or("lattice.m", 2));
  const double coupling = cfg.num_or("lattice.j", 1.0);
  const double beta = cfg.num_or("lattice.beta", 0.6);
  const int basis_n = static_cast<int>(cfg.integer_or("lattice.n", 2));
  const int draws = static_cast<int>(cfg.integer_or("lattice.draws", 120));
  const double corr_t = cfg.num_or("lattice.corr_t", 1.0);
  std::vector<double> t_grid;
  for (const std::string& tok :
       split_list(cfg.str_or("lattice.t_grid", "0.5,1,2")))
    t_grid.push_back(std::stod(tok));
  cfg.finish();
  write_manifest(ctx, cfg);

  const LatticeModel model = make_chain(d, st, coupling, beta);
  const VerificationReport report =
      verify_inequalities(model, t_grid, basis_n, draws, corr_t, ctx.seed);

  std::string text = "# manifest " + ctx.manifest_hash + "\n";
  text += "name, lhs, rhs, margin, pass\n";
  for (const auto& rec : report.records) {
    text += rec.name + ", " + format_g17(rec.lhs) + ", " + format_g17(rec.rhs) +
            ", " + format_g17(rec.margin) + ", " + (rec.pass ? "1" : "0") + "\n";
  }
  write_text_file(ctx.path("lattice_report.txt"), text);
  {
    ColumnarWriter w(ctx.path("correlation.csv"), ctx.manifest_hash,
                     {"distance", "abs_correlation"});
    for (const auto& [xi, value] : report.correlation_table) {
      w.field(xi);
      w.field(value);
      w.end_row();
    }
  }
  write_summary(ctx, {{"all_pass", report.all_pass() ? "1" : "0"},
                      {"records", std::to_string(report.records.size())},
                      {"r_max", format_g17(report.r_max)},
                      {"spectral_gap", format_g17(report.gap)},
                      {"c0", format_g17(report.c0)},
                      {"corr_slope", format_g17(report.corr_slope)},
                      {"corr_r2", format_g17(report.corr_r2)}});
  return report.all_pass() ? 0 : 1;
}

int cmd_oracle_compare(Config& cfg, RunContext& ctx) {
  std::vector<int> d_list;
  for (const std::string& tok : split_list(cfg.str_or("oracle.d_list", "4,5,6")))
    d_list.push_back(std::stoi(tok));
  const int st = static_cast<int>(cfg.integer_or("oracle.m", 3));
  const int n = static_cast<int>(cfg.integer_or("oracle.n", 3));
  const double coupling = cfg.num_or("oracle.j", 1.0);
  const double beta = cfg.num_or("oracle.beta", 0.5);
  const double t = cfg.num_or("oracle.t", 0.5);
  const Index r1_generous = cfg.integer_or("oracle.r1_generous", 60);
  const int delta_generous =
      static_cast<int>(cfg.integer_or("oracle.delta_generous", 2));
  cfg.finish();
  write_manifest(ctx, cfg);

  // Assemble a compressed approximation of a dense zero-noise matrix through
  // the pivot/core/slice machinery and compare against the matrix itself.
  const auto compress_error = [&](const MatrixXd& mat, const ClusterIndexer& ix,
                                  Index r1, int delta) {
    DenseEntrySource source(mat);
    MaxvolOptions mopts;
    mopts.r1 = std::min<Index>(r1, mat.rows());
    mopts.psd = true;
    mopts.seed = ctx.seed;
    const MaxvolResult pivots = maxvol_cross(source, mopts);
    const MatrixXd cross = source.block(pivots.rows, pivots.cols);
    const MatrixXd core = core_pinv(cross, 1e-12);
    const VectorXd zero_a = VectorXd::Zero(ix.dn());
    MatrixXd cmat(mat.rows(), static_cast<Index>(pivots.cols.size()));
    for (std::size_t k = 0; k < pivots.cols.size(); ++k) {
      const SliceFactorization fac = factor_slice(
          mat.col(pivots.cols[k]), pivots.cols[k], false, zero_a, 0.0, ix, delta,
          1e-3);
      cmat.col(static_cast<Index>(k)) = fac.reconstruct(ix);
    }
    MatrixXd rt(mat.rows(), static_cast<Index>(pivots.rows.size()));
    for (std::size_t k = 0; k < pivots.rows.size(); ++k) {
      const SliceFactorization fac = factor_slice(
          mat.row(pivots.rows[k]).transpose(), pivots.rows[k], true, zero_a, 0.0,
          ix, delta, 1e-3);
      rt.col(static_cast<Index>(k)) = fac.reconstruct(ix);
    }
    const MatrixXd recon = cmat * core * rt.transpose();
    return (recon - mat).norm() / mat.norm();
  };

  std::vector<std::pair<std::string, std::string>> summary;
  double worst_generous = 0.0, worst_lossless = 0.0;
  ColumnarWriter w(ctx.path("oracle_compare.csv"), ctx.manifest_hash,
                   {"d", "mode", "r1", "delta", "rel_frobenius_err"});
  for (const int d : d_list) {
    const LatticeModel model = make_chain(d, st, coupling, beta);
    const VectorXd rho = stationary_density(model);
    const MatrixXd gen = build_generator(model);
    const SpectralData spec = eigendecompose(gen, rho);
    const LatticeSiteBasis basis(model, rho, n);
    const ClusterIndexer ix(d, n);
    const MatrixXd psi = basis_table(model, basis, ix);
    const MatrixXd mat = exact_moment_matrix(spec, psi, t);

    const double err_gen = compress_error(mat, ix, r1_generous, delta_generous);
    const double err_lossless = compress_error(mat, ix, mat.rows(), d);
    worst_generous = std::max(worst_generous, err_gen);
    worst_lossless = std::max(worst_lossless, err_lossless);

    w.field(static_cast<std::int64_t>(d));
    w.field(std::string("generous"));
    w.field(static_cast<std::int64_t>(std::min<Index>(r1_generous, mat.rows())));
    w.field(static_cast<std::int64_t>(delta_generous));
    w.field(err_gen);
    w.end_row();
    w.field(static_cast<std::int64_t>(d));
    w.field(std::string("lossless"));
    w.field(static_cast<std::int64_t>(mat.rows()));
    w.field(static_cast<std::int64_t>(d));
    w.field(err_lossless);
    w.end_row();
    summary.emplace_back("err_generous_d" + std::to_string(d), format_g17(err_gen));
    summary.emplace_back("err_lossless_d" + std::to_string(d),
                         format_g17(err_lossless));
  }
  summary.emplace_back("worst_generous", format_g17(worst_generous));
  summary.emplace_back("worst_lossless", format_g17(worst_lossless));
  write_summary(ctx, summary);
  return 0;
}

}  // namespace
}  // namespace tmm

int main(int argc, char** argv) {
  CLI::App app{"transition moment matrix toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out";
  std::uint64_t seed_flag = 0;
  bool seed_given = false;
  int threads = 0;
  app.add_option("--config", config_path, "configuration file")->required();
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed_flag, "seed override")
      ->each([&](const std::string&) { seed_given = true; });
  app.add_option("--threads", threads, "worker threads (0 = auto)");

  using Handler = int (*)(tmm::Config&, tmm::RunContext&);
  const std::vector<std::pair<std::string, Handler>> commands = {
      {"build-pool", &tmm::cmd_build_pool},
      {"build-operator", &tmm::cmd_build_operator},
      {"spectrum", &tmm::cmd_spectrum},
      {"slice-report", &tmm::cmd_slice_report},
      {"predict-moment", &tmm::cmd_predict_moment},
      {"predict-density", &tmm::cmd_predict_density},
      {"committor", &tmm::cmd_committor},
      {"verify-lattice", &tmm::cmd_verify_lattice},
      {"oracle-compare", &tmm::cmd_oracle_compare}};
  for (const auto& [name, handler] : commands) {
    (void)handler;
    // Let --config/--out/--seed appear after the subcommand token.
    app.add_subcommand(name, "")->fallthrough();
  }

  CLI11_PARSE(app, argc, argv);
  Eigen::setNbThreads(threads > 0 ? threads : 1);

  try {
    tmm::Config cfg(config_path);
    tmm::RunContext ctx;
    ctx.out_dir = out_dir;
    if (seed_given) {
      ctx.seed = seed_flag;
      cfg.override_value("seed", std::to_string(seed_flag));
    } else if (cfg.has("seed")) {
      ctx.seed = static_cast<std::uint64_t>(cfg.integer("seed"));
    }
    cfg.str_or("seed", std::to_string(ctx.seed));
    for (const auto& [name, handler] : commands) {
      if (app.get_subcommand(name)->parsed()) {
        ctx.subcommand = name;
        return handler(cfg, ctx);
      }
    }
    std::fprintf(stderr, "error: no subcommand selected\n");
    return 1;
  } catch (const tmm::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const tmm::IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
