#include "tmm/coperator.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <memory>
#include <utility>

#include "tmm/io.hpp"

namespace tmm {
namespace {

constexpr char kOperatorMagic[8] = {'T', 'M', 'O', 'P', 'R', '1', '\0', '\0'};
constexpr std::uint64_t kOperatorVersion = 1;

double slice_dot(const SliceFactorization& s, const ClusterIndexer& ix,
                 const VectorXd& v, const MatrixXd& vm) {
  double acc = 0.0;
  for (std::size_t k = 0; k < s.positions.size(); ++k) {
    const Index pos = s.positions[k];
    const double val = s.values[static_cast<Index>(k)];
    acc += val * v[pos];
    const Index dual = ix.swap_dual(pos);
    if (dual != pos) acc += val * v[dual];
  }
  if (s.r2() > 0) {
    acc += (s.u.cwiseProduct(vm * s.v.transpose())).sum();
  }
  return acc;
}

void slice_axpy(const SliceFactorization& s, const ClusterIndexer& ix, double coef,
                MatrixXd& smooth, VectorXd& out) {
  for (std::size_t k = 0; k < s.positions.size(); ++k) {
    const Index pos = s.positions[k];
    const double val = coef * s.values[static_cast<Index>(k)];
    out[pos] += val;
    const Index dual = ix.swap_dual(pos);
    if (dual != pos) out[dual] += val;
  }
  if (s.r2() > 0) {
    smooth.noalias() += s.u * (coef * s.v);
  }
}

MatrixXd reshape_factors(const ClusterIndexer& ix, const VectorXd& v) {
  const Index dn = ix.dn();
  MatrixXd vm(dn, dn);
  for (Index f1 = 0; f1 < dn; ++f1) {
    for (Index f2 = 0; f2 < dn; ++f2) vm(f1, f2) = v[ix.from_factors(f1, f2)];
  }
  return vm;
}

void write_slice(std::FILE* f, const SliceFactorization& s) {
  write_i64(f, s.owner);
  write_u64(f, s.is_row ? 1 : 0);
  write_u64(f, static_cast<std::uint64_t>(s.positions.size()));
  for (Index pos : s.positions) write_i64(f, pos);
  for (Index k = 0; k < s.values.size(); ++k) write_f64(f, s.values[k]);
  write_u64(f, static_cast<std::uint64_t>(s.r2()));
  for (Index c = 0; c < s.u.cols(); ++c) {
    for (Index r = 0; r < s.u.rows(); ++r) write_f64(f, s.u(r, c));
  }
  for (Index c = 0; c < s.v.cols(); ++c) {
    for (Index r = 0; r < s.v.rows(); ++r) write_f64(f, s.v(r, c));
  }
}

SliceFactorization read_slice(std::FILE* f, Index dn) {
  SliceFactorization s;
  s.owner = read_i64(f);
  s.is_row = read_u64(f) != 0;
  const std::uint64_t nnz = read_u64(f);
  s.positions.resize(nnz);
  for (std::uint64_t k = 0; k < nnz; ++k) s.positions[k] = read_i64(f);
  s.values.resize(static_cast<Index>(nnz));
  for (Index k = 0; k < s.values.size(); ++k) s.values[k] = read_f64(f);
  const Index r2 = static_cast<Index>(read_u64(f));
  s.u.resize(dn, r2);
  s.v.resize(r2, dn);
  for (Index c = 0; c < s.u.cols(); ++c) {
    for (Index r = 0; r < s.u.rows(); ++r) s.u(r, c) = read_f64(f);
  }
  for (Index c = 0; c < s.v.cols(); ++c) {
    for (Index r = 0; r < s.v.rows(); ++r) s.v(r, c) = read_f64(f);
  }
  return s;
}

}  // namespace

CompressedOperator build_compressed(const SamplePool& pool, const SiteBasis& basis,
                                    const BuildOptions& opts) {
  if (opts.r1 <= 0) throw ConfigError("build_compressed: r1 must be positive");
  if (opts.delta < 0) throw ConfigError("build_compressed: delta must be >= 0");
  if (opts.difference && !pool.stopped) {
    throw ConfigError("build_compressed: difference build needs a stopped pool");
  }

  CompressedOperator op;
  op.d = basis.d();
  op.n = basis.n();
  op.t = pool.t;
  op.measure_tag = pool.measure_tag;
  op.psd = opts.psd;
  op.difference = opts.difference;
  op.delta = opts.delta;
  op.ix = ClusterIndexer(basis.d(), basis.n());

  const FactorTables tables = build_factor_tables(pool, basis);
  std::unique_ptr<EntrySource> source;
  if (opts.difference) {
    source = std::make_unique<DiffEntrySource>(tables, op.ix);
  } else {
    source = std::make_unique<PoolEntrySource>(tables, op.ix);
  }

  MaxvolOptions mv;
  mv.r1 = opts.r1;
  mv.n_iter = opts.n_iter;
  mv.psd = opts.psd;
  mv.seed = opts.seed;
  mv.swap_tol = opts.swap_tol;
  mv.candidate_cap = opts.candidate_cap;
  const MaxvolResult pivots = maxvol_cross(*source, mv);
  op.rows = pivots.rows;
  op.cols = pivots.cols;

  const MatrixXd cross = source->block(op.rows, op.cols);
  op.core = core_pinv(cross, opts.core_cutoff);

  op.moments = estimate_first_moments(tables, op.ix);

  op.column_slices.reserve(op.cols.size());
  for (Index j : op.cols) {
    const VectorXd m = source->column(j);
    const double b = opts.difference ? op.moments.psi_src[j] - op.moments.psi_end[j]
                                     : op.moments.psi_end[j];
    op.column_slices.push_back(factor_slice(m, j, false, op.moments.phi_src, b,
                                            op.ix, opts.delta, opts.svd_tol,
                                            opts.max_r2));
  }
  if (!opts.psd) {
    op.row_slices.reserve(op.rows.size());
    for (Index i : op.rows) {
      // The estimator is duplicate-symmetrized, so the raw row values equal
      // the column values; only the first-moment correction differs (the row
      // split propagates the univariate moments and keeps <psi_i> raw).
      const VectorXd m = source->column(i);
      const VectorXd& a = opts.difference ? op.moments.phi_src : op.moments.phi_end;
      const double b = opts.difference ? op.moments.psi_src[i] - op.moments.psi_end[i]
                                       : op.moments.psi_src[i];
      op.row_slices.push_back(factor_slice(m, i, true, a, b, op.ix, opts.delta,
                                           opts.svd_tol, opts.max_r2));
    }
  }
  return op;
}

VectorXd matvec(const CompressedOperator& op, const VectorXd& v) {
  const Index size = op.ix.size();
  if (v.size() != size) throw ConfigError("matvec: vector length mismatch");
  const Index r1 = op.r1();
  const MatrixXd vm = reshape_factors(op.ix, v);
  VectorXd t1(r1);
  for (Index k = 0; k < r1; ++k) t1[k] = slice_dot(op.row_slice(k), op.ix, v, vm);
  const VectorXd t2 = op.core * t1;
  VectorXd out = VectorXd::Zero(size);
  MatrixXd smooth = MatrixXd::Zero(op.ix.dn(), op.ix.dn());
  for (Index k = 0; k < r1; ++k) slice_axpy(op.col_slice(k), op.ix, t2[k], smooth, out);
  const Index dn = op.ix.dn();
  for (Index f1 = 0; f1 < dn; ++f1) {
    for (Index f2 = 0; f2 < dn; ++f2) out[op.ix.from_factors(f1, f2)] += smooth(f1, f2);
  }
  return out;
}

VectorXd matvec_adjoint(const CompressedOperator& op, const VectorXd& v) {
  const Index size = op.ix.size();
  if (v.size() != size) throw ConfigError("matvec_adjoint: vector length mismatch");
  const Index r1 = op.r1();
  const MatrixXd vm = reshape_factors(op.ix, v);
  VectorXd t1(r1);
  for (Index k = 0; k < r1; ++k) t1[k] = slice_dot(op.col_slice(k), op.ix, v, vm);
  const VectorXd t2 = op.core.transpose() * t1;
  VectorXd out = VectorXd::Zero(size);
  MatrixXd smooth = MatrixXd::Zero(op.ix.dn(), op.ix.dn());
  for (Index k = 0; k < r1; ++k) slice_axpy(op.row_slice(k), op.ix, t2[k], smooth, out);
  const Index dn = op.ix.dn();
  for (Index f1 = 0; f1 < dn; ++f1) {
    for (Index f2 = 0; f2 < dn; ++f2) out[op.ix.from_factors(f1, f2)] += smooth(f1, f2);
  }
  return out;
}

Index stored_entry_count(const CompressedOperator& op) {
  Index count = static_cast<Index>(op.core.size());
  for (const auto& s : op.column_slices) count += s.stored_entries();
  if (!op.psd) {
    for (const auto& s : op.row_slices) count += s.stored_entries();
  }
  return count;
}

Index stored_entry_bound(const CompressedOperator& op) {
  Index r2_max = 0;
  for (const auto& s : op.column_slices) r2_max = std::max(r2_max, s.r2());
  for (const auto& s : op.row_slices) r2_max = std::max(r2_max, s.r2());
  const Index r1 = op.r1();
  return 8 * (r1 * r1 +
              static_cast<Index>(op.d) * op.n * r1 * (r2_max + op.delta));
}

MatrixXd dense_reconstruct(const CompressedOperator& op) {
  const Index size = op.ix.size();
  if (size > 4096) {
    throw ConfigError("dense_reconstruct: guarded to (dn)^2 <= 4096");
  }
  const Index r1 = op.r1();
  MatrixXd c(size, r1);
  MatrixXd r(r1, size);
  for (Index k = 0; k < r1; ++k) {
    c.col(k) = op.col_slice(k).reconstruct(op.ix);
    r.row(k) = op.row_slice(k).reconstruct(op.ix).transpose();
  }
  return c * op.core * r;
}

void save_operator(const CompressedOperator& op, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (f == nullptr) throw IoError("cannot open operator file for writing: " + path);
  write_bytes(f, kOperatorMagic, sizeof(kOperatorMagic));
  write_u64(f, kOperatorVersion);
  write_i64(f, op.d);
  write_i64(f, op.n);
  write_i64(f, op.r1());
  write_i64(f, op.delta);
  write_u64(f, op.psd ? 1 : 0);
  write_u64(f, op.difference ? 1 : 0);
  write_f64(f, op.t);
  write_u64(f, op.measure_tag.size());
  write_bytes(f, op.measure_tag.data(), op.measure_tag.size());
  for (Index i : op.rows) write_i64(f, i);
  for (Index j : op.cols) write_i64(f, j);
  for (Index i = 0; i < op.core.rows(); ++i) {
    for (Index j = 0; j < op.core.cols(); ++j) write_f64(f, op.core(i, j));
  }
  const auto write_vec = [f](const VectorXd& v) {
    write_u64(f, static_cast<std::uint64_t>(v.size()));
    for (Index k = 0; k < v.size(); ++k) write_f64(f, v[k]);
  };
  write_vec(op.moments.phi_src);
  write_vec(op.moments.phi_end);
  write_vec(op.moments.psi_src);
  write_vec(op.moments.psi_end);
  write_u64(f, op.column_slices.size());
  for (const auto& s : op.column_slices) write_slice(f, s);
  write_u64(f, op.row_slices.size());
  for (const auto& s : op.row_slices) write_slice(f, s);
  std::fclose(f);
}

CompressedOperator load_operator(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (f == nullptr) throw IoError("cannot open operator file: " + path);
  char magic[8];
  read_bytes(f, magic, sizeof(magic));
  if (std::memcmp(magic, kOperatorMagic, sizeof(magic)) != 0) {
    std::fclose(f);
    throw IoError("not an operator file: " + path);
  }
  CompressedOperator op;
  try {
    const std::uint64_t version = read_u64(f);
    if (version != kOperatorVersion) throw IoError("unsupported operator file version");
    op.d = static_cast<int>(read_i64(f));
    op.n = static_cast<int>(read_i64(f));
    const Index r1 = read_i64(f);
    op.delta = static_cast<int>(read_i64(f));
    op.psd = read_u64(f) != 0;
    op.difference = read_u64(f) != 0;
    op.t = read_f64(f);
    if (op.d <= 0 || op.n <= 0 || r1 <= 0) throw IoError("corrupt operator header");
    const std::uint64_t tag_len = read_u64(f);
    if (tag_len > (1u << 20)) throw IoError("corrupt operator header (tag length)");
    op.measure_tag.resize(tag_len);
    if (tag_len > 0) read_bytes(f, op.measure_tag.data(), tag_len);
    op.ix = ClusterIndexer(op.d, op.n);
    const Index dn = op.ix.dn();
    op.rows.resize(static_cast<std::size_t>(r1));
    for (auto& i : op.rows) i = read_i64(f);
    op.cols.resize(static_cast<std::size_t>(r1));
    for (auto& j : op.cols) j = read_i64(f);
    op.core.resize(r1, r1);
    for (Index i = 0; i < r1; ++i) {
      for (Index j = 0; j < r1; ++j) op.core(i, j) = read_f64(f);
    }
    const auto read_vec = [f]() {
      const std::uint64_t len = read_u64(f);
      if (len > (1u << 28)) throw IoError("corrupt operator file (vector length)");
      VectorXd v(static_cast<Index>(len));
      for (Index k = 0; k < v.size(); ++k) v[k] = read_f64(f);
      return v;
    };
    op.moments.phi_src = read_vec();
    op.moments.phi_end = read_vec();
    op.moments.psi_src = read_vec();
    op.moments.psi_end = read_vec();
    const std::uint64_t n_cols = read_u64(f);
    op.column_slices.reserve(n_cols);
    for (std::uint64_t k = 0; k < n_cols; ++k) op.column_slices.push_back(read_slice(f, dn));
    const std::uint64_t n_rows = read_u64(f);
    op.row_slices.reserve(n_rows);
    for (std::uint64_t k = 0; k < n_rows; ++k) op.row_slices.push_back(read_slice(f, dn));
  } catch (...) {
    std::fclose(f);
    throw;
  }
  std::fclose(f);
  return op;
}

}  // namespace tmm
