#include "tmm/pool.hpp"

#include <cstring>

#include "tmm/io.hpp"

namespace tmm {

namespace {

void check_pool_shape(const MatrixXd& sources, Index n_traj) {
  if (sources.cols() == 0) throw ConfigError("pool needs at least one source");
  if (n_traj <= 0) throw ConfigError("pool needs n_traj >= 1");
}

}  // namespace

SamplePool build_pool(const GLPotential& pot, const MatrixXd& sources, Index n_traj,
                      double t, const SimConfig& cfg, std::uint64_t seed,
                      std::string measure_tag) {
  check_pool_shape(sources, n_traj);
  SamplePool pool;
  pool.d = static_cast<int>(sources.rows());
  pool.n_src = sources.cols();
  pool.n_traj = n_traj;
  pool.t = t;
  pool.stopped = false;
  pool.seed = seed;
  pool.measure_tag = std::move(measure_tag);
  pool.sources = sources;
  pool.endpoints.resize(pool.d, pool.n_endpoints());
  pool.flags.assign(static_cast<std::size_t>(pool.n_endpoints()), 0);
  for (Index i = 0; i < pool.n_src; ++i) {
    for (Index l = 0; l < n_traj; ++l) {
      CounterRng rng(seed, RngPurpose::Trajectory,
                     static_cast<std::uint64_t>(i * n_traj + l));
      pool.endpoints.col(i * n_traj + l) =
          simulate_endpoint(pot, sources.col(i), t, cfg, rng);
    }
  }
  return pool;
}

SamplePool build_stopped_pool(const GLPotential& pot, const MatrixXd& sources,
                              Index n_traj, double t, double horizon,
                              const StopRegions& regions, const SimConfig& cfg,
                              std::uint64_t seed, std::string measure_tag) {
  check_pool_shape(sources, n_traj);
  if (horizon < t) throw ConfigError("stopped pool horizon must cover the lag");
  SamplePool pool;
  pool.d = static_cast<int>(sources.rows());
  pool.n_src = sources.cols();
  pool.n_traj = n_traj;
  pool.t = t;
  pool.stopped = true;
  pool.seed = seed;
  pool.measure_tag = std::move(measure_tag);
  pool.sources = sources;
  pool.endpoints.resize(pool.d, pool.n_endpoints());
  pool.flags.assign(static_cast<std::size_t>(pool.n_endpoints()), 0);
  pool.eventual.assign(static_cast<std::size_t>(pool.n_endpoints()), 0);
  pool.source_flags.assign(static_cast<std::size_t>(pool.n_src), 0);
  StoppedTraj traj;
  for (Index i = 0; i < pool.n_src; ++i) {
    pool.source_flags[static_cast<std::size_t>(i)] =
        static_cast<std::uint8_t>(regions.which(sources.col(i)));
    for (Index l = 0; l < n_traj; ++l) {
      CounterRng rng(seed, RngPurpose::Trajectory,
                     static_cast<std::uint64_t>(i * n_traj + l));
      traj = simulate_stopped(pot, sources.col(i), t, horizon, regions, cfg, rng);
      pool.endpoints.col(i * n_traj + l) = traj.y_at_lag;
      pool.flags[static_cast<std::size_t>(i * n_traj + l)] =
          static_cast<std::uint8_t>(traj.flag_at_lag);
      pool.eventual[static_cast<std::size_t>(i * n_traj + l)] =
          static_cast<std::uint8_t>(traj.eventual_flag);
    }
  }
  return pool;
}

SamplePool zero_lag_stopped_pool(const MatrixXd& sources, const StopRegions& regions,
                                 std::uint64_t seed, std::string measure_tag) {
  check_pool_shape(sources, 1);
  SamplePool pool;
  pool.d = static_cast<int>(sources.rows());
  pool.n_src = sources.cols();
  pool.n_traj = 1;
  pool.t = 0.0;
  pool.stopped = true;
  pool.seed = seed;
  pool.measure_tag = std::move(measure_tag);
  pool.sources = sources;
  pool.endpoints = sources;
  pool.flags.assign(static_cast<std::size_t>(pool.n_src), 0);
  pool.eventual.assign(static_cast<std::size_t>(pool.n_src), 0);
  pool.source_flags.assign(static_cast<std::size_t>(pool.n_src), 0);
  for (Index i = 0; i < pool.n_src; ++i) {
    auto r = static_cast<std::uint8_t>(regions.which(sources.col(i)));
    pool.source_flags[static_cast<std::size_t>(i)] = r;
    pool.flags[static_cast<std::size_t>(i)] = r;
    pool.eventual[static_cast<std::size_t>(i)] = r;
  }
  return pool;
}

namespace {
constexpr char kPoolMagic[8] = {'T', 'M', 'P', 'O', 'O', 'L', '1', '\0'};

void write_matrix_row_major(std::FILE* f, const MatrixXd& m) {
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) write_f64(f, m(r, c));
}

void read_matrix_row_major(std::FILE* f, MatrixXd& m) {
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) m(r, c) = read_f64(f);
}
}  // namespace

void save_pool(const SamplePool& pool, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw IoError("cannot open for writing: " + path);
  write_bytes(f, kPoolMagic, 8);
  write_i64(f, pool.d);
  write_i64(f, pool.n_src);
  write_i64(f, pool.n_traj);
  write_f64(f, pool.t);
  write_u64(f, pool.stopped ? 1 : 0);
  write_u64(f, pool.seed);
  std::uint64_t tag_len = pool.measure_tag.size();
  write_u64(f, tag_len);
  write_bytes(f, pool.measure_tag.data(), pool.measure_tag.size());
  write_matrix_row_major(f, pool.sources);
  write_matrix_row_major(f, pool.endpoints);
  write_bytes(f, pool.flags.data(), pool.flags.size());
  std::fclose(f);
}

SamplePool load_pool(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw IoError("cannot open: " + path);
  char magic[8];
  read_bytes(f, magic, 8);
  if (std::memcmp(magic, kPoolMagic, 8) != 0) {
    std::fclose(f);
    throw IoError("not a sample pool file: " + path);
  }
  SamplePool pool;
  pool.d = static_cast<int>(read_i64(f));
  pool.n_src = read_i64(f);
  pool.n_traj = read_i64(f);
  pool.t = read_f64(f);
  pool.stopped = read_u64(f) != 0;
  pool.seed = read_u64(f);
  std::uint64_t tag_len = read_u64(f);
  if (tag_len > (1u << 20)) {
    std::fclose(f);
    throw IoError("corrupt pool header: " + path);
  }
  pool.measure_tag.resize(tag_len);
  if (tag_len > 0) read_bytes(f, pool.measure_tag.data(), tag_len);
  if (pool.d <= 0 || pool.n_src <= 0 || pool.n_traj <= 0) {
    std::fclose(f);
    throw IoError("corrupt pool header: " + path);
  }
  pool.sources.resize(pool.d, pool.n_src);
  pool.endpoints.resize(pool.d, pool.n_endpoints());
  pool.flags.assign(static_cast<std::size_t>(pool.n_endpoints()), 0);
  read_matrix_row_major(f, pool.sources);
  read_matrix_row_major(f, pool.endpoints);
  read_bytes(f, pool.flags.data(), pool.flags.size());
  std::fclose(f);
  return pool;
}

void refresh_source_flags(SamplePool& pool, const StopRegions& regions) {
  pool.source_flags.assign(static_cast<std::size_t>(pool.n_src), 0);
  for (Index i = 0; i < pool.n_src; ++i)
    pool.source_flags[static_cast<std::size_t>(i)] =
        static_cast<std::uint8_t>(regions.which(pool.sources.col(i)));
}

void dump_trajectories(const SamplePool& pool, const std::string& path,
                       const std::string& manifest_hash) {
  std::vector<std::string> cols = {"source_id", "replica_id", "absorbed"};
  for (int k = 1; k <= pool.d; ++k) cols.push_back("x_" + std::to_string(k));
  ColumnarWriter w(path, manifest_hash, cols);
  for (Index i = 0; i < pool.n_src; ++i) {
    for (Index l = 0; l < pool.n_traj; ++l) {
      Index col = i * pool.n_traj + l;
      w.field(static_cast<std::int64_t>(i));
      w.field(static_cast<std::int64_t>(l));
      w.field(static_cast<std::int64_t>(pool.flags[static_cast<std::size_t>(col)]));
      for (int k = 0; k < pool.d; ++k) w.field(pool.endpoints(k, col));
      w.end_row();
    }
  }
}

}  // namespace tmm
