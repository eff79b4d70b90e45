#pragma once

#include <string>

#include "tmm/langevin.hpp"

namespace tmm {

// Shared short-trajectory sample pool: N_src sources, N_traj endpoints each,
// all entry estimates reuse it. Endpoints are stored column-wise, replica-
// major within each source: column i*n_traj + l is endpoint l of source i.
//
// flags (per endpoint): 0 = not absorbed by the lag, 1/2 = absorbed into
// regions A/B at t AND tau (endpoint frozen inside the ball). For stopped
// pools, `eventual` additionally records absorption within the configured
// horizon (same codes); it stays in memory only and is not serialized.
struct SamplePool {
  int d = 0;
  Index n_src = 0;
  Index n_traj = 0;
  double t = 0.0;
  bool stopped = false;
  std::uint64_t seed = 0;
  std::string measure_tag;
  MatrixXd sources;            // d x n_src
  MatrixXd endpoints;          // d x (n_src * n_traj)
  std::vector<std::uint8_t> flags;
  std::vector<std::uint8_t> eventual;
  std::vector<std::uint8_t> source_flags;  // region of each source (stopped pools)

  Index n_endpoints() const { return n_src * n_traj; }
};

// Endpoints simulated from given sources; trajectory (i,l) uses rng stream
// i*n_traj + l, so the pool is identical under any scheduling.
SamplePool build_pool(const GLPotential& pot, const MatrixXd& sources, Index n_traj,
                      double t, const SimConfig& cfg, std::uint64_t seed,
                      std::string measure_tag = "");

// Stopped variant: absorption at the regions, continuation to `horizon` for
// the eventual flags. Sources already inside a region keep all endpoints at
// the source with the matching flag.
SamplePool build_stopped_pool(const GLPotential& pot, const MatrixXd& sources,
                              Index n_traj, double t, double horizon,
                              const StopRegions& regions, const SimConfig& cfg,
                              std::uint64_t seed, std::string measure_tag = "");

// Lag-zero stopped pool over the same sources (endpoints = sources, n_traj = 1);
// used for time-difference estimators.
SamplePool zero_lag_stopped_pool(const MatrixXd& sources, const StopRegions& regions,
                                 std::uint64_t seed, std::string measure_tag = "");

// Binary round-trip. Layout: magic "TMPOOL1", then d, n_src, n_traj as 64-bit
// little-endian integers, t as an IEEE-754 double, stopped flag and seed as
// 64-bit integers, then row-major sources, endpoints, and one absorption byte
// per endpoint.
void save_pool(const SamplePool& pool, const std::string& path);
SamplePool load_pool(const std::string& path);

// Source region classification is not serialized; rebuild it after loading a
// stopped pool when the regions are known.
void refresh_source_flags(SamplePool& pool, const StopRegions& regions);

// Columnar text dump, one row per endpoint:
// source_id, replica_id, absorbed, x_1..x_d with 17 significant digits.
void dump_trajectories(const SamplePool& pool, const std::string& path,
                       const std::string& manifest_hash);

}  // namespace tmm
