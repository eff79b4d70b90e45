#pragma once

#include "tmm/basis.hpp"
#include "tmm/gl_model.hpp"
#include "tmm/rng.hpp"
#include "tmm/types.hpp"

namespace tmm {

// Overdamped Langevin dX = -grad V dt + sqrt(2/beta) dW, Euler-Maruyama with
// reflecting walls at the box [-L, L]^d. A lag t is split into
// ceil(t/dt) equal substeps so the lag is hit exactly.
struct SimConfig {
  double beta = 1.0;
  double dt = 1e-3;
  double L = 2.0;
};

// One Euler-Maruyama step given precomputed drift and noise; pure function.
// noise must be sqrt(2 dt / beta) * standard normals.
inline double reflect_into(double v, double L) {
  // Fold into [-L, L] by repeated wall reflection (noise << L, so few passes).
  while (v < -L || v > L) {
    if (v > L) v = 2.0 * L - v;
    if (v < -L) v = -2.0 * L - v;
  }
  return v;
}

void step_em(double* x, const double* drift, const double* noise, int d, double dt,
             double L);

int steps_for_lag(double t, double dt);

// Endpoint of one trajectory of lag t started at x0; the rng stream fully
// determines the noise, independent of call order elsewhere.
VectorXd simulate_endpoint(const GLPotential& pot, const VectorXd& x0, double t,
                           const SimConfig& cfg, CounterRng& rng);

// Trajectory with absorption at the stop regions (checked after each step) and
// continuation to `horizon` for the eventual-absorption record.
//   y_at_lag : state at t AND tau (frozen at first entry),
//   flag_at_lag : 0 none / 1 first ball / 2 second ball, at the lag,
//   eventual_flag : same codes at min(horizon, absorption); 0 = never absorbed.
struct StoppedTraj {
  VectorXd y_at_lag;
  int flag_at_lag = 0;
  int eventual_flag = 0;
};
StoppedTraj simulate_stopped(const GLPotential& pot, const VectorXd& x0, double t,
                             double horizon, const StopRegions& regions,
                             const SimConfig& cfg, CounterRng& rng);

// Equilibrium sampler: `chains` independent walkers with scattered starts,
// burn_steps of warmup, then one retained state every thin_steps. Samples are
// collected round-robin over chains, so the output ordering is schedule-free.
MatrixXd sample_equilibrium(const GLPotential& pot, const SimConfig& cfg, Index count,
                            std::uint64_t seed, int chains = 32,
                            Index burn_steps = 100000, Index thin_steps = 100);

// Mean-field sources: column i is drawn with stream id i (purpose SourceSample).
MatrixXd sample_mean_field(const MeanFieldMeasure& mu, Index count, std::uint64_t seed);

}  // namespace tmm
