#include "tmm/langevin.hpp"

#include <cmath>

namespace tmm {

void step_em(double* x, const double* drift, const double* noise, int d, double dt,
             double L) {
  for (int k = 0; k < d; ++k)
    x[k] = reflect_into(x[k] + drift[k] * dt + noise[k], L);
}

int steps_for_lag(double t, double dt) {
  if (t < 0.0 || dt <= 0.0) throw ConfigError("lag and dt must be positive");
  if (t == 0.0) return 0;
  return static_cast<int>(std::ceil(t / dt - 1e-12));
}

namespace {

// Shared inner loop: runs `steps` EM steps of size dt in place.
inline void run_steps(const GLPotential& pot, double* x, int steps, double dt,
                      double sigma, double L, CounterRng& rng, double* gbuf,
                      double* nbuf) {
  const int d = pot.d();
  for (int s = 0; s < steps; ++s) {
    pot.gradient(x, gbuf);
    rng.fill_normal(nbuf, d);
    for (int k = 0; k < d; ++k)
      x[k] = reflect_into(x[k] - gbuf[k] * dt + sigma * nbuf[k], L);
  }
}

}  // namespace

VectorXd simulate_endpoint(const GLPotential& pot, const VectorXd& x0, double t,
                           const SimConfig& cfg, CounterRng& rng) {
  const int d = pot.d();
  const int steps = steps_for_lag(t, cfg.dt);
  if (steps == 0) return x0;
  const double dt = t / steps;
  const double sigma = std::sqrt(2.0 * dt / cfg.beta);
  VectorXd x = x0;
  VectorXd g(d), z(d);
  run_steps(pot, x.data(), steps, dt, sigma, cfg.L, rng, g.data(), z.data());
  return x;
}

StoppedTraj simulate_stopped(const GLPotential& pot, const VectorXd& x0, double t,
                             double horizon, const StopRegions& regions,
                             const SimConfig& cfg, CounterRng& rng) {
  const int d = pot.d();
  StoppedTraj out;
  const int hit0 = regions.which(x0);
  if (hit0 != 0) {
    // Source already inside a region: every endpoint is the source itself.
    out.y_at_lag = x0;
    out.flag_at_lag = hit0;
    out.eventual_flag = hit0;
    return out;
  }
  const int lag_steps = steps_for_lag(t, cfg.dt);
  const double dt = lag_steps > 0 ? t / lag_steps : cfg.dt;
  const double sigma = std::sqrt(2.0 * dt / cfg.beta);
  const Index total_steps =
      lag_steps + static_cast<Index>(std::ceil(std::max(0.0, horizon - t) / dt));
  VectorXd x = x0, g(d), z(d);
  out.y_at_lag = x0;  // correct for lag_steps == 0; overwritten otherwise
  for (Index s = 0; s < total_steps; ++s) {
    pot.gradient(x.data(), g.data());
    rng.fill_normal(z.data(), d);
    for (int k = 0; k < d; ++k)
      x[k] = reflect_into(x[k] - g[k] * dt + sigma * z[k], cfg.L);
    const int hit = regions.which(x);
    if (hit != 0) {
      out.eventual_flag = hit;
      if (s < lag_steps) {  // frozen at absorption before the lag
        out.y_at_lag = x;
        out.flag_at_lag = hit;
      }
      return out;
    }
    if (s + 1 == lag_steps) out.y_at_lag = x;  // lag reached unabsorbed
  }
  return out;
}

MatrixXd sample_equilibrium(const GLPotential& pot, const SimConfig& cfg, Index count,
                            std::uint64_t seed, int chains, Index burn_steps,
                            Index thin_steps) {
  const int d = pot.d();
  MatrixXd out(d, count);
  const double sigma = std::sqrt(2.0 * cfg.dt / cfg.beta);
  for (int c = 0; c < chains; ++c) {
    CounterRng rng(seed, RngPurpose::EquilibriumChain, static_cast<std::uint64_t>(c));
    VectorXd x(d), g(d), z(d);
    for (int k = 0; k < d; ++k) x[k] = rng.uniform(-cfg.L, cfg.L);  // scattered start
    run_steps(pot, x.data(), static_cast<int>(burn_steps), cfg.dt, sigma, cfg.L, rng,
              g.data(), z.data());
    for (Index i = c; i < count; i += chains) {
      run_steps(pot, x.data(), static_cast<int>(thin_steps), cfg.dt, sigma, cfg.L, rng,
                g.data(), z.data());
      out.col(i) = x;
    }
  }
  return out;
}

MatrixXd sample_mean_field(const MeanFieldMeasure& mu, Index count, std::uint64_t seed) {
  MatrixXd out(mu.d(), count);
  for (Index i = 0; i < count; ++i) {
    CounterRng rng(seed, RngPurpose::SourceSample, static_cast<std::uint64_t>(i));
    out.col(i) = mu.sample_point(rng);
  }
  return out;
}

}  // namespace tmm
