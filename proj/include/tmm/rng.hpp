#pragma once

#include <cmath>
#include <cstdint>

namespace tmm {

// Counter-based generator (Philox4x32-10). A draw is a pure function of
// (global seed, purpose, stream id, counter), so any trajectory or sample can
// be produced independently of scheduling order or thread count: give every
// logical task its own stream and let it advance its private counter.
//
// Key layout: key = seed64 XOR (purpose tag in the high bits);
// counter block = {counter_lo, counter_hi, stream_lo, stream_hi}.
enum class RngPurpose : std::uint64_t {
  SourceSample = 1,
  Trajectory = 2,
  EquilibriumChain = 3,
  BoundarySample = 4,
  Probe = 5,
  PivotSearch = 6,
  TestPoint = 7,
  Reference = 8,
};

class CounterRng {
 public:
  CounterRng(std::uint64_t seed, RngPurpose purpose, std::uint64_t stream)
      : stream_(stream), counter_(0) {
    const std::uint64_t key = seed ^ (static_cast<std::uint64_t>(purpose) << 56);
    key_[0] = static_cast<std::uint32_t>(key);
    key_[1] = static_cast<std::uint32_t>(key >> 32);
  }

  // Four uniform 32-bit words per block; cached between calls.
  std::uint32_t next_u32() {
    if (have_ == 0) {
      philox_block();
      have_ = 4;
    }
    return out_[4 - have_--];
  }

  // Uniform in (0,1): offset keeps the value strictly inside the interval.
  double next_uniform() {
    return (static_cast<double>(next_u32()) + 0.5) * 0x1p-32;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_uniform(); }

  // Box-Muller pair; callers consuming single normals get the partner next.
  double next_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  void fill_normal(double* out, int count) {
    for (int i = 0; i < count; ++i) out[i] = next_normal();
  }

  std::uint64_t stream() const { return stream_; }

 private:
  void philox_block() {
    std::uint32_t c0 = static_cast<std::uint32_t>(counter_);
    std::uint32_t c1 = static_cast<std::uint32_t>(counter_ >> 32);
    std::uint32_t c2 = static_cast<std::uint32_t>(stream_);
    std::uint32_t c3 = static_cast<std::uint32_t>(stream_ >> 32);
    std::uint32_t k0 = key_[0], k1 = key_[1];
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = 0xD2511F53ull * c0;
      const std::uint64_t p1 = 0xCD9E8D57ull * c2;
      const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
      const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
      const std::uint32_t n0 = hi1 ^ c1 ^ k0;
      const std::uint32_t n1 = lo1;
      const std::uint32_t n2 = hi0 ^ c3 ^ k1;
      const std::uint32_t n3 = lo0;
      c0 = n0; c1 = n1; c2 = n2; c3 = n3;
      k0 += 0x9E3779B9u;  // golden-ratio Weyl increments
      k1 += 0xBB67AE85u;
    }
    out_[0] = c0; out_[1] = c1; out_[2] = c2; out_[3] = c3;
    ++counter_;
  }

  std::uint32_t key_[2];
  std::uint64_t stream_;
  std::uint64_t counter_;
  std::uint32_t out_[4] = {0, 0, 0, 0};
  int have_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace tmm
