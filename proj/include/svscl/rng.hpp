#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace svscl {

/// Philox4x32-10 counter-based generator (Salmon et al. construction).
/// Stateless: every output block is a pure function of (counter, key).
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kW0;
        key[1] += kW1;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53u;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u;
  static constexpr std::uint32_t kW1 = 0xBB67AE85u;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Gaussian stream addressed by (step, mode). Two streams with equal
/// (seed, stream_id) produce identical increments, which is how coupled
/// trajectories share a noise path.
class NoiseStream {
 public:
  NoiseStream(std::uint64_t seed, std::uint64_t stream_id) {
    const std::uint64_t k = splitmix64(seed ^ splitmix64(stream_id + 0x632BE59BD9B4E019ull));
    key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
  }

  /// Standard normal variate for the given step and mode.
  double normal(std::uint64_t step, std::uint32_t mode) const {
    const auto r = Philox4x32::generate(
        {static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32), mode, 0u}, key_);
    // 53-bit uniforms in (0,1]
    const std::uint64_t a = (static_cast<std::uint64_t>(r[0]) << 32 | r[1]) >> 11;
    const std::uint64_t b = (static_cast<std::uint64_t>(r[2]) << 32 | r[3]) >> 11;
    const double u1 = (static_cast<double>(a) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(b) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Uniform variate in [0,1) on a separate counter lane.
  double uniform(std::uint64_t step, std::uint32_t mode) const {
    const auto r = Philox4x32::generate(
        {static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32), mode, 1u}, key_);
    const std::uint64_t a = (static_cast<std::uint64_t>(r[0]) << 32 | r[1]) >> 11;
    return static_cast<double>(a) * 0x1.0p-53;
  }

 private:
  Philox4x32::Key key_;
};

}  // namespace svscl
