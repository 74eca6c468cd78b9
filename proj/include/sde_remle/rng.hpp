#pragma once

// Counter-based random numbers. Every variate is a pure function of
// (seed, stream_id, replicate_id, lane, index), so results never depend on
// which worker draws them or in what order.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace sde_remle {

/// Philox4x32-10 block function (Salmon et al., SC'11).
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter block(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Independent sub-sequences inside one stream.
enum class Lane : std::uint32_t { brownian = 0, random_effect = 1 };

struct NormalPair {
  double first;
  double second;
};

/// Addressable standard-normal stream for one (seed, stream, replicate).
///
/// The Philox key is a bijective mix of (seed, replicate_id), so for a fixed
/// seed distinct replicates get distinct keys. The counter carries the
/// stream id (64 bits), the pair index (56 bits) and the lane (8 bits).
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  std::uint64_t replicate_id = 0;

  /// Two uniforms in (0, 1] from one Philox block.
  std::array<double, 2> uniform_pair(Lane lane, std::uint64_t pair) const noexcept {
    const std::uint64_t k = splitmix64(seed + splitmix64(replicate_id));
    const Philox4x32::Key key{static_cast<std::uint32_t>(k),
                              static_cast<std::uint32_t>(k >> 32)};
    const std::uint64_t hi =
        ((pair >> 32) & 0x00FFFFFFull) |
        (static_cast<std::uint64_t>(lane) << 24);
    const Philox4x32::Counter ctr{static_cast<std::uint32_t>(pair),
                                  static_cast<std::uint32_t>(hi),
                                  static_cast<std::uint32_t>(stream_id),
                                  static_cast<std::uint32_t>(stream_id >> 32)};
    const auto out = Philox4x32::block(ctr, key);
    return {to_unit(out[0], out[1]), to_unit(out[2], out[3])};
  }

  /// Box-Muller pair: normals 2*pair and 2*pair+1 of the lane.
  NormalPair normal_pair(Lane lane, std::uint64_t pair) const noexcept {
    const auto [u1, u2] = uniform_pair(lane, pair);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(angle), r * std::sin(angle)};
  }

  double normal(Lane lane, std::uint64_t index) const noexcept {
    const auto p = normal_pair(lane, index / 2);
    return (index % 2 == 0) ? p.first : p.second;
  }

 private:
  // 53 random bits mapped to (0, 1]; never 0 so log(u) is finite.
  static double to_unit(std::uint32_t a, std::uint32_t b) noexcept {
    const std::uint64_t bits =
        ((std::uint64_t{a} << 32) | std::uint64_t{b}) >> 11;
    return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
  }
};

/// Sequential reader over one lane; caches the second normal of each pair.
class NormalSequence {
 public:
  NormalSequence(const RngStream& stream, Lane lane) : stream_(stream), lane_(lane) {}

  double next() noexcept {
    if (index_ % 2 == 0) cached_ = stream_.normal_pair(lane_, index_ / 2);
    const double z = (index_ % 2 == 0) ? cached_.first : cached_.second;
    ++index_;
    return z;
  }

 private:
  RngStream stream_;
  Lane lane_;
  std::uint64_t index_ = 0;
  NormalPair cached_{0.0, 0.0};
};

}  // namespace sde_remle
