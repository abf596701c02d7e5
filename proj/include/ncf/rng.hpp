#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

#include "ncf/lattice.hpp"

namespace ncf {

/// Philox 4x32-10 counter block cipher (Salmon et al., SC 2011).
/// Purely functional: value = philox(counter, key). Used as the PRF behind
/// every random quantity in the library so that any variable is addressable
/// by (seed, stream, coordinate) without stored generator state.
namespace philox {

inline constexpr std::uint32_t kW32A = 0x9E3779B9u;
inline constexpr std::uint32_t kW32B = 0xBB67AE85u;
inline constexpr std::uint32_t kM4x32A = 0xD2511F53u;
inline constexpr std::uint32_t kM4x32B = 0xCD9E8D57u;

using Block = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

inline void round_once(Block& ctr, const Key& key) {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kM4x32A) * ctr[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kM4x32B) * ctr[2];
  const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
  const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
  const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
  ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

inline Block encrypt(Block ctr, Key key) {
  for (int r = 0; r < 10; ++r) {
    round_once(ctr, key);
    key[0] += kW32A;
    key[1] += kW32B;
  }
  return ctr;
}

}  // namespace philox

namespace rng {

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// 128 bits of PRF output for a tagged lattice coordinate.
///
/// The first three coordinate words go into the counter directly, so the map
/// (tag, coordinate) -> counter is injective for kappa <= 3 and coordinates
/// within 32-bit range (the tested regime). Higher dimensions and high bits
/// are folded into the remaining counter word by a splitmix chain.
inline philox::Block coord_block(std::uint64_t seed, std::uint32_t tag, const Coord& c) {
  philox::Block ctr{0, 0, 0, tag};
  std::uint64_t fold = static_cast<std::uint64_t>(c.dim);
  for (int i = 0; i < c.dim; ++i) {
    const std::uint64_t w = static_cast<std::uint64_t>(c.x[i]);
    if (i < 3) {
      ctr[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(w);
      fold = splitmix64(fold ^ (w >> 32));
    } else {
      fold = splitmix64(fold ^ w);
    }
  }
  philox::Key key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  key[0] ^= static_cast<std::uint32_t>(fold);
  key[1] ^= static_cast<std::uint32_t>(fold >> 32);
  return philox::encrypt(ctr, key);
}

inline std::uint64_t to_u64(std::uint32_t lo, std::uint32_t hi) {
  return (static_cast<std::uint64_t>(hi) << 32) | lo;
}

/// Uniform double in [0,1) from 64 bits (53-bit mantissa resolution).
inline double to_unit(std::uint64_t w) { return static_cast<double>(w >> 11) * 0x1.0p-53; }

/// Uniform double in (0,1]; safe as a log argument.
inline double to_unit_open(std::uint64_t w) {
  return (static_cast<double>(w >> 11) + 1.0) * 0x1.0p-53;
}

/// Standard normal via Box-Muller from one 128-bit block.
inline double gaussian_from_block(const philox::Block& b) {
  const double u1 = to_unit_open(to_u64(b[0], b[1]));
  const double u2 = to_unit(to_u64(b[2], b[3]));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline double uniform_from_block(const philox::Block& b, double a, double bnd) {
  return a + (bnd - a) * to_unit(to_u64(b[0], b[1]));
}

/// Deterministic seed split: replicate r of a named experiment gets its own
/// master seed. Re-running one replicate in isolation reproduces its values.
inline std::uint64_t split_seed(std::uint64_t root, std::string_view experiment_id, std::uint64_t replicate) {
  const std::uint64_t eid = fnv1a64(experiment_id);
  philox::Block ctr{static_cast<std::uint32_t>(eid), static_cast<std::uint32_t>(eid >> 32),
                    static_cast<std::uint32_t>(replicate), static_cast<std::uint32_t>(replicate >> 32)};
  philox::Key key{static_cast<std::uint32_t>(root), static_cast<std::uint32_t>(root >> 32)};
  const philox::Block out = philox::encrypt(ctr, key);
  return to_u64(out[0], out[1]);
}

}  // namespace rng
}  // namespace ncf
