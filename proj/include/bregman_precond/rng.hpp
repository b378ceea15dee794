#pragma once

// Counter-based random numbers.
//
// Philox4x32-10 (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3")
// keyed by a 64-bit seed. The 128-bit counter is split into a 64-bit stream id
// (trial index, matrix id, ...) and a 64-bit position, so any entry of any
// stream can be produced independently of evaluation order or thread count.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "types.hpp"

namespace bprec {

class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;

  explicit Philox4x32(std::uint64_t seed)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  Block operator()(std::uint64_t stream, std::uint64_t position) const {
    Block ctr{static_cast<std::uint32_t>(position), static_cast<std::uint32_t>(position >> 32),
              static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    std::array<std::uint32_t, 2> key = key_;
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  std::array<std::uint32_t, 2> key_;
};

/// Deterministic standard-normal source. `normal(stream, i)` is a pure
/// function of (seed, stream, i): each Philox block yields two uniforms and
/// Box-Muller turns them into two normals (positions 2k and 2k+1).
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed, std::uint64_t stream = 0)
      : gen_(seed), stream_(stream) {}

  double normal(std::uint64_t position) const {
    const auto block = gen_(stream_, position / 2);
    const double u1 = to_open_unit(block[0], block[1]);
    const double u2 = to_unit(block[2], block[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return position % 2 == 0 ? radius * std::cos(angle) : radius * std::sin(angle);
  }

  double uniform(std::uint64_t position) const {
    const auto block = gen_(stream_, position / 2);
    return position % 2 == 0 ? to_unit(block[0], block[1]) : to_unit(block[2], block[3]);
  }

  /// Column-major fill: entry (i, j) takes position j * rows + i.
  Matrix matrix(Index rows, Index cols) const {
    Matrix out(rows, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i)
        out(i, j) = normal(static_cast<std::uint64_t>(j) * static_cast<std::uint64_t>(rows) +
                           static_cast<std::uint64_t>(i));
    return out;
  }

  Vector vector(Index size) const { return matrix(size, 1).col(0); }

 private:
  // [0, 1) with 53 random bits.
  static double to_unit(std::uint32_t lo, std::uint32_t hi) {
    const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 11;
    return static_cast<double>(bits) * 0x1.0p-53;
  }
  // (0, 1]
  static double to_open_unit(std::uint32_t lo, std::uint32_t hi) {
    const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
  }

  Philox4x32 gen_;
  std::uint64_t stream_;
};

/// Derive an independent sub-seed for (seed, trial); SplitMix64 finalizer.
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t trial) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (trial + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace bprec
