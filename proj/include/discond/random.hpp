// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace discond {

/// Counter-based random source (Philox4x32-10). Output depends only on
/// (seed, stream, counter), so identical seeds and call sequences give
/// identical values on every platform. Gaussian draws use Box-Muller on the
/// counter stream.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64() noexcept;
  /// Uniform on the open interval (0, 1) with 53-bit resolution.
  double uniform() noexcept;
  double normal() noexcept;
  /// Uniform integer in [0, n); n > 0. Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n) noexcept;

  void fill_normal(std::span<float> out) noexcept;
  void fill_uniform(std::span<float> out) noexcept;

  /// An independent source keyed by this seed and a derived stream id.
  RandomSource fork(std::uint64_t stream_id) const noexcept;

 private:
  void refill() noexcept;

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint64_t, 2> block_{};
  unsigned block_pos_ = 2;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

/// Philox4x32-10 block function, exposed for known-answer tests.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

}  // namespace discond
