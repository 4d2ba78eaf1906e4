#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace stochreg {

/// Deterministic random stream built on SplitMix64.
///
/// State after n raw draws is `seed + n * 0x9E3779B97F4A7C15 (mod 2^64)`; each
/// raw draw advances the state by that constant and returns
///
///     z = state
///     z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///     z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///     return z ^ (z >> 31)
///
/// Derived draws, in terms of raw draws:
///   uniform01()   : (raw >> 11) * 2^-53, one raw draw, value in [0, 1)
///   draw_index(P) : Lemire's multiply-shift with rejection, exact uniform on
///                   {0..P-1}; usually one raw draw, more on rejection
///   normal()      : Box-Muller, u1 = 1 - uniform01(), u2 = uniform01(),
///                   sqrt(-2 ln u1) * cos(2 pi u2); exactly two raw draws
///
/// Because the state is a linear function of the draw count, a stream can be
/// repositioned in O(1) with `at(seed, draw_count)`.
class RngStream {
 public:
  static constexpr std::string_view kAlgorithmId = "splitmix64-v1";
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  explicit RngStream(std::uint64_t seed) : seed_(seed), state_(seed) {}

  /// Stream positioned after `draw_count` raw draws from `seed`.
  static RngStream at(std::uint64_t seed, std::uint64_t draw_count);

  std::uint64_t next_u64();
  double uniform01();
  /// Uniform index in {0, ..., count-1}. Throws ConfigError for count == 0.
  std::size_t draw_index(std::size_t count);
  double normal();

  std::uint64_t seed() const { return seed_; }
  std::uint64_t draw_count() const { return draw_count_; }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
  std::uint64_t draw_count_ = 0;
};

}  // namespace stochreg
