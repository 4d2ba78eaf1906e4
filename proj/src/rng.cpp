#include "stochreg/rng.hpp"

#include <cmath>
#include <numbers>

#include "stochreg/errors.hpp"

namespace stochreg {

namespace {
__extension__ typedef unsigned __int128 u128;
}  // namespace

RngStream RngStream::at(std::uint64_t seed, std::uint64_t draw_count) {
  RngStream s(seed);
  s.state_ = seed + draw_count * kGamma;
  s.draw_count_ = draw_count;
  return s;
}

std::uint64_t RngStream::next_u64() {
  state_ += kGamma;
  ++draw_count_;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double RngStream::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::size_t RngStream::draw_index(std::size_t count) {
  if (count == 0) throw ConfigError("draw_index: equation count must be positive");
  const auto range = static_cast<std::uint64_t>(count);
  auto product = static_cast<u128>(next_u64()) * range;
  auto low = static_cast<std::uint64_t>(product);
  if (low < range) {
    const std::uint64_t threshold = (0 - range) % range;
    while (low < threshold) {
      product = static_cast<u128>(next_u64()) * range;
      low = static_cast<std::uint64_t>(product);
    }
  }
  return static_cast<std::size_t>(product >> 64);
}

double RngStream::normal() {
  const double u1 = 1.0 - uniform01();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace stochreg
