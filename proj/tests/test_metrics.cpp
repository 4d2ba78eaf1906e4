#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "stochreg/errors.hpp"
#include "stochreg/metrics.hpp"
#include "stochreg/rng.hpp"
#include "stochreg/schlieren.hpp"
#include "test_support.hpp"

using namespace stochreg;

namespace {

constexpr std::size_t kH = 24, kW = 20;

// Smooth test pair; reference SSIM values were frozen from scikit-image
// (gaussian_weights, sigma 1.5, population covariance).
std::pair<RealVector, RealVector> golden_pair() {
  RealVector a(kH * kW), b(kH * kW);
  for (std::size_t r = 0; r < kH; ++r)
    for (std::size_t c = 0; c < kW; ++c) {
      const double x = static_cast<double>(r), y = static_cast<double>(c);
      a[r * kW + c] = 0.5 + 0.5 * std::sin(0.3 * x + 0.2 * y);
      b[r * kW + c] = a[r * kW + c] + 0.1 * std::cos(0.7 * x - 0.4 * y) + 0.05 * std::sin(0.11 * x * y);
    }
  return {a, b};
}

}  // namespace

TEST_CASE("relative error") {
  const RealVector t{1.0, -2.0, 0.5};
  CHECK(relative_error(t, t) == 0.0);
  CHECK(relative_error(RealVector{2.0, -4.0, 1.0}, t) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(relative_error(RealVector(3, 0.0), t) == 1.0);
  CHECK_THROWS_AS(relative_error(t, RealVector(3, 0.0)), ConfigError);
  const RealVector w{0.5, 1.0, 0.5};
  CHECK(relative_error(RealVector(3, 0.0), t, w) == doctest::Approx(1.0));

  RngStream rng(6);
  for (int k = 0; k < 50; ++k) {
    const auto u = testing_support::random_vector(rng, 17);
    const auto v = testing_support::random_vector(rng, 17);
    const double c = 0.1 + 10.0 * rng.uniform01() * (k % 2 == 0 ? 1.0 : -1.0);
    RealVector cu(u), cv(v);
    for (auto& x : cu) x *= c;
    for (auto& x : cv) x *= c;
    CHECK(relative_error(cu, cv) == doctest::Approx(relative_error(u, v)).epsilon(1e-13));
  }
}

TEST_CASE("psnr") {
  CHECK(psnr(RealVector{0.0}, RealVector{0.5}, 1.0) == doctest::Approx(6.020599913279624));
  CHECK(psnr(RealVector{0.3, 0.4}, RealVector{0.3, 0.4}, 1.0) ==
        std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(psnr(RealVector{0.0}, RealVector{0.0, 1.0}, 1.0), DimensionError);
  CHECK_THROWS_AS(psnr(RealVector{0.0}, RealVector{1.0}, 0.0), ConfigError);

  const auto img = shepp_logan(32);
  double previous = std::numeric_limits<double>::infinity();
  for (double sigma : {0.01, 0.05, 0.2}) {
    RngStream rng(1);
    RealVector noisy(img);
    for (auto& v : noisy) v += sigma * rng.normal();
    const double p = psnr(img, noisy, 1.0);
    CHECK(p < previous);
    CHECK(p > 0.0);
    previous = p;
  }
}

TEST_CASE("ssim") {
  const auto [a, b] = golden_pair();
  CHECK(ssim(a, a, kW, 1.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(ssim(a, b, kW, 1.0) == doctest::Approx(0.8764342594608255).epsilon(1e-12));
  CHECK(ssim(a, b, kW, 2.0) == doctest::Approx(0.8836366909520438).epsilon(1e-12));
  CHECK(std::abs(ssim(a, b, kW, 1.0) - ssim(b, a, kW, 1.0)) <= 1e-12);

  const auto mask = shepp_logan_head_mask(32);
  RealVector inverted(mask);
  for (auto& v : inverted) v = 1.0 - v;
  const double s = ssim(mask, inverted, 32, 1.0);
  CHECK(s < 0.5);
  CHECK(s >= -1.0);

  CHECK_THROWS_AS(ssim(RealVector(100, 0.0), RealVector(100, 0.0), 10, 1.0), ConfigError);
  CHECK_THROWS_AS(ssim(a, b, 7, 1.0), DimensionError);
}

TEST_CASE("data range") {
  CHECK(data_range_of(RealVector{0.2, -1.0, 3.0}) == 4.0);
  CHECK(data_range_of(shepp_logan(32)) == doctest::Approx(1.0));
}
