#include <cmath>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "stochreg/errors.hpp"
#include "stochreg/noise.hpp"
#include "stochreg/rng.hpp"

using namespace stochreg;

namespace {

std::vector<RealVector> sample_data() {
  return {{1.0, -2.0, 0.0}, {3.5}, {-0.25, 4.0}};
}

}  // namespace

TEST_CASE("zero noise leaves the data untouched") {
  const auto y = sample_data();
  RngStream rng(1);
  const auto obs = add_relative_noise(y, 0.0, rng);
  CHECK(obs.y_delta == y);
  CHECK(obs.delta == 0.0);
  CHECK(obs.delta_rel == 0.0);
  for (double d : obs.delta_i) CHECK(d == 0.0);
  // one normal (two raw draws) per entry regardless of the level
  CHECK(rng.draw_count() == 12);
}

TEST_CASE("hand-evaluated perturbation") {
  const std::vector<RealVector> y{{1.0}, {-2.0}};
  const std::vector<RealVector> eps{{0.5}, {1.0}};
  const auto obs = perturb_relative(y, eps, 0.1);
  CHECK(obs.y_delta[0][0] == doctest::Approx(1.05).epsilon(1e-15));
  CHECK(obs.y_delta[1][0] == doctest::Approx(-1.8).epsilon(1e-15));
  CHECK(obs.delta == doctest::Approx(std::sqrt(0.05 * 0.05 + 0.2 * 0.2)).epsilon(1e-14));
  CHECK(obs.delta_i[0] == doctest::Approx(0.05).epsilon(1e-14));
  CHECK(obs.delta_i[1] == doctest::Approx(0.2).epsilon(1e-14));
}

TEST_CASE("zero entries are never perturbed") {
  const auto y = sample_data();
  RngStream rng(8);
  const auto obs = add_relative_noise(y, 0.5, rng);
  CHECK(obs.y_delta[0][2] == 0.0);
}

TEST_CASE("realized noise scales with the level") {
  const auto y = sample_data();
  RngStream r1(17);
  const auto base = add_relative_noise(y, 0.01, r1);
  for (double c : {2.0, 0.5, 4.0}) {
    RngStream r2(17);
    const auto scaled = add_relative_noise(y, c * 0.01, r2);
    CHECK(scaled.delta == c * base.delta);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(scaled.delta_i[i] == c * base.delta_i[i]);
  }
}

TEST_CASE("delta squared is the sum of the component levels") {
  std::vector<RealVector> y(50);
  RngStream gen(2);
  for (auto& yi : y) {
    yi.resize(7);
    for (double& v : yi) v = gen.normal();
  }
  RngStream rng(3);
  const auto obs = add_relative_noise(y, 0.3, rng);
  double s = 0.0;
  for (double d : obs.delta_i) s += d * d;
  CHECK(obs.delta * obs.delta == doctest::Approx(s).epsilon(1e-12));
}

TEST_CASE("noise factors are standard normal") {
  const std::size_t n = 10000;
  std::vector<RealVector> y(n, RealVector{1.0});
  RngStream rng(99);
  const auto obs = add_relative_noise(y, 1.0, rng);
  double mean = 0.0;
  for (const auto& v : obs.y_delta) mean += v[0] - 1.0;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (const auto& v : obs.y_delta) var += (v[0] - 1.0 - mean) * (v[0] - 1.0 - mean);
  var /= static_cast<double>(n - 1);
  CHECK(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));
  CHECK(var >= 0.9);
  CHECK(var <= 1.1);
}

TEST_CASE("negative level is rejected") {
  const auto y = sample_data();
  RngStream rng(1);
  CHECK_THROWS_AS(add_relative_noise(y, -0.1, rng), ConfigError);
  CHECK_THROWS_AS(add_relative_noise(y, std::nan(""), rng), ConfigError);
}

TEST_CASE("external observations carry no noise levels") {
  const auto obs = external_observations(sample_data());
  CHECK_FALSE(obs.has_noise_levels());
  CHECK(obs.delta_rel == 0.0);
}

TEST_CASE("observation CSV round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "stochreg_noise_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "obs.csv";
  RngStream rng(5);
  const auto obs = add_relative_noise(sample_data(), 0.2, rng);
  save_observations_csv(path, obs.y_delta);
  CHECK(load_observations_csv(path) == obs.y_delta);
  std::filesystem::remove_all(dir);
}
