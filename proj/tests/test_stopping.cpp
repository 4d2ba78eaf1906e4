#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "stochreg/errors.hpp"
#include "stochreg/linear_benchmark.hpp"
#include "stochreg/noise.hpp"
#include "stochreg/rng.hpp"
#include "stochreg/stopping.hpp"
#include "test_support.hpp"

using namespace stochreg;

namespace {

bool has_note(const TheoryConstantsReport& r, const std::string& fragment) {
  return std::any_of(r.notes.begin(), r.notes.end(),
                     [&](const std::string& n) { return n.find(fragment) != std::string::npos; });
}

ConstantsInputs hand_example() {
  ConstantsInputs in;
  in.omega = 0.1;
  in.Omega = 0.1;
  in.lambda_max = 0.4;
  in.eta = 0.1;
  in.L = 1.0;
  in.kappa = 0.5;
  in.tau = 2.0;
  in.M = 0.5;
  in.rho = 1.0;
  return in;
}

}  // namespace

TEST_CASE("psi") {
  CHECK(psi(0, 1, 0.0) == 0.0);
  CHECK(psi(1234, 50, 0.0) == 0.0);
  CHECK(psi(3, 2, 5) == 25.0);
  CHECK_THROWS_AS(psi(3, 0.5, 5), ConfigError);
  CHECK_THROWS_AS(psi(3, 2, -1), ConfigError);
}

TEST_CASE("argmin of psi") {
  const std::vector<PsiPoint> a{{0, 5}, {1, 3}, {2, 7}};
  CHECK(argmin_psi(a) == 1);
  const std::vector<PsiPoint> tie{{0, 3}, {1, 3}};
  CHECK(argmin_psi(tie) == 0);
  CHECK_THROWS_AS(argmin_psi(std::vector<PsiPoint>{}), EmptyTraceError);
}

TEST_CASE("argmin of psi agrees with a brute-force scan") {
  RngStream rng(31);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng.draw_index(60);
    std::vector<PsiPoint> pts;
    for (std::size_t k = 0; k < n; ++k) {
      // coarse values so that ties occur
      pts.push_back({k * 3, static_cast<double>(rng.draw_index(8))});
    }
    std::size_t best = 0;
    for (std::size_t j = 1; j < n; ++j)
      if (pts[j].psi < pts[best].psi) best = j;
    CHECK(argmin_psi(pts) == pts[best].k);
  }
}

TEST_CASE("modified discrepancy check") {
  const std::vector<double> one{0.5};
  const std::vector<double> noise1{1.0};
  CHECK(modified_discrepancy_check(one, 0, 1, 1, 2, noise1));

  const std::vector<double> zeros{0.0, 0.0, 0.0};
  const std::vector<double> noise{0.3, 0.2, 0.4};
  // M / (k + a) = 0.1 <= tau * min noise = 0.22
  CHECK(modified_discrepancy_check(zeros, 0, 10, 1.0, 1.1, noise));

  const std::vector<double> noise_with_zero{0.3, 0.0, 0.4};
  for (std::size_t k : {0u, 10u, 1000000u})
    CHECK_FALSE(modified_discrepancy_check(zeros, k, 10, 1e-9, 1.1, noise_with_zero));

  CHECK_THROWS_AS(modified_discrepancy_check(one, 0, 1, 1, 2, std::vector<double>{}),
                  ConfigError);
}

TEST_CASE("classical discrepancy check") {
  CHECK(classical_discrepancy_check(0.0, 2.0, 0.0));
  CHECK_FALSE(classical_discrepancy_check(3.0, 2.0, 1.0));
  CHECK(classical_discrepancy_check(1.9, 2.0, 1.0));
}

TEST_CASE("ball radius") {
  CHECK_FALSE(c_rho(1.0, 0.0, 0.01, 0.5, 0.1, 1.0).has_value());
  const auto c = c_rho(1.0, 0.4, 0.01, 0.5, 0.1, 1.0);
  REQUIRE(c.has_value());
  CHECK(*c == doctest::Approx(1.0205522682208754882).epsilon(1e-14));
  const auto c2 = c_rho(2.0, 0.4, 0.01, 0.5, 0.1, 1.0);
  CHECK(*c2 == doctest::Approx(2.0 * *c).epsilon(1e-15));
  CHECK_THROWS_AS(c_rho(1.0, 0.5, 0.01, 0.5, 0.1, 1.0), ConfigError);
  CHECK_THROWS_AS(c_rho(-1.0, 0.4, 0.01, 0.5, 0.1, 1.0), ConfigError);
}

TEST_CASE("big M") {
  CHECK(big_M(1, 1, 1, 1, 0) == 0.5);
  CHECK(big_M(0.01, 2, 4, 0.1, 0.1) == doctest::Approx(2.0 * big_M(0.01, 2, 2, 0.1, 0.1)));
  CHECK(big_M(0.01, 2, 2, 0.1, 0.1) == doctest::Approx(0.72007200720072007).epsilon(1e-14));
  CHECK_THROWS_AS(big_M(0, 1, 1, 1, 0), ConfigError);
  CHECK_THROWS_AS(big_M(1, 1, 1, 1, 1.0), ConfigError);
}

TEST_CASE("validator: hand-evaluated D") {
  const auto r = validate_constants(hand_example());
  REQUIRE(r.D.has_value());
  CHECK(*r.D == doctest::Approx(-0.2895).epsilon(1e-12));
  CHECK(r.D2 == doctest::Approx(-0.152).epsilon(1e-12));
  CHECK_FALSE(r.D_positive);
  CHECK(r.M == 0.5);
  CHECK(has_note(r, "D > 0 fails"));
}

TEST_CASE("validator: M derived from c(rho) when not given") {
  auto in = hand_example();
  in.M.reset();
  const auto r = validate_constants(in);
  REQUIRE(r.c_rho.has_value());
  REQUIRE(r.M.has_value());
  CHECK(*r.M == doctest::Approx(big_M(in.varrho, *r.c_rho, in.tau, in.Omega, in.eta)));
}

TEST_CASE("validator: lambda_max = 0") {
  auto in = hand_example();
  in.lambda_max = 0.0;
  in.M.reset();
  const auto r = validate_constants(in);
  CHECK(r.D2 == doctest::Approx(2 * 0.1 * 0.9 - 0.01 - 0.25).epsilon(1e-12));
  CHECK_FALSE(r.c_rho_defined);
  CHECK(has_note(r, "kappa can be set to zero"));
  CHECK(has_note(r, "c(rho) undefined"));
}

TEST_CASE("validator: damping sums") {
  ConstantsInputs in;
  in.L = 1.0;
  in.rho = 1.0;
  in.k_max = 1000;
  const auto sq = validate_constants(in);
  CHECK(sq.lambda_summable);
  CHECK(sq.lambda_sum_partial < std::numbers::pi * std::numbers::pi / 6.0);
  CHECK(sq.lambda_sum_partial == doctest::Approx(1.1339335666815598).epsilon(1e-13));
  CHECK(*sq.lambda_sum_limit == doctest::Approx(1.1349340668482264).epsilon(1e-13));
  CHECK(*sq.lambda_sum_bound == doctest::Approx(std::numbers::pi * std::numbers::pi / 6.0));

  in.lambda_kind = LambdaScheduleKind::InverseCube;
  const auto cu = validate_constants(in);
  CHECK(cu.lambda_sum_partial == doctest::Approx(0.69205640265934428).epsilon(1e-13));
  CHECK(*cu.lambda_sum_limit == doctest::Approx(0.6920569031595942854).epsilon(1e-13));

  in.lambda_kind = LambdaScheduleKind::Constant;
  in.lambda_constant = 0.1;
  const auto co = validate_constants(in);
  CHECK_FALSE(co.lambda_summable);
}

TEST_CASE("validator flags follow their definitions") {
  RngStream rng(77);
  for (int t = 0; t < 300; ++t) {
    ConstantsInputs in;
    in.L = 0.1 + 3.0 * rng.uniform01();
    in.eta = 0.9 * rng.uniform01();
    in.rho = 0.1 + rng.uniform01();
    in.kappa = 0.05 + 0.9 * rng.uniform01();
    in.varrho = 0.001 + 0.5 * rng.uniform01();
    in.lambda_max = 0.49 * rng.uniform01();
    in.omega = 0.01 + rng.uniform01();
    in.Omega = in.omega * (1.0 + rng.uniform01());
    in.tau = 1.01 + 2.0 * rng.uniform01();
    in.k_max = 50;
    const auto r = validate_constants(in);
    const double denom = 1.0 / (1.0 + in.varrho) - (1.0 - in.lambda_max) * (1.0 - in.lambda_max);
    CHECK(r.c_rho_defined == (denom > 0.0));
    if (r.c_rho_defined && r.M) {
      CHECK(*r.M == doctest::Approx(in.varrho * *r.c_rho * *r.c_rho * in.tau /
                                    (in.Omega * (1 + in.varrho) * (1 + in.eta))));
    }
    CHECK(r.D2_positive == (r.D2 > 0.0));
    CHECK(r.D1_positive == (r.D1 > 0.0));
    CHECK(r.L_bound_ok == (in.L <= 1.0 / (2.0 * in.omega)));
  }
}

TEST_CASE("report JSON carries the report fields") {
  const auto j = nlohmann::json::parse(to_json(validate_constants(hand_example())));
  for (const char* key : {"L", "eta", "rho", "kappa", "varrho", "lambda_max", "omega", "Omega",
                          "tau", "a", "c_rho", "M", "D", "D1", "D2", "lambda_sum", "flags"}) {
    CHECK(j.contains(key));
  }
  CHECK(j["flags"]["D_positive"] == false);
  CHECK(j["D"].get<double>() == doctest::Approx(-0.2895));
}

TEST_CASE("noise condition estimate") {
  CHECK(noise_condition_estimate(std::vector<double>{2.0, 2.0}, 2.0) == 1.0);
  CHECK(noise_condition_estimate(std::vector<double>{2.0, 0.0, 1.0}, 2.0) == 0.0);
  CHECK_THROWS_AS(noise_condition_estimate(std::vector<double>{1.0}, 0.0), ConfigError);
}

TEST_CASE("modified rule matches the pure check") {
  // two-equation system F(u) = (u, 2u), scanned along u
  const LinearSystem sys(2, 1, {1.0, 2.0}, {{1.0}, {2.0}});
  const std::vector<RealVector> eps{{0.7}, {-1.3}};
  const auto data = perturb_relative(sys.exact_data(), eps, 0.1);
  ModifiedDiscrepancyRule rule(5.0, 0.2, 1.5);
  rule.begin(sys, data);
  for (std::size_t k = 0; k < 60; ++k) {
    const double u = 0.9 + 0.004 * static_cast<double>(k);
    const std::vector<double> uv{u};
    const auto norms = component_residual_norms(sys, uv, data.y_delta);
    const bool expected = modified_discrepancy_check(norms, k, 5.0, 0.2, 1.5, data.delta_i);
    CHECK(rule.observe({k, uv, sys, data}, std::nullopt) == expected);
  }
}

TEST_CASE("modified rule requires noise levels") {
  const LinearSystem sys(1, 1, {1.0});
  const auto data = external_observations({{1.0}});
  ModifiedDiscrepancyRule rule(5.0, 0.2, 1.5);
  CHECK_THROWS_AS(rule.begin(sys, data), ConfigError);
  CHECK_THROWS_AS(ModifiedDiscrepancyRule(5.0, 0.0, 1.5), ConfigError);
}

TEST_CASE("heuristic rule records psi") {
  const LinearSystem sys(1, 1, {1.0});
  const auto data = external_observations({{1.0}});
  HeuristicRule rule(2.0);
  rule.begin(sys, data);
  const std::vector<double> u{0.0};
  CHECK_FALSE(rule.observe({0, u, sys, data}, 4.0));
  CHECK_FALSE(rule.observe({1, u, sys, data}, 1.0));
  CHECK_FALSE(rule.observe({2, u, sys, data}, std::nullopt));
  CHECK_FALSE(rule.observe({3, u, sys, data}, 2.0));
  CHECK(rule.psi_trace().size() == 3);
  CHECK(rule.selected_index(3) == 1);
  CHECK(rule.observe({4, u, sys, data}, 0.0));
  CHECK(rule.selected_index(4) == 4);
  CHECK_THROWS_AS(HeuristicRule(0.5), ConfigError);
}

TEST_CASE("classical rule") {
  const LinearSystem sys(1, 1, {1.0});
  const auto data = external_observations({{1.0}});
  ClassicalDiscrepancyRule rule(2.0, 0.5);
  CHECK(rule.needs_residual_sum(7));
  const std::vector<double> u{0.0};
  CHECK_FALSE(rule.observe({0, u, sys, data}, 1.5));
  CHECK(rule.observe({1, u, sys, data}, 0.81));
}
