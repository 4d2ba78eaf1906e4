#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stochreg/noise.hpp"
#include "stochreg/problem.hpp"

namespace stochreg {

// ---------------------------------------------------------------------------
// Pure rule arithmetic

/// Psi(k) = (k + a) * residual_sq_sum. Throws ConfigError for a < 1 or
/// negative/non-finite inputs.
double psi(double k, double a, double residual_sq_sum);

struct PsiPoint {
  std::size_t k = 0;
  double psi = 0.0;
};

/// k of the smallest Psi; ties go to the smallest k. Throws EmptyTraceError.
std::size_t argmin_psi(std::span<const PsiPoint> points);

/// True iff for every i: residual_norms[i] + M / (k + a) <= tau * exact_noise[i].
/// Requires the per-equation noise magnitudes, i.e. benchmark mode.
bool modified_discrepancy_check(std::span<const double> residual_norms, std::size_t k,
                                double a, double M, double tau,
                                std::span<const double> exact_noise);

/// ||F(u_k) - y^delta|| <= tau * delta
bool classical_discrepancy_check(double full_residual, double tau, double delta);

/// Ball radius c(rho); nullopt when 1/(1+varrho) - (1-lambda_max)^2 <= 0.
std::optional<double> c_rho(double rho, double lambda_max, double varrho, double kappa,
                            double Omega, double L);

/// M = varrho c^2 tau / (Omega (1 + varrho) (1 + eta))
double big_M(double varrho, double c_rho_value, double tau, double Omega, double eta);

/// min_k ||y^delta - F(u_k)|| / ||y^delta - y^dagger|| over the given residuals.
double noise_condition_estimate(std::span<const double> full_residual_norms,
                                double noise_norm);

// ---------------------------------------------------------------------------
// Theory constants

enum class LambdaScheduleKind { Zero, InverseSquare, InverseCube, Constant, Custom };

struct ConstantsInputs {
  double L = 0.0;
  double eta = 0.0;
  double rho = 0.0;
  double kappa = 0.5;
  double varrho = 0.01;
  double lambda_max = 0.49;
  double omega = 1e-3;
  double Omega = 1e-3;
  double tau = 1.1;
  double a = 100.0;
  std::size_t k_max = 1000;
  LambdaScheduleKind lambda_kind = LambdaScheduleKind::InverseSquare;
  /// Value for LambdaScheduleKind::Constant.
  double lambda_constant = 0.0;
  /// Clamped lambda_k for k < k_max; when empty it is generated from lambda_kind.
  std::vector<double> lambda_values;
  /// User-set M; computed from c(rho) when absent.
  std::optional<double> M;
  bool L_is_estimate = false;
  bool eta_is_heuristic = false;
};

struct TheoryConstantsReport {
  ConstantsInputs inputs;
  std::optional<double> c_rho;
  std::optional<double> M;
  std::optional<double> D;
  double D1 = 0.0;
  double D2 = 0.0;
  double lambda_sum_partial = 0.0;
  /// Sum over all k >= 0 of the clamped schedule, when known in closed form
  /// (nullopt for divergent or custom schedules).
  std::optional<double> lambda_sum_limit;
  /// Analytic bound on the unclamped series (pi^2/6, zeta(3)).
  std::optional<double> lambda_sum_bound;

  bool D_positive = false;
  bool D1_positive = false;
  bool D2_positive = false;
  bool c_rho_defined = false;
  bool lambda_summable = false;
  /// L <= 1/(2 omega)
  bool L_bound_ok = false;

  std::vector<std::string> notes;
};

/// Report-only: never throws for failed conditions, records them as flags
/// and notes instead.
TheoryConstantsReport validate_constants(const ConstantsInputs& inputs);

/// JSON object with the report fields (pretty-printed).
std::string to_json(const TheoryConstantsReport& report);

// ---------------------------------------------------------------------------
// Pluggable stopping rules used by the run loop

struct IterationState {
  std::size_t k;
  std::span<const double> u;
  const ProblemSystem& system;
  const NoisyObservations& data;
};

class StoppingRule {
 public:
  virtual ~StoppingRule() = default;

  virtual std::string name() const = 0;
  /// Called once before iteration 0; resets any per-run state.
  virtual void begin(const ProblemSystem& system, const NoisyObservations& data);
  /// Whether sum_i ||F_i(u_k) - y_i||^2 must be evaluated at k regardless of
  /// the configured cadence.
  virtual bool needs_residual_sum(std::size_t k) const;
  /// Sees u_k; returns true to stop at k.
  virtual bool observe(const IterationState& state, std::optional<double> residual_sq_sum) = 0;
  /// Psi(k) when the rule defines one.
  virtual std::optional<double> psi_value(std::size_t k, double residual_sq_sum) const;
  /// Index of the iterate the run should return.
  virtual std::size_t selected_index(std::size_t last_index) const;
};

/// Runs to the horizon and selects k* = argmin Psi over the evaluated points.
/// Stops early only when Psi hits exactly 0, after which k* cannot change.
class HeuristicRule final : public StoppingRule {
 public:
  explicit HeuristicRule(double a);

  std::string name() const override { return "heuristic"; }
  void begin(const ProblemSystem& system, const NoisyObservations& data) override;
  bool observe(const IterationState& state, std::optional<double> residual_sq_sum) override;
  std::optional<double> psi_value(std::size_t k, double residual_sq_sum) const override;
  std::size_t selected_index(std::size_t last_index) const override;

  std::span<const PsiPoint> psi_trace() const { return points_; }
  double a() const { return a_; }

 private:
  double a_;
  std::vector<PsiPoint> points_;
};

class ModifiedDiscrepancyRule final : public StoppingRule {
 public:
  ModifiedDiscrepancyRule(double a, double M, double tau);

  std::string name() const override { return "modified-discrepancy"; }
  void begin(const ProblemSystem& system, const NoisyObservations& data) override;
  bool observe(const IterationState& state, std::optional<double> residual_sq_sum) override;

 private:
  double a_;
  double M_;
  double tau_;
  double min_threshold_ = 0.0;
  std::size_t first_to_check_ = 0;
};

class ClassicalDiscrepancyRule final : public StoppingRule {
 public:
  ClassicalDiscrepancyRule(double tau, double delta);

  std::string name() const override { return "classical-discrepancy"; }
  bool needs_residual_sum(std::size_t k) const override;
  bool observe(const IterationState& state, std::optional<double> residual_sq_sum) override;

 private:
  double tau_;
  double delta_;
};

class NoStoppingRule final : public StoppingRule {
 public:
  std::string name() const override { return "none"; }
  bool observe(const IterationState&, std::optional<double>) override { return false; }
};

}  // namespace stochreg
