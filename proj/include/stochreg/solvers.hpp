#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stochreg/errors.hpp"
#include "stochreg/noise.hpp"
#include "stochreg/problem.hpp"
#include "stochreg/rng.hpp"
#include "stochreg/stopping.hpp"

namespace stochreg {

enum class Method { Landweber, IrLandweber, Sgd, Irsgd };

Method parse_method(std::string_view name);
std::string to_string(Method method);
/// Whether the method samples one equation per step.
bool is_stochastic(Method method);
/// Whether the method applies the damping term.
bool is_damped(Method method);

using Schedule = std::function<double(std::size_t)>;

Schedule constant_schedule(double value);
/// k^-p for k >= 1 and 0 at k = 0.
Schedule inverse_power_schedule(double p);

struct SolverConfig {
  Method method = Method::Irsgd;
  double omega_min = 1e-3;
  double omega_max = 1e-3;
  /// Defaults to the constant omega_min.
  Schedule omega_schedule;
  /// Defaults to zero.
  Schedule lambda_schedule;
  double lambda_max = 0.49;
  std::size_t k_max = 1000;
  std::uint64_t seed = 0;
  /// Evaluate sum_i ||F_i(u_k) - y_i||^2 every psi_every iterations (and at k_max).
  std::size_t psi_every = 1;
  std::size_t checkpoint_interval = 50;
  /// For linear systems with scalar equations, update F(u_k) through rows of
  /// K K^T instead of re-evaluating it (recomputed exactly at checkpoints).
  bool incremental_residuals = true;

  /// Throws ConfigError.
  void validate() const;
};

/// omega_k and lambda_k after clamping into [omega_min, omega_max] and
/// [0, lambda_max]. Clamping events are appended to `warnings` once per kind.
struct StepParameters {
  double omega;
  double lambda;
};
StepParameters step_parameters(const SolverConfig& config, std::size_t k,
                               std::vector<std::string>* warnings = nullptr);

// ---------------------------------------------------------------------------
// Single steps

/// u - omega * sum_i F_i'(u)^* (F_i(u) - y_i)
RealVector landweber_step(const ProblemSystem& sys, std::span<const double> u,
                          std::span<const RealVector> y, double omega = 1.0);

/// landweber_step(...) - lambda (u - u0)
RealVector ir_landweber_step(const ProblemSystem& sys, std::span<const double> u,
                             std::span<const double> u0, double lambda,
                             std::span<const RealVector> y, double omega = 1.0);

/// u - omega F_i'(u)^* (F_i(u) - y_i)
RealVector sgd_step(const ProblemSystem& sys, std::span<const double> u, std::size_t i,
                    double omega, std::span<const double> y_i);

/// u - omega F_i'(u)^* (F_i(u) - y_i) - lambda (u - u0). Throws ConfigError
/// unless 0 <= lambda < 1/2.
RealVector irsgd_step(const ProblemSystem& sys, std::span<const double> u,
                      std::span<const double> u0, std::size_t i, double omega, double lambda,
                      std::span<const double> y_i);

// ---------------------------------------------------------------------------
// Run loop

struct TraceRecord {
  std::size_t k = 0;
  /// Equation used for the step from u_k; nullopt for full-gradient methods
  /// and for the final record, where no step is taken.
  std::optional<std::size_t> i_k;
  bool all_equations = false;
  std::optional<double> omega_k;
  std::optional<double> lambda_k;
  /// ||F_{i_k}(u_k) - y_{i_k}||, or ||F(u_k) - y|| for full-gradient steps.
  std::optional<double> res_ik;
  std::optional<double> res_sq_sum;
  std::optional<double> psi;
  std::optional<double> rel_err;
};

enum class StopReason { Rule, Cap, Divergence };
std::string to_string(StopReason reason);

struct RunTrace {
  Method method = Method::Irsgd;
  std::string rule;
  std::vector<TraceRecord> records;
  /// Iterate at selected_index.
  RealVector u_final;
  std::size_t stop_index = 0;
  std::size_t selected_index = 0;
  StopReason stop_reason = StopReason::Cap;
  /// max_k ||u_k - u_0|| over the recorded iterates.
  double max_excursion = 0.0;
  std::vector<std::string> warnings;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, RunTrace partial)
      : Error(what), trace_(std::move(partial)) {}
  const RunTrace& trace() const { return trace_; }

 private:
  RunTrace trace_;
};

struct RunInputs {
  const ProblemSystem& system;
  const NoisyObservations& data;
  std::span<const double> u0;
  /// Reference solution for the relative error; may be empty.
  std::span<const double> truth = {};
  /// Quadrature weights for the relative error; may be empty.
  std::span<const double> truth_weights = {};
};

/// Iterates from u0, consulting `rule` at every k, until the rule stops or
/// k = k_max. `rng` is the stream position to draw indices from; when absent
/// a fresh stream seeded with config.seed is used.
///
/// When the rule selects an index other than the last one, u at that index is
/// recovered by replaying from the nearest checkpoint.
RunTrace run(const RunInputs& inputs, const SolverConfig& config, StoppingRule& rule,
             std::optional<RngStream> rng = std::nullopt);

/// True when every recorded ||u_k - u_0|| stays within rho + c(rho).
bool ball_confined(const RunTrace& trace, double rho, double c_rho_value);

}  // namespace stochreg
