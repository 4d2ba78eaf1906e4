#include "stochreg/stopping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "json.hpp"
#include "stochreg/errors.hpp"

namespace stochreg {

double psi(double k, double a, double residual_sq_sum) {
  if (!(a >= 1.0)) throw ConfigError("heuristic rule needs a >= 1");
  if (!(k >= 0.0) || !(residual_sq_sum >= 0.0) || !std::isfinite(residual_sq_sum) ||
      !std::isfinite(k)) {
    throw ConfigError("psi: k and the residual sum must be finite and nonnegative");
  }
  return (k + a) * residual_sq_sum;
}

std::size_t argmin_psi(std::span<const PsiPoint> points) {
  if (points.empty()) throw EmptyTraceError("argmin_psi: no Psi values recorded");
  const PsiPoint* best = &points.front();
  for (const auto& p : points) {
    if (p.psi < best->psi || (p.psi == best->psi && p.k < best->k)) best = &p;
  }
  return best->k;
}

bool modified_discrepancy_check(std::span<const double> residual_norms, std::size_t k,
                                double a, double M, double tau,
                                std::span<const double> exact_noise) {
  if (exact_noise.empty()) {
    throw ConfigError("modified discrepancy needs per-equation noise levels (exact data)");
  }
  require_same_size(residual_norms.size(), exact_noise.size(), "modified_discrepancy_check");
  if (!(tau > 1.0)) throw ConfigError("modified discrepancy needs tau > 1");
  if (!(M > 0.0)) throw ConfigError("modified discrepancy needs M > 0");
  if (!(a >= 1.0)) throw ConfigError("modified discrepancy needs a >= 1");
  const double penalty = M / (static_cast<double>(k) + a);
  for (std::size_t i = 0; i < residual_norms.size(); ++i) {
    if (!(residual_norms[i] + penalty <= tau * exact_noise[i])) return false;
  }
  return true;
}

bool classical_discrepancy_check(double full_residual, double tau, double delta) {
  return full_residual <= tau * delta;
}

std::optional<double> c_rho(double rho, double lambda_max, double varrho, double kappa,
                            double Omega, double L) {
  if (!(rho > 0.0)) throw ConfigError("c_rho: rho must be positive");
  if (!(kappa > 0.0 && kappa < 1.0)) throw ConfigError("c_rho: kappa must lie in (0, 1)");
  if (!(varrho > 0.0)) throw ConfigError("c_rho: varrho must be positive");
  if (!(lambda_max >= 0.0 && lambda_max < 0.5)) {
    throw ConfigError("c_rho: lambda_max must lie in [0, 1/2)");
  }
  const double one_minus = 1.0 - lambda_max;
  const double denom = 1.0 / (1.0 + varrho) - one_minus * one_minus;
  if (!(denom > 0.0)) return std::nullopt;
  const double growth = 1.0 + Omega * Omega * L * L / (kappa * kappa);
  const double root = std::sqrt(one_minus * one_minus + denom * growth);
  return rho * lambda_max * (one_minus + root) / denom;
}

double big_M(double varrho, double c_rho_value, double tau, double Omega, double eta) {
  if (!(varrho > 0.0) || !(c_rho_value > 0.0) || !(tau > 0.0) || !(Omega > 0.0)) {
    throw ConfigError("big_M: varrho, c(rho), tau and Omega must be positive");
  }
  if (!(eta >= 0.0 && eta < 1.0)) throw ConfigError("big_M: eta must lie in [0, 1)");
  return varrho * c_rho_value * c_rho_value * tau / (Omega * (1.0 + varrho) * (1.0 + eta));
}

double noise_condition_estimate(std::span<const double> full_residual_norms,
                                double noise_norm) {
  if (!(noise_norm > 0.0)) {
    throw ConfigError("noise condition estimate needs ||y^delta - y^dagger|| > 0");
  }
  if (full_residual_norms.empty()) throw EmptyTraceError("no residuals recorded");
  const double smallest =
      *std::min_element(full_residual_norms.begin(), full_residual_norms.end());
  return smallest / noise_norm;
}

// ---------------------------------------------------------------------------

namespace {

double clamp_lambda(double value, double lambda_max) {
  return std::clamp(value, 0.0, lambda_max);
}

std::optional<double> zeta(double p) {
  if (p == 2.0) return std::numbers::pi * std::numbers::pi / 6.0;
  if (p == 3.0) return 1.2020569031595942;  // Apery's constant
  return std::nullopt;
}

/// Sum over k >= 1 of min(k^-p, lambda_max).
double clamped_power_series_limit(double p, double lambda_max) {
  double limit = *zeta(p);
  for (std::size_t k = 1;; ++k) {
    const double term = std::pow(static_cast<double>(k), -p);
    if (term <= lambda_max) break;
    limit += lambda_max - term;
  }
  return limit;
}

}  // namespace

TheoryConstantsReport validate_constants(const ConstantsInputs& in) {
  TheoryConstantsReport r;
  r.inputs = in;

  const bool kappa_ok = in.kappa > 0.0 && in.kappa < 1.0;
  const bool basics_ok = in.rho > 0.0 && in.varrho > 0.0 && in.lambda_max >= 0.0 &&
                         in.lambda_max < 0.5 && kappa_ok;
  if (!kappa_ok) r.notes.push_back("kappa must lie in (0, 1); c(rho) not evaluated");
  if (!(in.rho > 0.0)) r.notes.push_back("rho must be positive; c(rho) not evaluated");
  if (!(in.lambda_max >= 0.0 && in.lambda_max < 0.5)) {
    r.notes.push_back("lambda_max must lie in [0, 1/2)");
  }
  if (!(in.omega > 0.0 && in.Omega >= in.omega)) {
    r.notes.push_back("step-size bounds must satisfy 0 < omega <= Omega");
  }
  if (!(in.eta >= 0.0 && in.eta < 1.0)) {
    r.notes.push_back("tangential cone constant eta must lie in [0, 1)");
  }
  if (!(in.tau > 1.0)) r.notes.push_back("tau must exceed 1");

  if (basics_ok) {
    r.c_rho = c_rho(in.rho, in.lambda_max, in.varrho, in.kappa, in.Omega, in.L);
  }
  r.c_rho_defined = r.c_rho.has_value();
  if (basics_ok && !r.c_rho_defined) {
    r.notes.push_back(
        "c(rho) undefined: 1/(1+varrho) - (1-lambda_max)^2 <= 0; increase lambda_max or "
        "decrease varrho");
  }

  if (in.M) {
    r.M = in.M;
  } else if (r.c_rho && *r.c_rho > 0.0 && in.tau > 0.0 && in.Omega > 0.0 && in.eta >= 0.0 &&
             in.eta < 1.0) {
    r.M = big_M(in.varrho, *r.c_rho, in.tau, in.Omega, in.eta);
  }

  const double damp = 1.0 - in.lambda_max;
  r.D2 = 2.0 * in.omega * damp * (1.0 - in.eta) - in.Omega * in.Omega * in.L * in.L -
         in.kappa * in.kappa;
  if (r.M) r.D = r.D2 - (in.Omega / in.tau) * (2.0 + *r.M) * (1.0 + in.eta);
  r.D1 = in.kappa * in.kappa - in.Omega * damp * (1.0 - 3.0 * in.eta) +
         in.omega * in.omega * in.L * in.L;
  r.D_positive = r.D.has_value() && *r.D > 0.0;
  r.D1_positive = r.D1 > 0.0;
  r.D2_positive = r.D2 > 0.0;
  if (!r.D) r.notes.push_back("D not evaluated: M unavailable");
  if (!r.D_positive) r.notes.push_back("condition D > 0 fails (advisory)");
  if (!r.D1_positive) r.notes.push_back("condition D1 > 0 fails (advisory)");
  if (!r.D2_positive) r.notes.push_back("condition D2 > 0 fails (advisory)");

  r.L_bound_ok = in.L > 0.0 && in.omega > 0.0 && in.L <= 1.0 / (2.0 * in.omega);
  if (!r.L_bound_ok) r.notes.push_back("bound L <= 1/(2 omega) fails (advisory)");
  if (in.L_is_estimate) r.notes.push_back("L is a power-iteration estimate at the initial guess");
  if (in.eta_is_heuristic) r.notes.push_back("eta is a heuristic value, not verified");

  if (in.lambda_max == 0.0) {
    r.notes.push_back(
        "lambda_max = 0: kappa can be set to zero in conditions D and D1 (the SGD case)");
  }

  // Partial and limiting sums of the clamped damping schedule.
  std::vector<double> values = in.lambda_values;
  if (values.empty()) {
    values.resize(in.k_max);
    for (std::size_t k = 0; k < in.k_max; ++k) {
      double raw = 0.0;
      switch (in.lambda_kind) {
        case LambdaScheduleKind::InverseSquare:
          raw = k == 0 ? 0.0 : 1.0 / (static_cast<double>(k) * static_cast<double>(k));
          break;
        case LambdaScheduleKind::InverseCube:
          raw = k == 0 ? 0.0 : std::pow(static_cast<double>(k), -3.0);
          break;
        case LambdaScheduleKind::Constant:
          raw = in.lambda_constant;
          break;
        case LambdaScheduleKind::Zero:
        case LambdaScheduleKind::Custom:
          raw = 0.0;
          break;
      }
      values[k] = clamp_lambda(raw, in.lambda_max);
    }
  }
  double partial = 0.0;
  for (double v : values) partial += v;
  r.lambda_sum_partial = partial;

  switch (in.lambda_kind) {
    case LambdaScheduleKind::Zero:
      r.lambda_sum_limit = 0.0;
      r.lambda_summable = true;
      break;
    case LambdaScheduleKind::InverseSquare:
    case LambdaScheduleKind::InverseCube: {
      const double p = in.lambda_kind == LambdaScheduleKind::InverseSquare ? 2.0 : 3.0;
      r.lambda_sum_bound = zeta(p);
      if (in.lambda_max > 0.0) r.lambda_sum_limit = clamped_power_series_limit(p, in.lambda_max);
      else r.lambda_sum_limit = 0.0;
      r.lambda_summable = true;
      break;
    }
    case LambdaScheduleKind::Constant: {
      const double v = clamp_lambda(in.lambda_constant, in.lambda_max);
      r.lambda_summable = v == 0.0;
      if (r.lambda_summable) r.lambda_sum_limit = 0.0;
      else r.notes.push_back("constant damping is not summable");
      break;
    }
    case LambdaScheduleKind::Custom:
      r.lambda_summable = false;
      r.notes.push_back("custom damping schedule: summability not checked");
      break;
  }
  return r;
}

namespace {

nlohmann::json optional_number(const std::optional<double>& v) {
  if (v && std::isfinite(*v)) return *v;
  return nullptr;
}

}  // namespace

std::string to_json(const TheoryConstantsReport& r) {
  const auto& in = r.inputs;
  nlohmann::ordered_json j;
  j["L"] = in.L;
  j["eta"] = in.eta;
  j["rho"] = in.rho;
  j["kappa"] = in.kappa;
  j["varrho"] = in.varrho;
  j["lambda_max"] = in.lambda_max;
  j["omega"] = in.omega;
  j["Omega"] = in.Omega;
  j["tau"] = in.tau;
  j["a"] = in.a;
  j["c_rho"] = optional_number(r.c_rho);
  j["M"] = optional_number(r.M);
  j["D"] = optional_number(r.D);
  j["D1"] = r.D1;
  j["D2"] = r.D2;
  j["lambda_sum"] = {{"partial", r.lambda_sum_partial},
                     {"k_max", in.k_max},
                     {"limit", optional_number(r.lambda_sum_limit)},
                     {"analytic_bound", optional_number(r.lambda_sum_bound)}};
  j["flags"] = {{"D_positive", r.D_positive},         {"D1_positive", r.D1_positive},
                {"D2_positive", r.D2_positive},       {"c_rho_defined", r.c_rho_defined},
                {"lambda_summable", r.lambda_summable}, {"L_bound_ok", r.L_bound_ok}};
  j["notes"] = r.notes;
  return j.dump(2);
}

// ---------------------------------------------------------------------------

void StoppingRule::begin(const ProblemSystem&, const NoisyObservations&) {}
bool StoppingRule::needs_residual_sum(std::size_t) const { return false; }
std::optional<double> StoppingRule::psi_value(std::size_t, double) const {
  return std::nullopt;
}
std::size_t StoppingRule::selected_index(std::size_t last_index) const { return last_index; }

HeuristicRule::HeuristicRule(double a) : a_(a) {
  if (!(a >= 1.0)) throw ConfigError("heuristic rule needs a >= 1");
}

void HeuristicRule::begin(const ProblemSystem&, const NoisyObservations&) { points_.clear(); }

bool HeuristicRule::observe(const IterationState& state, std::optional<double> residual_sq_sum) {
  if (!residual_sq_sum) return false;
  const double value = psi(static_cast<double>(state.k), a_, *residual_sq_sum);
  points_.push_back({state.k, value});
  return value == 0.0;
}

std::optional<double> HeuristicRule::psi_value(std::size_t k, double residual_sq_sum) const {
  return psi(static_cast<double>(k), a_, residual_sq_sum);
}

std::size_t HeuristicRule::selected_index(std::size_t) const { return argmin_psi(points_); }

ModifiedDiscrepancyRule::ModifiedDiscrepancyRule(double a, double M, double tau)
    : a_(a), M_(M), tau_(tau) {
  if (!(tau > 1.0)) throw ConfigError("modified discrepancy needs tau > 1");
  if (!(M > 0.0)) throw ConfigError("modified discrepancy needs M > 0");
  if (!(a >= 1.0)) throw ConfigError("modified discrepancy needs a >= 1");
}

void ModifiedDiscrepancyRule::begin(const ProblemSystem& system, const NoisyObservations& data) {
  if (!data.has_noise_levels()) {
    throw ConfigError("modified discrepancy needs per-equation noise levels (exact data)");
  }
  require_same_size(data.delta_i.size(), system.equation_count(), "noise levels");
  min_threshold_ = tau_ * *std::min_element(data.delta_i.begin(), data.delta_i.end());
  first_to_check_ = 0;
}

bool ModifiedDiscrepancyRule::observe(const IterationState& state, std::optional<double>) {
  // Same predicate as modified_discrepancy_check, evaluated lazily: it starts at
  // the equation that failed last time and stops at the first failure.
  const double penalty = M_ / (static_cast<double>(state.k) + a_);
  if (!(penalty <= min_threshold_)) return false;
  const std::size_t P = state.system.equation_count();
  for (std::size_t c = 0; c < P; ++c) {
    const std::size_t i = (first_to_check_ + c) % P;
    const double r = norm(residual(state.system, i, state.u, state.data.y_delta[i]));
    if (!(r + penalty <= tau_ * state.data.delta_i[i])) {
      first_to_check_ = i;
      return false;
    }
  }
  return true;
}

ClassicalDiscrepancyRule::ClassicalDiscrepancyRule(double tau, double delta)
    : tau_(tau), delta_(delta) {
  if (!(tau > 1.0)) throw ConfigError("discrepancy principle needs tau > 1");
  if (!(delta >= 0.0)) throw ConfigError("discrepancy principle needs delta >= 0");
}

bool ClassicalDiscrepancyRule::needs_residual_sum(std::size_t) const { return true; }

bool ClassicalDiscrepancyRule::observe(const IterationState&,
                                       std::optional<double> residual_sq_sum) {
  return classical_discrepancy_check(std::sqrt(*residual_sq_sum), tau_, delta_);
}

}  // namespace stochreg
