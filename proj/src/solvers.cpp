#include "stochreg/solvers.hpp"

#include <algorithm>
#include <cmath>

#include "stochreg/linear_benchmark.hpp"
#include "stochreg/metrics.hpp"

namespace stochreg {

Method parse_method(std::string_view name) {
  if (name == "landweber") return Method::Landweber;
  if (name == "ir-landweber") return Method::IrLandweber;
  if (name == "sgd") return Method::Sgd;
  if (name == "irsgd") return Method::Irsgd;
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

std::string to_string(Method method) {
  switch (method) {
    case Method::Landweber: return "landweber";
    case Method::IrLandweber: return "ir-landweber";
    case Method::Sgd: return "sgd";
    case Method::Irsgd: return "irsgd";
  }
  return "?";
}

bool is_stochastic(Method method) { return method == Method::Sgd || method == Method::Irsgd; }
bool is_damped(Method method) {
  return method == Method::IrLandweber || method == Method::Irsgd;
}

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::Rule: return "rule";
    case StopReason::Cap: return "cap";
    case StopReason::Divergence: return "divergence";
  }
  return "?";
}

Schedule constant_schedule(double value) {
  return [value](std::size_t) { return value; };
}

Schedule inverse_power_schedule(double p) {
  return [p](std::size_t k) {
    if (k == 0) return 0.0;
    return std::pow(static_cast<double>(k), -p);
  };
}

void SolverConfig::validate() const {
  if (!(omega_min > 0.0) || !std::isfinite(omega_min)) {
    throw ConfigError("omega_min must be positive");
  }
  if (!(omega_max >= omega_min) || !std::isfinite(omega_max)) {
    throw ConfigError("omega_max must be finite and >= omega_min");
  }
  if (!(lambda_max >= 0.0 && lambda_max < 0.5)) {
    throw ConfigError("lambda_max must lie in [0, 1/2)");
  }
  if (k_max == 0) throw ConfigError("k_max must be positive");
  if (psi_every == 0) throw ConfigError("psi_every must be >= 1");
  if (checkpoint_interval == 0) throw ConfigError("checkpoint_interval must be >= 1");
}

namespace {

void warn_once(std::vector<std::string>* warnings, const std::string& message) {
  if (warnings == nullptr) return;
  if (std::find(warnings->begin(), warnings->end(), message) == warnings->end()) {
    warnings->push_back(message);
  }
}

}  // namespace

StepParameters step_parameters(const SolverConfig& config, std::size_t k,
                               std::vector<std::string>* warnings) {
  double omega = config.omega_schedule ? config.omega_schedule(k) : config.omega_min;
  if (!std::isfinite(omega)) throw ConfigError("omega schedule returned a non-finite value");
  if (omega < config.omega_min || omega > config.omega_max) {
    warn_once(warnings, "omega_k clamped into [omega_min, omega_max]");
    omega = std::clamp(omega, config.omega_min, config.omega_max);
  }
  double lambda = config.lambda_schedule ? config.lambda_schedule(k) : 0.0;
  if (!std::isfinite(lambda)) throw ConfigError("lambda schedule returned a non-finite value");
  if (lambda > config.lambda_max) {
    warn_once(warnings, "lambda_k clamped to lambda_max = " + std::to_string(config.lambda_max));
    lambda = config.lambda_max;
  } else if (lambda < 0.0) {
    warn_once(warnings, "negative lambda_k clamped to 0");
    lambda = 0.0;
  }
  return {omega, lambda};
}

namespace {

RealVector combine(std::span<const double> u, std::span<const double> u0,
                   std::span<const double> g, double omega, double lambda) {
  RealVector out(u.size());
  for (std::size_t j = 0; j < u.size(); ++j) {
    out[j] = u[j] - omega * g[j] - lambda * (u[j] - u0[j]);
  }
  return out;
}

/// sum_i F_i'(u)^* (F_i(u) - y_i) and the squared residual norms.
RealVector full_gradient(const ProblemSystem& sys, std::span<const double> u,
                         std::span<const RealVector> y, std::vector<double>* res_sq) {
  check_data_shape(sys, y);
  RealVector g(sys.solution_dim(), 0.0);
  if (res_sq) res_sq->assign(y.size(), 0.0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const RealVector r = residual(sys, i, u, y[i]);
    if (res_sq) (*res_sq)[i] = squared_norm(r);
    const RealVector gi = sys.derivative_adjoint(i, u, r);
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += gi[j];
  }
  return g;
}

void check_lambda(double lambda) {
  if (!(lambda >= 0.0 && lambda < 0.5)) throw ConfigError("lambda_k must lie in [0, 1/2)");
}

}  // namespace

RealVector landweber_step(const ProblemSystem& sys, std::span<const double> u,
                          std::span<const RealVector> y, double omega) {
  require_same_size(u.size(), sys.solution_dim(), "landweber_step: u");
  const RealVector g = full_gradient(sys, u, y, nullptr);
  return combine(u, u, g, omega, 0.0);
}

RealVector ir_landweber_step(const ProblemSystem& sys, std::span<const double> u,
                             std::span<const double> u0, double lambda,
                             std::span<const RealVector> y, double omega) {
  if (!(lambda >= 0.0 && lambda < 1.0)) throw ConfigError("lambda_k must lie in [0, 1)");
  require_same_size(u.size(), sys.solution_dim(), "ir_landweber_step: u");
  require_same_size(u0.size(), sys.solution_dim(), "ir_landweber_step: u0");
  const RealVector g = full_gradient(sys, u, y, nullptr);
  return combine(u, u0, g, omega, lambda);
}

RealVector sgd_step(const ProblemSystem& sys, std::span<const double> u, std::size_t i,
                    double omega, std::span<const double> y_i) {
  return irsgd_step(sys, u, u, i, omega, 0.0, y_i);
}

RealVector irsgd_step(const ProblemSystem& sys, std::span<const double> u,
                      std::span<const double> u0, std::size_t i, double omega, double lambda,
                      std::span<const double> y_i) {
  check_lambda(lambda);
  if (!(omega > 0.0)) throw ConfigError("omega_k must be positive");
  require_same_size(u0.size(), u.size(), "irsgd_step: u0");
  const RealVector r = residual(sys, i, u, y_i);
  const RealVector g = sys.derivative_adjoint(i, u, r);
  return combine(u, u0, g, omega, lambda);
}

namespace {

struct Checkpoint {
  std::size_t k;
  RealVector u;
  std::uint64_t draws;
};

struct StepInfo {
  std::size_t i = 0;
  double r0 = 0.0;
  double omega = 0.0;
  double lambda = 0.0;
};

/// Keeps F(u_k) for a linear system with scalar equations, updated through
/// rows of K K^T so that the residual sum costs O(P) per step. Recomputed
/// exactly at every checkpoint.
class LinearResidualTracker {
 public:
  LinearResidualTracker(const LinearSystem& sys, std::span<const double> u0)
      : sys_(sys), Fu0_(sys.multiply(u0)) {}

  void reset(std::span<const double> u) { Fu_ = sys_.multiply(u); }

  void step(const StepInfo& s) {
    const auto G = sys_.gram_row(s.i);
    const double c = s.omega * s.r0;
    for (std::size_t p = 0; p < Fu_.size(); ++p) {
      Fu_[p] = Fu_[p] - c * G[p] - s.lambda * (Fu_[p] - Fu0_[p]);
    }
  }

  double residual_sq(std::span<const RealVector> y) {
    sq_.resize(Fu_.size());
    for (std::size_t p = 0; p < Fu_.size(); ++p) {
      const double d = Fu_[p] - y[p][0];
      sq_[p] = d * d;
    }
    return pairwise_sum(sq_);
  }

 private:
  const LinearSystem& sys_;
  RealVector Fu0_;
  RealVector Fu_;
  std::vector<double> sq_;
};

class Stepper {
 public:
  Stepper(const RunInputs& in, const SolverConfig& config) : in_(in), config_(config) {}

  /// u_{k+1} from u_k; fills the step fields of `rec` when given.
  RealVector step(std::span<const double> u, std::size_t k, RngStream& rng, TraceRecord* rec,
                  std::vector<std::string>* warnings, StepInfo* info = nullptr) const {
    const ProblemSystem& sys = in_.system;
    StepParameters sp = step_parameters(config_, k, warnings);
    if (!is_damped(config_.method)) sp.lambda = 0.0;
    if (rec) {
      rec->omega_k = sp.omega;
      rec->lambda_k = sp.lambda;
    }
    RealVector g;
    if (is_stochastic(config_.method)) {
      const std::size_t i = rng.draw_index(sys.equation_count());
      const RealVector r = residual(sys, i, u, in_.data.y_delta[i]);
      if (rec) {
        rec->i_k = i;
        rec->res_ik = norm(r);
      }
      g = sys.derivative_adjoint(i, u, r);
      if (info) *info = {i, r.empty() ? 0.0 : r[0], sp.omega, sp.lambda};
    } else {
      std::vector<double> res_sq;
      g = full_gradient(sys, u, in_.data.y_delta, &res_sq);
      if (rec) {
        rec->all_equations = true;
        rec->res_ik = std::sqrt(pairwise_sum(res_sq));
      }
    }
    return combine(u, in_.u0, g, sp.omega, sp.lambda);
  }

 private:
  const RunInputs& in_;
  const SolverConfig& config_;
};

}  // namespace

RunTrace run(const RunInputs& in, const SolverConfig& config, StoppingRule& rule,
             std::optional<RngStream> rng_start) {
  config.validate();
  const ProblemSystem& sys = in.system;
  check_data_shape(sys, in.data.y_delta);
  require_same_size(in.u0.size(), sys.solution_dim(), "run: u0");
  if (!in.truth.empty()) require_same_size(in.truth.size(), sys.solution_dim(), "run: truth");
  if (!all_finite(in.u0)) throw ConfigError("run: initial guess has non-finite entries");

  RngStream rng = rng_start.value_or(RngStream(config.seed));
  const std::uint64_t seed = rng.seed();
  Stepper stepper(in, config);

  RunTrace trace;
  trace.method = config.method;
  trace.rule = rule.name();
  rule.begin(sys, in.data);

  const double bound = 1e6 * (1.0 + norm(in.u0));
  std::vector<Checkpoint> checkpoints;
  RealVector u(in.u0.begin(), in.u0.end());

  std::optional<LinearResidualTracker> tracker;
  const auto* linear = dynamic_cast<const LinearSystem*>(&sys);
  if (config.incremental_residuals && linear != nullptr && is_stochastic(config.method)) {
    tracker.emplace(*linear, in.u0);
  }

  for (std::size_t k = 0;; ++k) {
    if (k % config.checkpoint_interval == 0) {
      checkpoints.push_back({k, u, rng.draw_count()});
      if (tracker) tracker->reset(u);
    }

    TraceRecord rec;
    rec.k = k;
    const bool at_cap = k == config.k_max;
    std::optional<double> res_sum;
    if (at_cap || k % config.psi_every == 0 || rule.needs_residual_sum(k)) {
      res_sum = tracker ? tracker->residual_sq(in.data.y_delta)
                        : full_residual_sq(sys, u, in.data.y_delta);
      rec.res_sq_sum = res_sum;
      rec.psi = rule.psi_value(k, *res_sum);
    }
    if (!in.truth.empty()) rec.rel_err = relative_error(u, in.truth, in.truth_weights);
    trace.max_excursion = std::max(trace.max_excursion, distance(u, in.u0));

    const bool stop = rule.observe(IterationState{k, u, sys, in.data}, res_sum);
    if (stop || at_cap) {
      trace.records.push_back(rec);
      trace.stop_index = k;
      trace.stop_reason = stop ? StopReason::Rule : StopReason::Cap;
      break;
    }

    StepInfo info;
    RealVector next = stepper.step(u, k, rng, &rec, &trace.warnings, &info);
    if (tracker) tracker->step(info);
    trace.records.push_back(rec);
    if (!all_finite(next) || norm(next) > bound) {
      trace.stop_index = k;
      trace.selected_index = k;
      trace.stop_reason = StopReason::Divergence;
      trace.u_final = std::move(u);
      throw DivergenceError("iterate diverged after step " + std::to_string(k),
                            std::move(trace));
    }
    u = std::move(next);
  }

  trace.selected_index = rule.selected_index(trace.stop_index);
  if (trace.selected_index == trace.stop_index) {
    trace.u_final = std::move(u);
    return trace;
  }
  if (trace.selected_index > trace.stop_index) {
    throw Error("stopping rule selected an index beyond the last iterate");
  }
  auto cp = std::find_if(checkpoints.rbegin(), checkpoints.rend(),
                         [&](const Checkpoint& c) { return c.k <= trace.selected_index; });
  RealVector v = cp->u;
  RngStream replay = RngStream::at(seed, cp->draws);
  for (std::size_t k = cp->k; k < trace.selected_index; ++k) {
    v = stepper.step(v, k, replay, nullptr, nullptr);
  }
  trace.u_final = std::move(v);
  return trace;
}

bool ball_confined(const RunTrace& trace, double rho, double c_rho_value) {
  return trace.max_excursion <= rho + c_rho_value;
}

}  // namespace stochreg
