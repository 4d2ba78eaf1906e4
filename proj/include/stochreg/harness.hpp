#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stochreg/metrics.hpp"
#include "stochreg/noise.hpp"
#include "stochreg/problem.hpp"
#include "stochreg/solvers.hpp"
#include "stochreg/stopping.hpp"

namespace stochreg::harness {

enum class ExitCode : int { Ok = 0, Failure = 1, ConfigError = 2, Divergence = 3 };

/// Parsed experiment file. Absent optionals take the problem preset's value.
struct RunConfigFile {
  std::string problem = "linear-default";
  /// Directory of the config file; custom problem paths resolve against it.
  std::filesystem::path base_dir = ".";
  std::vector<Method> methods = {Method::Irsgd};
  std::string stopping_rule = "heuristic";
  double a = 100.0;
  double tau = 1.1;
  std::optional<double> M;
  std::vector<double> delta_rel = {1e-2};
  std::vector<std::uint64_t> seeds = {1};
  std::optional<std::size_t> k_max;
  std::optional<double> omega;
  std::optional<double> omega_max;
  std::optional<std::string> lambda_schedule;
  double lambda_max = 0.49;
  std::size_t psi_every = 1;
  std::size_t checkpoint_interval = 50;
  std::filesystem::path output_dir = "out";
  std::optional<std::string> initial_guess;
  std::optional<std::size_t> N;
  std::optional<std::size_t> P;
  std::optional<double> eta;
  std::optional<double> rho;
  double kappa = 0.5;
  double varrho = 0.01;
  bool record_runtime = false;
  bool pgm_ascii = false;
};

/// Strict: unknown keys, wrong types and invalid values throw ConfigError.
RunConfigFile parse_config(const std::string& json_text,
                           const std::filesystem::path& base_dir = ".");
RunConfigFile load_config(const std::filesystem::path& path);

/// A ready-to-run problem instance.
struct Problem {
  std::string kind;  // "linear" or "schlieren"
  std::shared_ptr<const ProblemSystem> system;
  RealVector u0;
  /// Empty when no reference solution is known.
  RealVector truth;
  /// Width of the image for 2-D problems; 0 for vectors.
  std::size_t image_width = 0;
  /// Observed data of a custom problem; empty for benchmark presets.
  std::vector<RealVector> external_data;
  double L = 0.0;
  bool L_is_estimate = false;
  double eta = 0.0;
  bool eta_is_heuristic = false;
  std::optional<double> rho;
  double omega = 0.0;
  std::size_t k_max = 1000;
  std::string lambda_schedule = "inverse-square";
};

Problem build_problem(const RunConfigFile& config);

/// lambda schedule from its config name: inverse-square, inverse-cube,
/// constant:<v>, zero.
Schedule parse_lambda_schedule(const std::string& name);

SolverConfig solver_config(const RunConfigFile& config, const Problem& problem, Method method,
                           std::uint64_t seed);
ConstantsInputs constants_inputs(const RunConfigFile& config, const Problem& problem);

std::unique_ptr<StoppingRule> make_rule(const RunConfigFile& config, const Problem& problem,
                                        const NoisyObservations& data);

struct SingleRun {
  double delta_rel = 0.0;
  std::uint64_t seed = 0;
  Method method = Method::Irsgd;
  NoisyObservations data;
  RunTrace trace;
  QualityReport quality;
  std::optional<double> noise_condition;
  bool diverged = false;
  std::string error;
};

/// Generates data (noise drawn from the seed's stream, indices from the same
/// stream afterwards) and runs one configuration. Divergence is reported in
/// the result rather than thrown.
SingleRun execute(const Problem& problem, const RunConfigFile& config, Method method,
                  double delta_rel, std::uint64_t seed);

/// Trace CSV with header `k,i_k,omega_k,lambda_k,res_ik,res_sq_sum,psi,rel_err`.
std::string trace_csv(const RunTrace& trace);
std::vector<TraceRecord> parse_trace_csv(const std::string& text);

std::string summary_json(const SingleRun& run, const RunConfigFile& config);

/// File-name fragment for a noise level.
std::string delta_tag(double delta_rel);

struct CommandOptions {
  std::optional<std::uint64_t> seed_override;
  std::optional<std::size_t> k_max_override;
};

/// Applies overrides and the STOCHREG_OUTPUT environment variable.
void apply_overrides(RunConfigFile& config, const CommandOptions& options);

ExitCode cmd_validate(const RunConfigFile& config, std::ostream& out);
ExitCode cmd_run(const RunConfigFile& config, std::ostream& out);
ExitCode cmd_compare(const RunConfigFile& config, std::ostream& out);
ExitCode cmd_psi_curve(const RunConfigFile& config, std::ostream& out);

/// Loads the config, applies the options and dispatches; maps errors to exit
/// codes and prints messages to `err`.
int dispatch(const std::string& command, const std::filesystem::path& config_path,
             const CommandOptions& options, std::ostream& out, std::ostream& err);

}  // namespace stochreg::harness
