#include "stochreg/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <map>
#include <numeric>
#include <ostream>
#include <set>

#include "json.hpp"
#include "stochreg/errors.hpp"
#include "stochreg/image_io.hpp"
#include "stochreg/io.hpp"
#include "stochreg/linear_benchmark.hpp"
#include "stochreg/schlieren.hpp"

namespace stochreg::harness {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

const std::set<std::string> kKnownKeys = {
    "problem",      "method",        "methods",         "stopping_rule",
    "a",            "tau",           "M",               "delta_rel",
    "seeds",        "k_max",         "omega",           "omega_max",
    "lambda_schedule", "lambda_max", "psi_every",       "checkpoint_interval",
    "output_dir",   "initial_guess", "N",               "P",
    "eta",          "rho",           "kappa",           "varrho",
    "record_runtime", "pgm_ascii",
};

const std::set<std::string> kRules = {"heuristic", "modified-discrepancy",
                                      "classical-discrepancy", "none"};

double number_field(const json& j, const std::string& key) {
  const json& v = j.at(key);
  if (!v.is_number()) throw ConfigError("config: '" + key + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError("config: '" + key + "' must be finite");
  return d;
}

std::size_t count_field(const json& j, const std::string& key) {
  const json& v = j.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    throw ConfigError("config: '" + key + "' must be a nonnegative integer");
  }
  return v.get<std::size_t>();
}

std::string string_field(const json& j, const std::string& key) {
  const json& v = j.at(key);
  if (!v.is_string()) throw ConfigError("config: '" + key + "' must be a string");
  return v.get<std::string>();
}

bool bool_field(const json& j, const std::string& key) {
  const json& v = j.at(key);
  if (!v.is_boolean()) throw ConfigError("config: '" + key + "' must be true or false");
  return v.get<bool>();
}

template <typename F>
auto list_field(const json& j, const std::string& key, F&& one) {
  const json& v = j.at(key);
  using T = decltype(one(v));
  std::vector<T> out;
  if (v.is_array()) {
    for (const auto& e : v) out.push_back(one(e));
  } else {
    out.push_back(one(v));
  }
  if (out.empty()) throw ConfigError("config: '" + key + "' must not be empty");
  return out;
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

}  // namespace

Schedule parse_lambda_schedule(const std::string& name) {
  if (name == "inverse-square") return inverse_power_schedule(2.0);
  if (name == "inverse-cube") return inverse_power_schedule(3.0);
  if (name == "zero") return constant_schedule(0.0);
  if (name.rfind("constant:", 0) == 0) {
    const double v = io::parse_double(std::string_view(name).substr(9));
    if (!(v >= 0.0)) throw ConfigError("constant lambda must be nonnegative");
    return constant_schedule(v);
  }
  throw ConfigError("unknown lambda_schedule '" + name +
                    "' (expected inverse-square, inverse-cube, constant:<v>, zero)");
}

RunConfigFile parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  const json j = parse_json(text, "config");
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!kKnownKeys.count(key)) throw ConfigError("config: unknown key '" + key + "'");
  }
  RunConfigFile c;
  c.base_dir = base_dir;
  if (j.contains("problem")) c.problem = string_field(j, "problem");
  if (j.contains("method") && j.contains("methods")) {
    throw ConfigError("config: give either 'method' or 'methods'");
  }
  for (const char* key : {"method", "methods"}) {
    if (j.contains(key)) {
      c.methods = list_field(j, key, [&](const json& e) {
        if (!e.is_string()) throw ConfigError("config: methods must be strings");
        return parse_method(e.get<std::string>());
      });
    }
  }
  if (j.contains("stopping_rule")) c.stopping_rule = string_field(j, "stopping_rule");
  if (!kRules.count(c.stopping_rule)) {
    throw ConfigError("config: unknown stopping_rule '" + c.stopping_rule + "'");
  }
  if (j.contains("a")) c.a = number_field(j, "a");
  if (j.contains("tau")) c.tau = number_field(j, "tau");
  if (j.contains("M")) c.M = number_field(j, "M");
  if (j.contains("delta_rel")) {
    c.delta_rel = list_field(j, "delta_rel", [](const json& e) {
      if (!e.is_number()) throw ConfigError("config: delta_rel entries must be numbers");
      return e.get<double>();
    });
  }
  if (j.contains("seeds")) {
    c.seeds = list_field(j, "seeds", [](const json& e) {
      if (!e.is_number_unsigned()) throw ConfigError("config: seeds must be nonnegative integers");
      return e.get<std::uint64_t>();
    });
  }
  if (j.contains("k_max")) c.k_max = count_field(j, "k_max");
  if (j.contains("omega")) c.omega = number_field(j, "omega");
  if (j.contains("omega_max")) c.omega_max = number_field(j, "omega_max");
  if (j.contains("lambda_schedule")) c.lambda_schedule = string_field(j, "lambda_schedule");
  if (j.contains("lambda_max")) c.lambda_max = number_field(j, "lambda_max");
  if (j.contains("psi_every")) c.psi_every = count_field(j, "psi_every");
  if (j.contains("checkpoint_interval")) c.checkpoint_interval = count_field(j, "checkpoint_interval");
  if (j.contains("output_dir")) c.output_dir = string_field(j, "output_dir");
  if (j.contains("initial_guess")) c.initial_guess = string_field(j, "initial_guess");
  if (j.contains("N")) c.N = count_field(j, "N");
  if (j.contains("P")) c.P = count_field(j, "P");
  if (j.contains("eta")) c.eta = number_field(j, "eta");
  if (j.contains("rho")) c.rho = number_field(j, "rho");
  if (j.contains("kappa")) c.kappa = number_field(j, "kappa");
  if (j.contains("varrho")) c.varrho = number_field(j, "varrho");
  if (j.contains("record_runtime")) c.record_runtime = bool_field(j, "record_runtime");
  if (j.contains("pgm_ascii")) c.pgm_ascii = bool_field(j, "pgm_ascii");

  if (!(c.a >= 1.0)) throw ConfigError("config: a must be >= 1");
  if (!(c.tau > 1.0)) throw ConfigError("config: tau must be > 1");
  if (c.M && !(*c.M > 0.0)) throw ConfigError("config: M must be positive");
  for (double d : c.delta_rel) {
    if (!(d >= 0.0) || !std::isfinite(d)) throw ConfigError("config: delta_rel must be >= 0");
  }
  if (c.k_max && *c.k_max == 0) throw ConfigError("config: k_max must be positive");
  if (c.omega && !(*c.omega > 0.0)) throw ConfigError("config: omega must be positive");
  if (c.omega_max && c.omega && *c.omega_max < *c.omega) {
    throw ConfigError("config: omega_max must be >= omega");
  }
  if (c.lambda_schedule) parse_lambda_schedule(*c.lambda_schedule);
  if (!(c.lambda_max >= 0.0 && c.lambda_max < 0.5)) {
    throw ConfigError("config: lambda_max must lie in [0, 0.5)");
  }
  if (c.psi_every == 0) throw ConfigError("config: psi_every must be >= 1");
  if (c.checkpoint_interval == 0) throw ConfigError("config: checkpoint_interval must be >= 1");
  if (c.rho && !(*c.rho > 0.0)) throw ConfigError("config: rho must be positive");
  if (c.eta && !(*c.eta >= 0.0 && *c.eta < 1.0)) throw ConfigError("config: eta must lie in [0, 1)");
  if (!(c.kappa > 0.0 && c.kappa < 1.0)) throw ConfigError("config: kappa must lie in (0, 1)");
  if (!(c.varrho > 0.0)) throw ConfigError("config: varrho must be positive");
  return c;
}

RunConfigFile load_config(const std::filesystem::path& path) {
  return parse_config(io::read_file(path), path.has_parent_path() ? path.parent_path() : ".");
}

// ---------------------------------------------------------------------------
// Problems

namespace {

Problem linear_preset(const RunConfigFile& c) {
  LinearBenchmarkSpec spec;
  if (c.P) spec.P = *c.P;
  if (c.N) throw ConfigError("config: N applies to image problems only");
  if (c.initial_guess) throw ConfigError("config: initial_guess applies to image problems only");
  auto sys = std::make_shared<LinearSystem>(build_linear_system(spec));
  Problem p;
  p.kind = "linear";
  p.truth = sample_target(spec);
  p.u0.assign(sys->solution_dim(), 0.0);
  p.L = sys->max_row_norm();
  p.eta = 0.0;
  p.rho = distance(p.truth, p.u0);
  const double h = spec.spacing();
  p.omega = 1e-3 / (h * h);
  p.k_max = 1000;
  p.lambda_schedule = "inverse-square";
  p.system = std::move(sys);
  return p;
}

Problem schlieren_preset(const RunConfigFile& c) {
  RadonGeometry geom;
  if (c.N) geom.grid.N = *c.N;
  if (c.P) geom.P = *c.P;
  geom.grid.validate();
  Problem p;
  p.kind = "schlieren";
  p.truth = shepp_logan(geom.grid.N);
  p.image_width = geom.grid.N;
  p.u0 = initial_image(c.initial_guess.value_or("bump:0.3"), geom.grid.N);
  auto sys = std::make_shared<SchlierenSystem>(build_schlieren_system(geom, p.truth));
  p.L = estimate_derivative_bound(*sys, p.u0);
  p.L_is_estimate = true;
  p.eta = 0.1;
  p.eta_is_heuristic = true;
  p.rho = distance(p.truth, p.u0);
  // omega L^2 / P ~ 1
  p.omega = static_cast<double>(geom.P) / (p.L * p.L);
  p.k_max = 1000;
  p.lambda_schedule = "inverse-cube";
  p.system = std::move(sys);
  return p;
}

std::vector<double> number_array(const json& v, const std::string& what) {
  if (!v.is_array()) throw ConfigError(what + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) throw ConfigError(what + " must be an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

Problem custom_problem(const RunConfigFile& c) {
  const std::filesystem::path path = c.base_dir / c.problem;
  if (!std::filesystem::exists(path)) {
    throw ConfigError("problem '" + c.problem + "' is neither a preset nor an existing file");
  }
  const json j = parse_json(io::read_file(path), path.string());
  if (!j.is_object() || !j.contains("type") || !j.at("type").is_string()) {
    throw ConfigError(path.string() + ": needs a string field 'type'");
  }
  for (const auto& [key, value] : j.items()) {
    static const std::set<std::string> known = {"type", "matrix", "observations", "truth",
                                                "initial_guess", "N", "P"};
    if (!known.count(key)) throw ConfigError(path.string() + ": unknown key '" + key + "'");
  }
  if (!j.contains("observations")) throw ConfigError(path.string() + ": 'observations' missing");
  const auto obs_path = path.parent_path() / string_field(j, "observations");
  Problem p;
  p.external_data = load_observations_csv(obs_path);
  p.eta = 0.0;
  const std::string type = string_field(j, "type");
  if (type == "linear") {
    if (!j.contains("matrix") || !j.at("matrix").is_array() || j.at("matrix").empty()) {
      throw ConfigError(path.string() + ": 'matrix' must be a nonempty array of rows");
    }
    std::vector<double> rows;
    std::size_t n = 0;
    for (const auto& row : j.at("matrix")) {
      const auto r = number_array(row, "matrix row");
      if (n == 0) n = r.size();
      if (r.size() != n || n == 0) throw ConfigError(path.string() + ": ragged matrix");
      rows.insert(rows.end(), r.begin(), r.end());
    }
    const std::size_t P = rows.size() / n;
    auto sys = std::make_shared<LinearSystem>(P, n, std::move(rows));
    p.kind = "linear";
    p.L = sys->max_row_norm();
    p.omega = 1.0 / (p.L * p.L);
    p.system = std::move(sys);
  } else if (type == "schlieren") {
    RadonGeometry geom;
    geom.grid.N = count_field(j, "N");
    geom.P = count_field(j, "P");
    geom.grid.validate();
    auto sys = std::make_shared<SchlierenSystem>(geom);
    p.kind = "schlieren";
    p.image_width = geom.grid.N;
    p.eta = 0.1;
    p.eta_is_heuristic = true;
    p.lambda_schedule = "inverse-cube";
    p.system = std::move(sys);
  } else {
    throw ConfigError(path.string() + ": unknown problem type '" + type + "'");
  }
  check_data_shape(*p.system, p.external_data);
  const std::size_t n = p.system->solution_dim();
  if (j.contains("truth")) {
    p.truth = number_array(j.at("truth"), "truth");
    require_same_size(p.truth.size(), n, "custom problem truth");
  }
  if (j.contains("initial_guess")) {
    p.u0 = number_array(j.at("initial_guess"), "initial_guess");
    require_same_size(p.u0.size(), n, "custom problem initial_guess");
  } else if (p.kind == "schlieren") {
    p.u0 = initial_image(c.initial_guess.value_or("bump:0.3"), p.image_width);
  } else {
    p.u0.assign(n, 0.0);
  }
  if (p.kind == "schlieren") {
    p.L = estimate_derivative_bound(static_cast<const SchlierenSystem&>(*p.system), p.u0);
    p.L_is_estimate = true;
    p.omega = static_cast<double>(p.system->equation_count()) / (p.L * p.L);
  }
  if (!p.truth.empty()) p.rho = distance(p.truth, p.u0);
  return p;
}

}  // namespace

Problem build_problem(const RunConfigFile& config) {
  Problem p;
  if (config.problem == "linear-default") {
    p = linear_preset(config);
  } else if (config.problem == "schlieren-default") {
    p = schlieren_preset(config);
  } else {
    p = custom_problem(config);
  }
  if (config.eta) p.eta = *config.eta;
  if (config.rho) p.rho = *config.rho;
  return p;
}

SolverConfig solver_config(const RunConfigFile& c, const Problem& p, Method method,
                           std::uint64_t seed) {
  SolverConfig s;
  s.method = method;
  s.omega_min = c.omega.value_or(p.omega);
  s.omega_max = c.omega_max.value_or(s.omega_min);
  s.lambda_schedule = parse_lambda_schedule(c.lambda_schedule.value_or(p.lambda_schedule));
  s.lambda_max = c.lambda_max;
  s.k_max = c.k_max.value_or(p.k_max);
  s.seed = seed;
  s.psi_every = c.psi_every;
  s.checkpoint_interval = c.checkpoint_interval;
  s.validate();
  return s;
}

ConstantsInputs constants_inputs(const RunConfigFile& c, const Problem& p) {
  if (!p.rho) {
    throw ConfigError("rho is required for a problem without a reference solution");
  }
  const Method method = c.methods.front();
  const SolverConfig s = solver_config(c, p, method, 0);
  ConstantsInputs in;
  in.L = p.L;
  in.L_is_estimate = p.L_is_estimate;
  in.eta = p.eta;
  in.eta_is_heuristic = p.eta_is_heuristic;
  in.rho = *p.rho;
  in.kappa = c.kappa;
  in.varrho = c.varrho;
  in.omega = s.omega_min;
  in.Omega = s.omega_max;
  in.tau = c.tau;
  in.a = c.a;
  in.k_max = s.k_max;
  in.M = c.M;
  const std::string schedule = c.lambda_schedule.value_or(p.lambda_schedule);
  if (!is_damped(method)) {
    in.lambda_max = 0.0;
    in.lambda_kind = LambdaScheduleKind::Zero;
  } else {
    in.lambda_max = s.lambda_max;
    if (schedule == "inverse-square") in.lambda_kind = LambdaScheduleKind::InverseSquare;
    else if (schedule == "inverse-cube") in.lambda_kind = LambdaScheduleKind::InverseCube;
    else if (schedule == "zero") in.lambda_kind = LambdaScheduleKind::Zero;
    else {
      in.lambda_kind = LambdaScheduleKind::Constant;
      in.lambda_constant = s.lambda_schedule(1);
    }
  }
  in.lambda_values.resize(in.k_max);
  for (std::size_t k = 0; k < in.k_max; ++k) {
    in.lambda_values[k] = in.lambda_max == 0.0 ? 0.0 : step_parameters(s, k).lambda;
  }
  return in;
}

std::unique_ptr<StoppingRule> make_rule(const RunConfigFile& c, const Problem& p,
                                        const NoisyObservations& data) {
  if (c.stopping_rule == "heuristic") return std::make_unique<HeuristicRule>(c.a);
  if (c.stopping_rule == "none") return std::make_unique<NoStoppingRule>();
  if (c.stopping_rule == "classical-discrepancy") {
    if (!data.has_noise_levels()) {
      throw ConfigError("classical discrepancy needs the noise level of generated data");
    }
    return std::make_unique<ClassicalDiscrepancyRule>(c.tau, data.delta);
  }
  if (!data.has_noise_levels()) {
    throw ConfigError("modified discrepancy needs per-equation noise levels (benchmark data)");
  }
  double M = 0.0;
  if (c.M) {
    M = *c.M;
  } else {
    const auto report = validate_constants(constants_inputs(c, p));
    if (!report.M) throw ConfigError("modified discrepancy: M cannot be computed (c(rho) undefined)");
    M = *report.M;
  }
  return std::make_unique<ModifiedDiscrepancyRule>(c.a, M, c.tau);
}

SingleRun execute(const Problem& p, const RunConfigFile& c, Method method, double delta_rel,
                  std::uint64_t seed) {
  SingleRun out;
  out.delta_rel = delta_rel;
  out.seed = seed;
  out.method = method;
  RngStream rng(seed);
  if (!p.external_data.empty()) {
    out.data = external_observations(p.external_data);
  } else {
    out.data = add_relative_noise(p.system->exact_data(), delta_rel, rng);
  }
  const SolverConfig sc = solver_config(c, p, method, seed);
  auto rule = make_rule(c, p, out.data);
  const RunInputs in{*p.system, out.data, p.u0, p.truth};

  const auto start = std::chrono::steady_clock::now();
  try {
    out.trace = run(in, sc, *rule, rng);
  } catch (const DivergenceError& e) {
    out.trace = e.trace();
    out.diverged = true;
    out.error = e.what();
  }
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;

  QualityReport& q = out.quality;
  q.k_star = out.trace.selected_index;
  if (q.k_star < out.trace.records.size()) {
    q.E_at_k_star = out.trace.records[q.k_star].rel_err;
    q.psi_at_k_star = out.trace.records[q.k_star].psi;
  }
  if (c.record_runtime) q.runtime_seconds = elapsed.count();
  if (p.image_width > 0 && !p.truth.empty() && !out.diverged) {
    const double range = data_range_of(p.truth);
    q.psnr_db = psnr(out.trace.u_final, p.truth, range);
    q.ssim = ssim(out.trace.u_final, p.truth, p.image_width, range);
  }
  if (out.data.has_noise_levels() && out.data.delta > 0.0) {
    std::vector<double> residuals;
    for (const auto& r : out.trace.records) {
      if (r.res_sq_sum) residuals.push_back(std::sqrt(*r.res_sq_sum));
    }
    if (!residuals.empty()) out.noise_condition = noise_condition_estimate(residuals, out.data.delta);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Artifacts

namespace {

std::string opt(const std::optional<double>& v) { return v ? io::format_double(*v) : ""; }

std::optional<double> parse_opt(std::string_view field) {
  if (field.empty()) return std::nullopt;
  return io::parse_double(field);
}

json json_number(const std::optional<double>& v) {
  if (!v) return nullptr;
  if (std::isinf(*v)) return *v > 0 ? "inf" : "-inf";
  if (std::isnan(*v)) return "nan";
  return *v;
}

}  // namespace

std::string trace_csv(const RunTrace& trace) {
  std::string out = "k,i_k,omega_k,lambda_k,res_ik,res_sq_sum,psi,rel_err\n";
  for (const auto& r : trace.records) {
    out += std::to_string(r.k);
    out += ',';
    if (r.all_equations) out += "all";
    else if (r.i_k) out += std::to_string(*r.i_k);
    for (const auto* v : {&r.omega_k, &r.lambda_k, &r.res_ik, &r.res_sq_sum, &r.psi, &r.rel_err}) {
      out += ',';
      out += opt(*v);
    }
    out += '\n';
  }
  return out;
}

std::vector<TraceRecord> parse_trace_csv(const std::string& text) {
  std::vector<TraceRecord> out;
  std::size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    if (header) {
      if (line != "k,i_k,omega_k,lambda_k,res_ik,res_sq_sum,psi,rel_err") {
        throw ConfigError("trace CSV: unexpected header");
      }
      header = false;
      continue;
    }
    if (line.empty()) continue;
    const auto f = io::split(line, ',');
    if (f.size() != 8) throw ConfigError("trace CSV: expected 8 fields");
    TraceRecord r;
    r.k = static_cast<std::size_t>(io::parse_double(f[0]));
    if (f[1] == "all") r.all_equations = true;
    else if (!f[1].empty()) r.i_k = static_cast<std::size_t>(io::parse_double(f[1]));
    r.omega_k = parse_opt(f[2]);
    r.lambda_k = parse_opt(f[3]);
    r.res_ik = parse_opt(f[4]);
    r.res_sq_sum = parse_opt(f[5]);
    r.psi = parse_opt(f[6]);
    r.rel_err = parse_opt(f[7]);
    out.push_back(r);
  }
  return out;
}

std::string delta_tag(double delta_rel) { return io::format_double(delta_rel); }

std::string summary_json(const SingleRun& run, const RunConfigFile& c) {
  ordered_json j;
  j["problem"] = c.problem;
  j["method"] = to_string(run.method);
  j["stopping_rule"] = run.trace.rule;
  j["delta_rel"] = run.delta_rel;
  j["seed"] = run.seed;
  j["rng"] = std::string(RngStream::kAlgorithmId);
  j["delta"] = run.data.has_noise_levels() ? json(run.data.delta) : json(nullptr);
  j["stop_index"] = run.trace.stop_index;
  j["stop_reason"] = to_string(run.trace.stop_reason);
  ordered_json q;
  q["k_star"] = run.quality.k_star;
  q["E_at_k_star"] = json_number(run.quality.E_at_k_star);
  q["psi_at_k_star"] = json_number(run.quality.psi_at_k_star);
  q["psnr_db"] = json_number(run.quality.psnr_db);
  q["ssim"] = json_number(run.quality.ssim);
  q["runtime_seconds"] = json_number(run.quality.runtime_seconds);
  j["quality"] = q;
  j["noise_condition_estimate"] = json_number(run.noise_condition);
  j["max_excursion"] = run.trace.max_excursion;
  j["warnings"] = run.trace.warnings;
  if (run.diverged) j["error"] = run.error;
  return j.dump(2) + "\n";
}

void apply_overrides(RunConfigFile& config, const CommandOptions& options) {
  if (options.seed_override) config.seeds = {*options.seed_override};
  if (options.k_max_override) {
    if (*options.k_max_override == 0) throw ConfigError("--k-max must be positive");
    config.k_max = *options.k_max_override;
  }
  if (const char* env = std::getenv("STOCHREG_OUTPUT"); env != nullptr && *env != '\0') {
    config.output_dir = env;
  }
}

// ---------------------------------------------------------------------------
// Commands

ExitCode cmd_validate(const RunConfigFile& config, std::ostream& out) {
  const Problem p = build_problem(config);
  const auto report = validate_constants(constants_inputs(config, p));
  const std::string text = to_json(report);
  io::write_file(config.output_dir / "constants_report.json", text + "\n");
  out << text << "\n";
  for (const auto& note : report.notes) out << "note: " << note << "\n";
  return ExitCode::Ok;
}

namespace {

std::string run_stem(const SingleRun& r, bool with_method) {
  std::string stem = delta_tag(r.delta_rel) + "_" + std::to_string(r.seed);
  return with_method ? to_string(r.method) + "_" + stem : stem;
}

void write_run_artifacts(const SingleRun& r, const RunConfigFile& c, const Problem& p,
                         bool with_method) {
  const std::string stem = run_stem(r, with_method);
  io::write_file(c.output_dir / ("trace_" + stem + ".csv"), trace_csv(r.trace));
  io::write_file(c.output_dir / ("summary_" + stem + ".json"), summary_json(r, c));
  if (r.diverged) return;
  if (p.image_width > 0) {
    io::write_pgm(c.output_dir / ("recon_" + stem + ".pgm"), r.trace.u_final, p.image_width,
                  c.pgm_ascii ? io::PgmFormat::Ascii : io::PgmFormat::Binary);
  } else {
    io::write_vector_csv(c.output_dir / ("recon_" + stem + ".csv"), r.trace.u_final);
  }
}

void print_run(std::ostream& out, const SingleRun& r) {
  out << to_string(r.method) << " delta_rel=" << delta_tag(r.delta_rel) << " seed=" << r.seed
      << " stop=" << r.trace.stop_index << " (" << to_string(r.trace.stop_reason) << ")"
      << " k*=" << r.quality.k_star;
  if (r.quality.E_at_k_star) out << " E=" << io::format_double(*r.quality.E_at_k_star);
  if (r.quality.psi_at_k_star) out << " psi=" << io::format_double(*r.quality.psi_at_k_star);
  if (r.quality.psnr_db) out << " psnr=" << io::format_double(*r.quality.psnr_db);
  if (r.quality.ssim) out << " ssim=" << io::format_double(*r.quality.ssim);
  out << "\n";
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

ExitCode cmd_run(const RunConfigFile& config, std::ostream& out) {
  const Problem p = build_problem(config);
  const bool with_method = config.methods.size() > 1;
  for (Method m : config.methods) {
    for (double d : config.delta_rel) {
      for (std::uint64_t seed : config.seeds) {
        const SingleRun r = execute(p, config, m, d, seed);
        write_run_artifacts(r, config, p, with_method);
        print_run(out, r);
        if (r.diverged) {
          out << "diverged: " << r.error << "\n";
          return ExitCode::Divergence;
        }
      }
    }
  }
  return ExitCode::Ok;
}

ExitCode cmd_compare(const RunConfigFile& config, std::ostream& out) {
  if (config.methods.size() < 2) throw ConfigError("compare needs at least two methods");
  const Problem p = build_problem(config);
  std::string rows = "method,delta_rel,seed,k_star,E_k_star,psi_k_star,stop_index,stop_reason\n";
  struct Cell {
    std::vector<double> k_star, E, psi;
  };
  std::map<std::pair<std::size_t, std::size_t>, Cell> cells;
  ExitCode code = ExitCode::Ok;
  for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
    for (std::size_t di = 0; di < config.delta_rel.size(); ++di) {
      for (std::uint64_t seed : config.seeds) {
        const SingleRun r = execute(p, config, config.methods[mi], config.delta_rel[di], seed);
        print_run(out, r);
        if (r.diverged) {
          write_run_artifacts(r, config, p, true);
          code = ExitCode::Divergence;
          break;
        }
        const auto& q = r.quality;
        rows += to_string(r.method) + ',' + delta_tag(r.delta_rel) + ',' + std::to_string(seed) +
                ',' + std::to_string(q.k_star) + ',' + opt(q.E_at_k_star) + ',' +
                opt(q.psi_at_k_star) + ',' + std::to_string(r.trace.stop_index) + ',' +
                to_string(r.trace.stop_reason) + '\n';
        Cell& cell = cells[{mi, di}];
        cell.k_star.push_back(static_cast<double>(q.k_star));
        if (q.E_at_k_star) cell.E.push_back(*q.E_at_k_star);
        if (q.psi_at_k_star) cell.psi.push_back(*q.psi_at_k_star);
      }
      if (code != ExitCode::Ok) break;
    }
    if (code != ExitCode::Ok) break;
  }
  io::write_file(config.output_dir / "comparison.csv", rows);

  std::string table = "method,delta_rel,runs,median_k_star,median_E_k_star,mean_psi_k_star\n";
  for (const auto& [key, cell] : cells) {
    const double mean_psi =
        cell.psi.empty() ? std::nan("")
                         : std::accumulate(cell.psi.begin(), cell.psi.end(), 0.0) /
                               static_cast<double>(cell.psi.size());
    table += to_string(config.methods[key.first]) + ',' + delta_tag(config.delta_rel[key.second]) +
             ',' + std::to_string(cell.k_star.size()) + ',' +
             io::format_double(median(cell.k_star)) + ',' +
             (cell.E.empty() ? "" : io::format_double(median(cell.E))) + ',' +
             (cell.psi.empty() ? "" : io::format_double(mean_psi)) + '\n';
  }
  io::write_file(config.output_dir / "comparison_median.csv", table);
  out << table;
  return code;
}

ExitCode cmd_psi_curve(const RunConfigFile& config, std::ostream& out) {
  if (config.stopping_rule != "heuristic") {
    throw ConfigError("psi-curve needs stopping_rule = heuristic");
  }
  const Problem p = build_problem(config);
  const Method method = config.methods.front();
  std::string markers = "delta_rel,seed,k_star,psi_k_star,E_k_star\n";
  for (double d : config.delta_rel) {
    std::vector<SingleRun> runs;
    std::size_t last = 0;
    for (std::uint64_t seed : config.seeds) {
      runs.push_back(execute(p, config, method, d, seed));
      const SingleRun& r = runs.back();
      print_run(out, r);
      if (r.diverged) {
        write_run_artifacts(r, config, p, false);
        return ExitCode::Divergence;
      }
      last = std::max(last, r.trace.stop_index);
      markers += delta_tag(d) + ',' + std::to_string(r.seed) + ',' +
                 std::to_string(r.quality.k_star) + ',' + opt(r.quality.psi_at_k_star) + ',' +
                 opt(r.quality.E_at_k_star) + '\n';
    }
    std::string csv = "k";
    for (const auto& r : runs) csv += ",psi_seed" + std::to_string(r.seed);
    csv += '\n';
    for (std::size_t k = 0; k <= last; ++k) {
      bool any = false;
      std::string line = std::to_string(k);
      for (const auto& r : runs) {
        line += ',';
        if (k < r.trace.records.size() && r.trace.records[k].psi) {
          line += io::format_double(*r.trace.records[k].psi);
          any = true;
        }
      }
      if (any) csv += line + '\n';
    }
    io::write_file(config.output_dir / ("psi_curve_" + delta_tag(d) + ".csv"), csv);
  }
  io::write_file(config.output_dir / "psi_markers.csv", markers);
  return ExitCode::Ok;
}

int dispatch(const std::string& command, const std::filesystem::path& config_path,
             const CommandOptions& options, std::ostream& out, std::ostream& err) {
  try {
    RunConfigFile config = load_config(config_path);
    apply_overrides(config, options);
    ExitCode code = ExitCode::Ok;
    if (command == "validate") code = cmd_validate(config, out);
    else if (command == "run") code = cmd_run(config, out);
    else if (command == "compare") code = cmd_compare(config, out);
    else if (command == "psi-curve") code = cmd_psi_curve(config, out);
    else throw ConfigError("unknown command '" + command + "'");
    return static_cast<int>(code);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::ConfigError);
  } catch (const DimensionError& e) {
    err << "config error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::ConfigError);
  } catch (const IndexError& e) {
    err << "config error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::ConfigError);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::Failure);
  }
}

}  // namespace stochreg::harness
