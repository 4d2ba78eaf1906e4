#include "stochreg/noise.hpp"

#include <cmath>
#include <map>
#include <string>

#include "stochreg/errors.hpp"
#include "stochreg/io.hpp"

namespace stochreg {

NoisyObservations add_relative_noise(std::span<const RealVector> y_exact, double delta_rel,
                                     RngStream& rng) {
  if (!(delta_rel >= 0.0) || !std::isfinite(delta_rel)) {
    throw ConfigError("delta_rel must be a finite nonnegative number");
  }
  std::vector<RealVector> eps(y_exact.size());
  for (std::size_t i = 0; i < y_exact.size(); ++i) {
    eps[i].resize(y_exact[i].size());
    for (double& e : eps[i]) e = rng.normal();
  }
  return perturb_relative(y_exact, eps, delta_rel);
}

NoisyObservations perturb_relative(std::span<const RealVector> y_exact,
                                   std::span<const RealVector> eps, double delta_rel) {
  if (!(delta_rel >= 0.0) || !std::isfinite(delta_rel)) {
    throw ConfigError("delta_rel must be a finite nonnegative number");
  }
  require_same_size(eps.size(), y_exact.size(), "noise factors");
  NoisyObservations obs;
  obs.delta_rel = delta_rel;
  obs.y_delta.reserve(y_exact.size());
  obs.delta_i.reserve(y_exact.size());
  std::vector<double> delta_sq(y_exact.size());
  for (std::size_t i = 0; i < y_exact.size(); ++i) {
    const RealVector& y = y_exact[i];
    require_same_size(eps[i].size(), y.size(), "noise factors");
    RealVector perturbation(y.size());
    for (std::size_t j = 0; j < y.size(); ++j) {
      perturbation[j] = eps[i][j] * delta_rel * std::abs(y[j]);
    }
    RealVector noisy = y;
    if (delta_rel > 0.0) {
      for (std::size_t j = 0; j < y.size(); ++j) noisy[j] += perturbation[j];
    }
    delta_sq[i] = squared_norm(perturbation);
    obs.delta_i.push_back(std::sqrt(delta_sq[i]));
    obs.y_delta.push_back(std::move(noisy));
  }
  obs.delta = std::sqrt(pairwise_sum(delta_sq));
  return obs;
}

NoisyObservations external_observations(std::vector<RealVector> y) {
  NoisyObservations obs;
  obs.y_delta = std::move(y);
  return obs;
}

void save_observations_csv(const std::filesystem::path& path,
                           std::span<const RealVector> y) {
  std::string out = "i,entry_index,value\n";
  for (std::size_t i = 0; i < y.size(); ++i) {
    for (std::size_t j = 0; j < y[i].size(); ++j) {
      out += std::to_string(i) + ',' + std::to_string(j) + ',' + io::format_double(y[i][j]) +
             '\n';
    }
  }
  io::write_file(path, out);
}

std::vector<RealVector> load_observations_csv(const std::filesystem::path& path) {
  const auto lines = io::read_lines(path);
  if (lines.empty() || lines.front() != "i,entry_index,value") {
    throw ConfigError(path.string() + ": expected header 'i,entry_index,value'");
  }
  std::map<std::size_t, std::map<std::size_t, double>> entries;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    if (lines[n].empty()) continue;
    const auto fields = io::split(lines[n], ',');
    if (fields.size() != 3) {
      throw ConfigError(path.string() + ": line " + std::to_string(n + 1) +
                        " must have 3 fields");
    }
    const auto i = static_cast<std::size_t>(io::parse_double(fields[0]));
    const auto j = static_cast<std::size_t>(io::parse_double(fields[1]));
    if (!entries[i].emplace(j, io::parse_double(fields[2])).second) {
      throw ConfigError(path.string() + ": duplicate entry (" + std::to_string(i) + ", " +
                        std::to_string(j) + ")");
    }
  }
  std::vector<RealVector> y(entries.empty() ? 0 : entries.rbegin()->first + 1);
  for (const auto& [i, row] : entries) {
    y[i].resize(row.rbegin()->first + 1);
    if (row.size() != y[i].size()) {
      throw ConfigError(path.string() + ": equation " + std::to_string(i) +
                        " has missing entries");
    }
    for (const auto& [j, v] : row) y[i][j] = v;
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i].empty()) throw ConfigError(path.string() + ": equation " + std::to_string(i) + " missing");
  }
  return y;
}

}  // namespace stochreg
