#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "stochreg/rng.hpp"
#include "stochreg/vector_ops.hpp"

namespace stochreg {

struct NoisyObservations {
  std::vector<RealVector> y_delta;
  /// ||y_i^delta - y_i^dagger|| per equation; empty when the data were supplied
  /// externally and the exact data are unknown.
  std::vector<double> delta_i;
  /// sqrt(sum_i delta_i^2), 0 when unknown.
  double delta = 0.0;
  /// Relative level used to generate the data; 0 for external data.
  double delta_rel = 0.0;

  bool has_noise_levels() const { return !delta_i.empty(); }
};

/// Entrywise y^delta = y + eps * delta_rel * |y| with eps ~ N(0,1) drawn from
/// `rng` in order (equation ascending, entry ascending). One normal is drawn
/// per entry even when delta_rel == 0, so the stream position after this call
/// does not depend on the noise level.
NoisyObservations add_relative_noise(std::span<const RealVector> y_exact, double delta_rel,
                                     RngStream& rng);

/// The same model with the standard-normal factors given explicitly (`eps`
/// has the layout of `y_exact`).
NoisyObservations perturb_relative(std::span<const RealVector> y_exact,
                                   std::span<const RealVector> eps, double delta_rel);

/// Wraps data of unknown noise (no exact data).
NoisyObservations external_observations(std::vector<RealVector> y);

/// CSV with header `i,entry_index,value`, one row per scalar entry.
void save_observations_csv(const std::filesystem::path& path,
                           std::span<const RealVector> y);
std::vector<RealVector> load_observations_csv(const std::filesystem::path& path);

}  // namespace stochreg
