#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>

namespace stochreg {

/// ||u - truth|| / ||truth||, optionally with quadrature weights.
/// Throws ConfigError when truth is zero.
double relative_error(std::span<const double> u, std::span<const double> truth,
                      std::span<const double> weights = {});

/// 10 log10(range^2 / MSE); +infinity when the images are identical.
double psnr(std::span<const double> a, std::span<const double> b, double data_range);

/// Mean SSIM over the valid region of an 11x11 Gaussian window (sigma 1.5),
/// C1 = (0.01 range)^2, C2 = (0.03 range)^2. Images are row-major, `width`
/// pixels per row.
double ssim(std::span<const double> a, std::span<const double> b, std::size_t width,
            double data_range);

/// max(truth) - min(truth)
double data_range_of(std::span<const double> truth);

struct QualityReport {
  std::size_t k_star = 0;
  std::optional<double> E_at_k_star;
  std::optional<double> psi_at_k_star;
  std::optional<double> psnr_db;
  std::optional<double> ssim;
  std::optional<double> runtime_seconds;
};

}  // namespace stochreg
