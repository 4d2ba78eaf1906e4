#include "stochreg/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "stochreg/errors.hpp"
#include "stochreg/vector_ops.hpp"

namespace stochreg {

double relative_error(std::span<const double> u, std::span<const double> truth,
                      std::span<const double> weights) {
  require_same_size(u.size(), truth.size(), "relative_error");
  if (weights.empty()) {
    const double denom = norm(truth);
    if (denom == 0.0) throw ConfigError("relative_error: truth is zero");
    return distance(u, truth) / denom;
  }
  const RealVector diff = subtract(u, truth);
  const double denom = weighted_inner_product(truth, truth, weights);
  if (denom == 0.0) throw ConfigError("relative_error: truth is zero");
  return std::sqrt(weighted_inner_product(diff, diff, weights) / denom);
}

double psnr(std::span<const double> a, std::span<const double> b, double data_range) {
  require_same_size(a.size(), b.size(), "psnr");
  if (!(data_range > 0.0)) throw ConfigError("psnr: data range must be positive");
  if (a.empty()) throw DimensionError("psnr: empty images");
  const double mse = distance(a, b) * distance(a, b) / static_cast<double>(a.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(data_range * data_range / mse);
}

double data_range_of(std::span<const double> truth) {
  if (truth.empty()) throw DimensionError("data range of an empty image");
  const auto [lo, hi] = std::minmax_element(truth.begin(), truth.end());
  return *hi - *lo;
}

namespace {

constexpr std::size_t kWindow = 11;

std::array<double, kWindow> gaussian_taps() {
  std::array<double, kWindow> g{};
  const double sigma = 1.5;
  double sum = 0.0;
  for (std::size_t j = 0; j < kWindow; ++j) {
    const double x = static_cast<double>(j) - 5.0;
    g[j] = std::exp(-x * x / (2.0 * sigma * sigma));
    sum += g[j];
  }
  for (double& v : g) v /= sum;
  return g;
}

// Separable valid-region filter: (H - 10) x (W - 10) output.
std::vector<double> filter_valid(const std::vector<double>& img, std::size_t H, std::size_t W,
                                 const std::array<double, kWindow>& g) {
  const std::size_t oh = H - kWindow + 1;
  const std::size_t ow = W - kWindow + 1;
  std::vector<double> rows(H * ow);
  for (std::size_t r = 0; r < H; ++r) {
    for (std::size_t c = 0; c < ow; ++c) {
      double s = 0.0;
      for (std::size_t t = 0; t < kWindow; ++t) s += g[t] * img[r * W + c + t];
      rows[r * ow + c] = s;
    }
  }
  std::vector<double> out(oh * ow);
  for (std::size_t r = 0; r < oh; ++r) {
    for (std::size_t c = 0; c < ow; ++c) {
      double s = 0.0;
      for (std::size_t t = 0; t < kWindow; ++t) s += g[t] * rows[(r + t) * ow + c];
      out[r * ow + c] = s;
    }
  }
  return out;
}

}  // namespace

double ssim(std::span<const double> a, std::span<const double> b, std::size_t width,
            double data_range) {
  require_same_size(a.size(), b.size(), "ssim");
  if (width == 0 || a.size() % width != 0) throw DimensionError("ssim: size is not a multiple of width");
  if (!(data_range > 0.0)) throw ConfigError("ssim: data range must be positive");
  const std::size_t H = a.size() / width;
  const std::size_t W = width;
  if (H < kWindow || W < kWindow) throw ConfigError("ssim: image smaller than the 11x11 window");

  const auto g = gaussian_taps();
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    xx[j] = x[j] * x[j];
    yy[j] = y[j] * y[j];
    xy[j] = x[j] * y[j];
  }
  const auto mx = filter_valid(x, H, W, g);
  const auto my = filter_valid(y, H, W, g);
  const auto sxx = filter_valid(xx, H, W, g);
  const auto syy = filter_valid(yy, H, W, g);
  const auto sxy = filter_valid(xy, H, W, g);

  const double C1 = (0.01 * data_range) * (0.01 * data_range);
  const double C2 = (0.03 * data_range) * (0.03 * data_range);
  std::vector<double> local(mx.size());
  for (std::size_t j = 0; j < mx.size(); ++j) {
    const double vx = sxx[j] - mx[j] * mx[j];
    const double vy = syy[j] - my[j] * my[j];
    const double cov = sxy[j] - mx[j] * my[j];
    local[j] = ((2.0 * mx[j] * my[j] + C1) * (2.0 * cov + C2)) /
               ((mx[j] * mx[j] + my[j] * my[j] + C1) * (vx + vy + C2));
  }
  return pairwise_sum(local) / static_cast<double>(local.size());
}

}  // namespace stochreg
