#include "stochreg/vector_ops.hpp"

#include <cmath>
#include <string>

#include "stochreg/errors.hpp"

namespace stochreg {

namespace {

constexpr std::size_t kLeafSize = 8;

template <typename Term>
double tree_sum(std::size_t begin, std::size_t end, const Term& term) {
  const std::size_t count = end - begin;
  if (count <= kLeafSize) {
    double s = 0.0;
    for (std::size_t j = begin; j < end; ++j) s += term(j);
    return s;
  }
  const std::size_t mid = begin + count / 2;
  return tree_sum(begin, mid, term) + tree_sum(mid, end, term);
}

// Eight interleaved partial sums combined in a fixed pattern. The order is
// independent of the data, so results are reproducible, and it vectorizes.
template <typename Term>
double lane_sum(std::size_t n, const Term& term) {
  double acc[kLeafSize] = {};
  std::size_t j = 0;
  for (; j + kLeafSize <= n; j += kLeafSize) {
    for (std::size_t l = 0; l < kLeafSize; ++l) acc[l] += term(j + l);
  }
  for (std::size_t l = 0; j < n; ++j, ++l) acc[l] += term(j);
  return ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
}

}  // namespace

void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": length " + std::to_string(a) +
                         " does not match " + std::to_string(b));
  }
}

double pairwise_sum(std::span<const double> values) {
  return tree_sum(0, values.size(), [&](std::size_t j) { return values[j]; });
}

double inner_product(std::span<const double> a, std::span<const double> b) {
  require_same_size(a.size(), b.size(), "inner_product");
  return lane_sum(a.size(), [&](std::size_t j) { return a[j] * b[j]; });
}

double weighted_inner_product(std::span<const double> a, std::span<const double> b,
                              std::span<const double> weights) {
  require_same_size(a.size(), b.size(), "weighted_inner_product");
  require_same_size(a.size(), weights.size(), "weighted_inner_product weights");
  return lane_sum(a.size(), [&](std::size_t j) { return weights[j] * a[j] * b[j]; });
}

double squared_norm(std::span<const double> v) {
  return lane_sum(v.size(), [&](std::size_t j) { return v[j] * v[j]; });
}

double norm(std::span<const double> v) { return std::sqrt(squared_norm(v)); }

double distance(std::span<const double> a, std::span<const double> b) {
  require_same_size(a.size(), b.size(), "distance");
  return std::sqrt(lane_sum(a.size(), [&](std::size_t j) {
    const double d = a[j] - b[j];
    return d * d;
  }));
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  require_same_size(x.size(), y.size(), "axpy");
  for (std::size_t j = 0; j < x.size(); ++j) y[j] += alpha * x[j];
}

RealVector subtract(std::span<const double> a, std::span<const double> b) {
  require_same_size(a.size(), b.size(), "subtract");
  RealVector out(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) out[j] = a[j] - b[j];
  return out;
}

RealVector scaled(double alpha, std::span<const double> x) {
  RealVector out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = alpha * x[j];
  return out;
}

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace stochreg
