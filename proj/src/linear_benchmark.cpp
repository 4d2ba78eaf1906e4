#include "stochreg/linear_benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "stochreg/errors.hpp"

namespace stochreg {

double kernel_phi(double t) {
  if (std::abs(t) >= 3.0) return 0.0;
  return 1.0 + std::cos(std::numbers::pi * t / 3.0);
}

double target_u_dagger(double s) {
  constexpr double pi = std::numbers::pi;
  return std::sin(pi * s / 12.0) + std::sin(pi * s / 3.0) + s * s * (1.0 - s) / 200.0;
}

double LinearBenchmarkSpec::spacing() const {
  if (P < 2) throw ConfigError("linear benchmark needs P >= 2");
  return (b_dom - a_dom) / static_cast<double>(P - 1);
}

std::vector<double> LinearBenchmarkSpec::grid() const {
  const double h = spacing();
  std::vector<double> t(P);
  for (std::size_t i = 0; i < P; ++i) t[i] = a_dom + static_cast<double>(i) * h;
  t.back() = b_dom;
  return t;
}

std::vector<double> LinearBenchmarkSpec::trapezoid_weights() const {
  const double h = spacing();
  std::vector<double> w(P, h);
  w.front() = h / 2.0;
  w.back() = h / 2.0;
  return w;
}

LinearSystem::LinearSystem(std::size_t P, std::size_t n, std::vector<double> rows,
                           std::vector<RealVector> exact_data)
    : P_(P), n_(n), rows_(std::move(rows)), exact_data_(std::move(exact_data)) {
  if (P_ == 0 || n_ == 0) throw ConfigError("linear system needs P >= 1 and n >= 1");
  require_same_size(rows_.size(), P_ * n_, "LinearSystem rows");
  if (!exact_data_.empty()) {
    require_same_size(exact_data_.size(), P_, "LinearSystem exact data");
    for (const auto& y : exact_data_) require_same_size(y.size(), 1, "LinearSystem exact data");
  }
}

std::span<const double> LinearSystem::row(std::size_t i) const {
  return std::span<const double>(rows_).subspan(i * n_, n_);
}

double LinearSystem::max_row_norm() const {
  double best = 0.0;
  for (std::size_t i = 0; i < P_; ++i) best = std::max(best, norm(row(i)));
  return best;
}

RealVector LinearSystem::multiply(std::span<const double> u) const {
  require_same_size(u.size(), n_, "LinearSystem::multiply");
  RealVector out(P_);
  for (std::size_t i = 0; i < P_; ++i) out[i] = inner_product(row(i), u);
  return out;
}

std::span<const double> LinearSystem::gram_row(std::size_t i) const {
  if (i >= P_) throw IndexError("gram_row: index out of range");
  std::call_once(gram_->once, [this] {
    auto& G = gram_->values;
    G.assign(P_ * P_, 0.0);
    constexpr std::size_t kBlock = 32;
    for (std::size_t i0 = 0; i0 < P_; i0 += kBlock) {
      const std::size_t i1 = std::min(P_, i0 + kBlock);
      for (std::size_t j = 0; j < P_; ++j) {
        for (std::size_t a = i0; a < i1; ++a) {
          if (j < a) continue;
          const double v = inner_product(row(a), row(j));
          G[a * P_ + j] = v;
          G[j * P_ + a] = v;
        }
      }
    }
  });
  return std::span<const double>(gram_->values).subspan(i * P_, P_);
}

RealVector LinearSystem::do_apply(std::size_t i, std::span<const double> u) const {
  return {inner_product(row(i), u)};
}

RealVector LinearSystem::do_derivative_adjoint(std::size_t i, std::span<const double>,
                                               std::span<const double> r) const {
  return scaled(r[0], row(i));
}

RealVector LinearSystem::do_derivative(std::size_t i, std::span<const double>,
                                       std::span<const double> h) const {
  return {inner_product(row(i), h)};
}

RealVector sample_target(const LinearBenchmarkSpec& spec) {
  const auto s = spec.grid();
  RealVector u(s.size());
  std::transform(s.begin(), s.end(), u.begin(), target_u_dagger);
  return u;
}

LinearSystem build_linear_system(const LinearBenchmarkSpec& spec) {
  if (spec.P < 2) throw ConfigError("linear benchmark needs P >= 2");
  const auto t = spec.grid();
  const auto w = spec.trapezoid_weights();
  const std::size_t n = spec.P;
  std::vector<double> rows(spec.P * n);
  for (std::size_t i = 0; i < spec.P; ++i) {
    for (std::size_t j = 0; j < n; ++j) rows[i * n + j] = w[j] * kernel_phi(t[i] - t[j]);
  }
  LinearSystem without_data(spec.P, n, rows);
  const RealVector y = without_data.multiply(sample_target(spec));
  std::vector<RealVector> exact(spec.P);
  for (std::size_t i = 0; i < spec.P; ++i) exact[i] = {y[i]};
  return LinearSystem(spec.P, n, std::move(rows), std::move(exact));
}

double quadrature_convolution(const LinearBenchmarkSpec& spec, double t,
                              std::span<const double> u_samples) {
  const auto s = spec.grid();
  const auto w = spec.trapezoid_weights();
  require_same_size(u_samples.size(), s.size(), "quadrature_convolution");
  std::vector<double> terms(s.size());
  for (std::size_t j = 0; j < s.size(); ++j) terms[j] = w[j] * kernel_phi(t - s[j]) * u_samples[j];
  return pairwise_sum(terms);
}

}  // namespace stochreg
