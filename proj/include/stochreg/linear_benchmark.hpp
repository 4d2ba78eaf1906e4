#pragma once

#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "stochreg/problem.hpp"

namespace stochreg {

/// phi(t) = 1 + cos(pi t / 3) for |t| < 3, else 0.
double kernel_phi(double t);

/// u(s) = sin(pi s / 12) + sin(pi s / 3) + s^2 (1 - s) / 200
double target_u_dagger(double s);

/// First-kind convolution equation on [a_dom, b_dom], sampled at P points and
/// discretized with the trapezoidal rule on the same grid.
struct LinearBenchmarkSpec {
  std::size_t P = 1000;
  double a_dom = -6.0;
  double b_dom = 6.0;

  double spacing() const;
  /// t_i = a + i (b - a) / (P - 1); the solution grid s_j coincides.
  std::vector<double> grid() const;
  std::vector<double> trapezoid_weights() const;
};

/// Dense linear system F_i(u) = sum_j w_j phi(t_i - s_j) u_j, one scalar per
/// equation. Immutable after construction.
class LinearSystem final : public ProblemSystem {
 public:
  /// `rows` is row-major P x n.
  LinearSystem(std::size_t P, std::size_t n, std::vector<double> rows,
               std::vector<RealVector> exact_data = {});

  std::size_t equation_count() const override { return P_; }
  std::size_t solution_dim() const override { return n_; }
  std::size_t data_dim(std::size_t) const override { return 1; }
  bool has_derivative() const override { return true; }
  std::span<const RealVector> exact_data() const override { return exact_data_; }

  std::span<const double> row(std::size_t i) const;
  /// max_i ||K_i||, the exact bound L on ||F_i'|| for scalar rows.
  double max_row_norm() const;

  RealVector multiply(std::span<const double> u) const;

  /// Row i of K K^T, assembled on first use.
  std::span<const double> gram_row(std::size_t i) const;

 protected:
  RealVector do_apply(std::size_t i, std::span<const double> u) const override;
  RealVector do_derivative_adjoint(std::size_t i, std::span<const double> u,
                                   std::span<const double> r) const override;
  RealVector do_derivative(std::size_t i, std::span<const double> u,
                           std::span<const double> h) const override;

 private:
  std::size_t P_;
  std::size_t n_;
  std::vector<double> rows_;
  std::vector<RealVector> exact_data_;

  struct GramCache {
    std::once_flag once;
    std::vector<double> values;
  };
  std::shared_ptr<GramCache> gram_ = std::make_shared<GramCache>();
};

/// Builds the benchmark operator with exact data y_i = F_i(u^dagger samples).
/// Throws ConfigError for P < 2.
LinearSystem build_linear_system(const LinearBenchmarkSpec& spec);

/// u^dagger sampled on the benchmark grid.
RealVector sample_target(const LinearBenchmarkSpec& spec);

/// Trapezoidal approximation of int phi(t - s) u(s) ds on the benchmark grid, for
/// arbitrary t (used to check quadrature convergence).
double quadrature_convolution(const LinearBenchmarkSpec& spec, double t,
                              std::span<const double> u_samples);

}  // namespace stochreg
