#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "stochreg/vector_ops.hpp"

namespace stochreg {

/// A system of P operator equations F_i(u) = y_i, i = 0..P-1, over a common
/// unknown u of dimension n.
///
/// The public entry points validate indices and lengths and then dispatch to
/// the protected hooks. Implementations must be pure: identical arguments give
/// bit-identical results, and concurrent calls on a shared instance are safe.
class ProblemSystem {
 public:
  virtual ~ProblemSystem() = default;

  virtual std::size_t equation_count() const = 0;
  virtual std::size_t solution_dim() const = 0;
  /// Length of y_i.
  virtual std::size_t data_dim(std::size_t i) const = 0;

  /// F_i(u)
  RealVector apply(std::size_t i, std::span<const double> u) const;
  /// F_i'(u)^* r
  RealVector derivative_adjoint(std::size_t i, std::span<const double> u,
                                std::span<const double> r) const;
  /// F_i'(u) h. Only available when has_derivative() is true.
  RealVector derivative(std::size_t i, std::span<const double> u,
                        std::span<const double> h) const;

  virtual bool has_derivative() const { return false; }

  /// Exact data y_i^dagger when known (benchmark mode); empty otherwise.
  virtual std::span<const RealVector> exact_data() const { return {}; }

 protected:
  virtual RealVector do_apply(std::size_t i, std::span<const double> u) const = 0;
  virtual RealVector do_derivative_adjoint(std::size_t i, std::span<const double> u,
                                           std::span<const double> r) const = 0;
  virtual RealVector do_derivative(std::size_t i, std::span<const double> u,
                                   std::span<const double> h) const;

 private:
  void check_index(std::size_t i) const;
};

/// F_i(u) - y_i
RealVector residual(const ProblemSystem& sys, std::size_t i, std::span<const double> u,
                    std::span<const double> y_i);

/// ||F_i(u) - y_i|| for every i.
std::vector<double> component_residual_norms(const ProblemSystem& sys,
                                             std::span<const double> u,
                                             std::span<const RealVector> y);

/// sum_i ||F_i(u) - y_i||^2, reduced with a fixed pairwise tree over i.
double full_residual_sq(const ProblemSystem& sys, std::span<const double> u,
                        std::span<const RealVector> y);

void check_data_shape(const ProblemSystem& sys, std::span<const RealVector> y);

}  // namespace stochreg
