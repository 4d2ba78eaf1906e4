#include "stochreg/problem.hpp"

#include <string>

#include "stochreg/errors.hpp"

namespace stochreg {

void ProblemSystem::check_index(std::size_t i) const {
  if (i >= equation_count()) {
    throw IndexError("equation index " + std::to_string(i) + " out of range [0, " +
                     std::to_string(equation_count()) + ")");
  }
}

RealVector ProblemSystem::apply(std::size_t i, std::span<const double> u) const {
  check_index(i);
  require_same_size(u.size(), solution_dim(), "apply: u");
  return do_apply(i, u);
}

RealVector ProblemSystem::derivative_adjoint(std::size_t i, std::span<const double> u,
                                             std::span<const double> r) const {
  check_index(i);
  require_same_size(u.size(), solution_dim(), "derivative_adjoint: u");
  require_same_size(r.size(), data_dim(i), "derivative_adjoint: r");
  return do_derivative_adjoint(i, u, r);
}

RealVector ProblemSystem::derivative(std::size_t i, std::span<const double> u,
                                     std::span<const double> h) const {
  check_index(i);
  require_same_size(u.size(), solution_dim(), "derivative: u");
  require_same_size(h.size(), solution_dim(), "derivative: h");
  return do_derivative(i, u, h);
}

RealVector ProblemSystem::do_derivative(std::size_t, std::span<const double>,
                                        std::span<const double>) const {
  throw ConfigError("this problem does not provide F_i'(u) h");
}

void check_data_shape(const ProblemSystem& sys, std::span<const RealVector> y) {
  require_same_size(y.size(), sys.equation_count(), "data: equation count");
  for (std::size_t i = 0; i < y.size(); ++i) {
    require_same_size(y[i].size(), sys.data_dim(i), "data: component length");
  }
}

RealVector residual(const ProblemSystem& sys, std::size_t i, std::span<const double> u,
                    std::span<const double> y_i) {
  RealVector r = sys.apply(i, u);
  require_same_size(y_i.size(), r.size(), "residual: y_i");
  for (std::size_t j = 0; j < r.size(); ++j) r[j] -= y_i[j];
  return r;
}

std::vector<double> component_residual_norms(const ProblemSystem& sys,
                                             std::span<const double> u,
                                             std::span<const RealVector> y) {
  check_data_shape(sys, y);
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = norm(residual(sys, i, u, y[i]));
  return out;
}

double full_residual_sq(const ProblemSystem& sys, std::span<const double> u,
                        std::span<const RealVector> y) {
  check_data_shape(sys, y);
  std::vector<double> parts(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) parts[i] = squared_norm(residual(sys, i, u, y[i]));
  return pairwise_sum(parts);
}

}  // namespace stochreg
