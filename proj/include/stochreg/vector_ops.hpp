#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace stochreg {

using RealVector = std::vector<double>;

/// Sum with a fixed pairwise tree (blocks of 8 summed left to right at the
/// leaves), so results do not depend on who calls it or how often.
double pairwise_sum(std::span<const double> values);

/// Euclidean inner product, accumulated in eight interleaved lanes that are
/// combined in a fixed order. Throws DimensionError on length mismatch.
double inner_product(std::span<const double> a, std::span<const double> b);

/// Inner product weighted by quadrature weights w: sum_j w_j a_j b_j.
double weighted_inner_product(std::span<const double> a, std::span<const double> b,
                              std::span<const double> weights);

double norm(std::span<const double> v);
double squared_norm(std::span<const double> v);

/// ||a - b||
double distance(std::span<const double> a, std::span<const double> b);

/// y <- y + alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

RealVector subtract(std::span<const double> a, std::span<const double> b);
RealVector scaled(double alpha, std::span<const double> x);

bool all_finite(std::span<const double> v);

void require_same_size(std::size_t a, std::size_t b, const char* what);

}  // namespace stochreg
