#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stochreg/problem.hpp"

namespace stochreg {

/// N x N pixels covering [-1, 1]^2, row-major. Row 0 is the top edge (y = 1),
/// column 0 the left edge (x = -1).
struct ImageGrid {
  std::size_t N = 64;

  std::size_t size() const { return N * N; }
  double pixel_width() const { return 2.0 / static_cast<double>(N); }
  double x_center(std::size_t col) const;
  double y_center(std::size_t row) const;
  /// Throws ConfigError for N < 8.
  void validate() const;
};

/// Parallel-beam geometry: P directions theta_i = i pi / P, N_det = ceil(sqrt(2) N)
/// detector offsets at the bin centers of [-sqrt(2), sqrt(2)], ray step 1/N.
struct RadonGeometry {
  ImageGrid grid;
  std::size_t P = 60;

  std::size_t detector_count() const;
  double detector_offset(std::size_t m) const;
  double angle(std::size_t i) const;
  double ray_step() const { return 1.0 / static_cast<double>(grid.N); }
  /// Samples per ray, spanning [-sqrt(2), sqrt(2)].
  std::size_t samples_per_ray() const;
};

/// Ray-driven discrete Radon transform with bilinear interpolation. Inside
/// the square, sample points between the outermost pixel centers and the
/// boundary take the edge value; outside the square the image is zero.
/// The weights of each direction are assembled once; the adjoint applies the
/// same weights transposed.
class RadonTransform {
 public:
  explicit RadonTransform(RadonGeometry geometry);

  const RadonGeometry& geometry() const { return geom_; }
  std::size_t directions() const { return geom_.P; }
  std::size_t detectors() const { return n_det_; }
  std::size_t pixels() const { return geom_.grid.size(); }

  RealVector apply(std::size_t i, std::span<const double> img) const;
  RealVector adjoint(std::size_t i, std::span<const double> g) const;
  /// img += adjoint(i, g)
  void adjoint_accumulate(std::size_t i, std::span<const double> g, std::span<double> img) const;

 private:
  struct Row {
    std::vector<std::size_t> start;  // n_det + 1 offsets
    std::vector<std::size_t> pixel;
    std::vector<double> weight;
  };
  void check(std::size_t i) const;

  RadonGeometry geom_;
  std::size_t n_det_;
  std::vector<Row> rows_;
};

/// (I - Delta_h) v with the 5-point Laplacian, h = 2/N, and zero Dirichlet
/// values on the square's boundary (ghost cells mirror with opposite sign).
RealVector helmholtz_apply(std::span<const double> v, std::size_t N);

struct EllipticStats {
  std::size_t iterations = 0;
  double relative_residual = 0.0;
};

/// Solves (I - Delta_h) u = f by conjugate gradients to relative residual
/// 1e-10. Throws SolverError after 10 N iterations.
RealVector elliptic_solve(std::span<const double> f, std::size_t N,
                          EllipticStats* stats = nullptr);

/// F_i(u) = (R_i u)^2 entrywise, with F_i'(u) h = 2 R_i(u) R_i(h) and the
/// adjoint F_i'(u)^* g = (I - Delta_h)^{-1} 2 R_i^*(R_i(u) g).
class SchlierenSystem final : public ProblemSystem {
 public:
  explicit SchlierenSystem(RadonGeometry geometry, std::vector<RealVector> exact_data = {});

  std::size_t equation_count() const override { return radon_.directions(); }
  std::size_t solution_dim() const override { return radon_.pixels(); }
  std::size_t data_dim(std::size_t) const override { return radon_.detectors(); }
  bool has_derivative() const override { return true; }
  std::span<const RealVector> exact_data() const override { return exact_data_; }

  const RadonTransform& radon() const { return radon_; }
  std::size_t N() const { return radon_.geometry().grid.N; }

  /// sum_i F_i'(u)^* F_i'(u) v, with a single elliptic solve.
  RealVector normal_apply(std::span<const double> u, std::span<const double> v) const;

 protected:
  RealVector do_apply(std::size_t i, std::span<const double> u) const override;
  RealVector do_derivative_adjoint(std::size_t i, std::span<const double> u,
                                   std::span<const double> r) const override;
  RealVector do_derivative(std::size_t i, std::span<const double> u,
                           std::span<const double> h) const override;

 private:
  RadonTransform radon_;
  std::vector<RealVector> exact_data_;
};

/// Builds the system with exact data F_i(truth).
SchlierenSystem build_schlieren_system(const RadonGeometry& geometry,
                                       std::span<const double> truth);

/// Modified Shepp-Logan phantom (10 ellipses, values in [0, 1]) sampled at
/// pixel centers.
RealVector shepp_logan(std::size_t N);
/// Indicator of the outer head ellipse.
RealVector shepp_logan_head_mask(std::size_t N);

/// Initial guesses: "zero", "constant:<v>", "bump:<amp>" for
/// amp (1 - x^2 - y^2)_+, and "blurred:<sigma>" for the phantom convolved with
/// a Gaussian of `sigma` pixels.
RealVector initial_image(std::string_view spec, std::size_t N);

/// Gaussian blur with zero padding; sigma in pixels.
RealVector gaussian_blur(std::span<const double> img, std::size_t N, double sigma);

/// sqrt of the largest eigenvalue of sum_i F_i'(u)^* F_i'(u), by power iteration.
double estimate_derivative_bound(const SchlierenSystem& sys, std::span<const double> u,
                                 std::size_t iterations = 50, double tolerance = 1e-6);

}  // namespace stochreg
