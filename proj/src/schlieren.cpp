#include "stochreg/schlieren.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "stochreg/errors.hpp"
#include "stochreg/io.hpp"

namespace stochreg {

double ImageGrid::x_center(std::size_t col) const {
  return -1.0 + (static_cast<double>(col) + 0.5) * pixel_width();
}

double ImageGrid::y_center(std::size_t row) const {
  return 1.0 - (static_cast<double>(row) + 0.5) * pixel_width();
}

void ImageGrid::validate() const {
  if (N < 8) throw ConfigError("image grid needs N >= 8");
}

std::size_t RadonGeometry::detector_count() const {
  return static_cast<std::size_t>(std::ceil(std::numbers::sqrt2 * static_cast<double>(grid.N)));
}

double RadonGeometry::detector_offset(std::size_t m) const {
  const double n = static_cast<double>(detector_count());
  return std::numbers::sqrt2 * (-1.0 + (2.0 * static_cast<double>(m) + 1.0) / n);
}

double RadonGeometry::angle(std::size_t i) const {
  return static_cast<double>(i) * std::numbers::pi / static_cast<double>(P);
}

std::size_t RadonGeometry::samples_per_ray() const {
  return static_cast<std::size_t>(
      std::ceil(2.0 * std::numbers::sqrt2 * static_cast<double>(grid.N)));
}

namespace {

struct Tap {
  std::size_t pixel;
  double weight;
};

/// Appends the bilinear taps of the point (x, y), scaled by `scale`.
void bilinear_taps(const ImageGrid& g, double x, double y, double scale,
                   std::vector<Tap>& out) {
  if (std::abs(x) > 1.0 || std::abs(y) > 1.0) return;
  const double h = g.pixel_width();
  const double last = static_cast<double>(g.N - 1);
  const double fc = std::clamp((x + 1.0) / h - 0.5, 0.0, last);
  const double fr = std::clamp((1.0 - y) / h - 0.5, 0.0, last);
  const auto c0 = std::min(static_cast<std::size_t>(fc), g.N - 2);
  const auto r0 = std::min(static_cast<std::size_t>(fr), g.N - 2);
  const double tx = fc - static_cast<double>(c0);
  const double ty = fr - static_cast<double>(r0);
  const double w[4] = {(1.0 - tx) * (1.0 - ty), tx * (1.0 - ty), (1.0 - tx) * ty, tx * ty};
  const std::size_t p[4] = {r0 * g.N + c0, r0 * g.N + c0 + 1, (r0 + 1) * g.N + c0,
                            (r0 + 1) * g.N + c0 + 1};
  for (int t = 0; t < 4; ++t) {
    if (w[t] != 0.0) out.push_back({p[t], scale * w[t]});
  }
}

}  // namespace

RadonTransform::RadonTransform(RadonGeometry geometry)
    : geom_(geometry), n_det_(geometry.detector_count()) {
  geom_.grid.validate();
  if (geom_.P == 0) throw ConfigError("Radon geometry needs P >= 1");
  const std::size_t Q = geom_.samples_per_ray();
  const double dr = geom_.ray_step();
  rows_.resize(geom_.P);
  std::vector<Tap> taps;
  for (std::size_t i = 0; i < geom_.P; ++i) {
    const double theta = geom_.angle(i);
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    Row& row = rows_[i];
    row.start.push_back(0);
    for (std::size_t m = 0; m < n_det_; ++m) {
      const double off = geom_.detector_offset(m);
      taps.clear();
      for (std::size_t q = 0; q < Q; ++q) {
        const double r = (static_cast<double>(q) - 0.5 * static_cast<double>(Q - 1)) * dr;
        bilinear_taps(geom_.grid, off * c - r * s, off * s + r * c, dr, taps);
      }
      std::stable_sort(taps.begin(), taps.end(),
                       [](const Tap& a, const Tap& b) { return a.pixel < b.pixel; });
      for (std::size_t t = 0; t < taps.size();) {
        double w = 0.0;
        std::size_t e = t;
        for (; e < taps.size() && taps[e].pixel == taps[t].pixel; ++e) w += taps[e].weight;
        row.pixel.push_back(taps[t].pixel);
        row.weight.push_back(w);
        t = e;
      }
      row.start.push_back(row.pixel.size());
    }
  }
}

void RadonTransform::check(std::size_t i) const {
  if (i >= geom_.P) {
    throw IndexError("direction " + std::to_string(i) + " out of range [0, " +
                     std::to_string(geom_.P) + ")");
  }
}

RealVector RadonTransform::apply(std::size_t i, std::span<const double> img) const {
  check(i);
  require_same_size(img.size(), pixels(), "radon_apply: image");
  const Row& row = rows_[i];
  RealVector out(n_det_);
  for (std::size_t m = 0; m < n_det_; ++m) {
    double acc = 0.0;
    for (std::size_t t = row.start[m]; t < row.start[m + 1]; ++t) {
      acc += row.weight[t] * img[row.pixel[t]];
    }
    out[m] = acc;
  }
  return out;
}

void RadonTransform::adjoint_accumulate(std::size_t i, std::span<const double> g,
                                        std::span<double> img) const {
  check(i);
  require_same_size(g.size(), n_det_, "radon_adjoint: detector data");
  require_same_size(img.size(), pixels(), "radon_adjoint: image");
  const Row& row = rows_[i];
  for (std::size_t m = 0; m < n_det_; ++m) {
    for (std::size_t t = row.start[m]; t < row.start[m + 1]; ++t) {
      img[row.pixel[t]] += row.weight[t] * g[m];
    }
  }
}

RealVector RadonTransform::adjoint(std::size_t i, std::span<const double> g) const {
  RealVector img(pixels(), 0.0);
  adjoint_accumulate(i, g, img);
  return img;
}

// ---------------------------------------------------------------------------

RealVector helmholtz_apply(std::span<const double> v, std::size_t N) {
  require_same_size(v.size(), N * N, "helmholtz_apply");
  const double h = 2.0 / static_cast<double>(N);
  const double inv_h2 = 1.0 / (h * h);
  RealVector out(v.size());
  for (std::size_t r = 0; r < N; ++r) {
    for (std::size_t c = 0; c < N; ++c) {
      const std::size_t p = r * N + c;
      const double center = v[p];
      const double up = r > 0 ? v[p - N] : -center;
      const double down = r + 1 < N ? v[p + N] : -center;
      const double left = c > 0 ? v[p - 1] : -center;
      const double right = c + 1 < N ? v[p + 1] : -center;
      out[p] = center + (4.0 * center - up - down - left - right) * inv_h2;
    }
  }
  return out;
}

RealVector elliptic_solve(std::span<const double> f, std::size_t N, EllipticStats* stats) {
  require_same_size(f.size(), N * N, "elliptic_solve");
  if (!all_finite(f)) throw ConfigError("elliptic_solve: right-hand side is not finite");
  RealVector u(f.size(), 0.0);
  const double f_norm = norm(f);
  if (stats) *stats = {};
  if (f_norm == 0.0) return u;

  RealVector r(f.begin(), f.end());
  RealVector p = r;
  double rr = squared_norm(r);
  const double target = 1e-10 * f_norm;
  const std::size_t max_iter = 10 * N;
  for (std::size_t it = 1; it <= max_iter; ++it) {
    const RealVector Ap = helmholtz_apply(p, N);
    const double alpha = rr / inner_product(p, Ap);
    axpy(alpha, p, u);
    axpy(-alpha, Ap, r);
    const double rr_next = squared_norm(r);
    if (std::sqrt(rr_next) <= target) {
      if (stats) *stats = {it, std::sqrt(rr_next) / f_norm};
      return u;
    }
    const double beta = rr_next / rr;
    for (std::size_t j = 0; j < p.size(); ++j) p[j] = r[j] + beta * p[j];
    rr = rr_next;
  }
  throw SolverError("elliptic_solve: CG did not reach relative residual 1e-10 in " +
                    std::to_string(max_iter) + " iterations (residual " +
                    io::format_double(std::sqrt(rr) / f_norm) + ")");
}

// ---------------------------------------------------------------------------

SchlierenSystem::SchlierenSystem(RadonGeometry geometry, std::vector<RealVector> exact_data)
    : radon_(geometry), exact_data_(std::move(exact_data)) {
  if (!exact_data_.empty()) check_data_shape(*this, exact_data_);
}

RealVector SchlierenSystem::do_apply(std::size_t i, std::span<const double> u) const {
  RealVector out = radon_.apply(i, u);
  for (double& v : out) v *= v;
  return out;
}

RealVector SchlierenSystem::do_derivative(std::size_t i, std::span<const double> u,
                                          std::span<const double> h) const {
  const RealVector ru = radon_.apply(i, u);
  RealVector out = radon_.apply(i, h);
  for (std::size_t m = 0; m < out.size(); ++m) out[m] = 2.0 * ru[m] * out[m];
  return out;
}

RealVector SchlierenSystem::do_derivative_adjoint(std::size_t i, std::span<const double> u,
                                                  std::span<const double> r) const {
  RealVector weighted = radon_.apply(i, u);
  for (std::size_t m = 0; m < weighted.size(); ++m) weighted[m] = 2.0 * weighted[m] * r[m];
  return elliptic_solve(radon_.adjoint(i, weighted), N());
}

RealVector SchlierenSystem::normal_apply(std::span<const double> u,
                                         std::span<const double> v) const {
  require_same_size(u.size(), solution_dim(), "normal_apply: u");
  require_same_size(v.size(), solution_dim(), "normal_apply: v");
  RealVector acc(solution_dim(), 0.0);
  for (std::size_t i = 0; i < equation_count(); ++i) {
    RealVector ru = radon_.apply(i, u);
    const RealVector rv = radon_.apply(i, v);
    for (std::size_t m = 0; m < ru.size(); ++m) ru[m] = 4.0 * ru[m] * ru[m] * rv[m];
    radon_.adjoint_accumulate(i, ru, acc);
  }
  return elliptic_solve(acc, N());
}

SchlierenSystem build_schlieren_system(const RadonGeometry& geometry,
                                       std::span<const double> truth) {
  SchlierenSystem bare(geometry);
  std::vector<RealVector> exact(bare.equation_count());
  for (std::size_t i = 0; i < exact.size(); ++i) exact[i] = bare.apply(i, truth);
  return SchlierenSystem(geometry, std::move(exact));
}

// ---------------------------------------------------------------------------

namespace {

struct Ellipse {
  double value, a, b, x0, y0, phi_deg;
};

// Toft's modified intensities, which keep the phantom in [0, 1].
constexpr Ellipse kSheppLogan[10] = {
    {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
    {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
    {-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0},
    {-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0},
    {0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0},
    {0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0},
    {0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0},
    {0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0},
    {0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0},
    {0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0},
};

bool inside(const Ellipse& e, double x, double y) {
  const double phi = e.phi_deg * std::numbers::pi / 180.0;
  const double dx = x - e.x0;
  const double dy = y - e.y0;
  const double xr = dx * std::cos(phi) + dy * std::sin(phi);
  const double yr = -dx * std::sin(phi) + dy * std::cos(phi);
  return xr * xr / (e.a * e.a) + yr * yr / (e.b * e.b) <= 1.0;
}

}  // namespace

RealVector shepp_logan(std::size_t N) {
  const ImageGrid g{N};
  g.validate();
  RealVector img(g.size(), 0.0);
  for (std::size_t r = 0; r < N; ++r) {
    for (std::size_t c = 0; c < N; ++c) {
      double v = 0.0;
      for (const auto& e : kSheppLogan) {
        if (inside(e, g.x_center(c), g.y_center(r))) v += e.value;
      }
      img[r * N + c] = std::clamp(v, 0.0, 1.0);
    }
  }
  return img;
}

RealVector shepp_logan_head_mask(std::size_t N) {
  const ImageGrid g{N};
  g.validate();
  RealVector mask(g.size(), 0.0);
  for (std::size_t r = 0; r < N; ++r) {
    for (std::size_t c = 0; c < N; ++c) {
      if (inside(kSheppLogan[0], g.x_center(c), g.y_center(r))) mask[r * N + c] = 1.0;
    }
  }
  return mask;
}

RealVector gaussian_blur(std::span<const double> img, std::size_t N, double sigma) {
  require_same_size(img.size(), N * N, "gaussian_blur");
  if (!(sigma > 0.0)) throw ConfigError("gaussian_blur: sigma must be positive");
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  for (std::ptrdiff_t t = -radius; t <= radius; ++t) {
    const double x = static_cast<double>(t);
    taps[static_cast<std::size_t>(t + radius)] = std::exp(-x * x / (2.0 * sigma * sigma));
  }
  const double sum = std::accumulate(taps.begin(), taps.end(), 0.0);
  for (double& t : taps) t /= sum;

  const auto n = static_cast<std::ptrdiff_t>(N);
  auto pass = [&](std::span<const double> in, bool along_rows) {
    RealVector out(in.size(), 0.0);
    for (std::ptrdiff_t r = 0; r < n; ++r) {
      for (std::ptrdiff_t c = 0; c < n; ++c) {
        double acc = 0.0;
        for (std::ptrdiff_t t = -radius; t <= radius; ++t) {
          const std::ptrdiff_t rr = along_rows ? r : r + t;
          const std::ptrdiff_t cc = along_rows ? c + t : c;
          if (rr < 0 || rr >= n || cc < 0 || cc >= n) continue;
          acc += taps[static_cast<std::size_t>(t + radius)] * in[static_cast<std::size_t>(rr * n + cc)];
        }
        out[static_cast<std::size_t>(r * n + c)] = acc;
      }
    }
    return out;
  };
  const RealVector tmp = pass(img, true);
  return pass(tmp, false);
}

RealVector initial_image(std::string_view spec, std::size_t N) {
  const ImageGrid g{N};
  g.validate();
  const auto colon = spec.find(':');
  const std::string_view kind = spec.substr(0, colon);
  const bool has_arg = colon != std::string_view::npos;
  auto arg = [&]() {
    if (!has_arg) throw ConfigError("initial guess '" + std::string(spec) + "' needs a value");
    return io::parse_double(spec.substr(colon + 1));
  };
  if (kind == "zero" && !has_arg) return RealVector(g.size(), 0.0);
  if (kind == "constant") return RealVector(g.size(), arg());
  if (kind == "bump") {
    const double amp = arg();
    RealVector img(g.size());
    for (std::size_t r = 0; r < N; ++r) {
      for (std::size_t c = 0; c < N; ++c) {
        const double x = g.x_center(c);
        const double y = g.y_center(r);
        img[r * N + c] = amp * std::max(0.0, 1.0 - x * x - y * y);
      }
    }
    return img;
  }
  if (kind == "blurred") return gaussian_blur(shepp_logan(N), N, arg());
  throw ConfigError("unknown initial guess '" + std::string(spec) +
                    "' (expected zero, constant:<v>, bump:<amp>, blurred:<sigma>)");
}

double estimate_derivative_bound(const SchlierenSystem& sys, std::span<const double> u,
                                 std::size_t iterations, double tolerance) {
  RealVector v(sys.solution_dim());
  for (std::size_t j = 0; j < v.size(); ++j) v[j] = 1.0 + 0.5 * std::sin(static_cast<double>(j));
  v = scaled(1.0 / norm(v), v);
  double lambda = 0.0;
  for (std::size_t it = 0; it < iterations; ++it) {
    const RealVector w = sys.normal_apply(u, v);
    const double next = norm(w);
    if (next == 0.0) return 0.0;
    v = scaled(1.0 / next, w);
    const bool converged = it > 0 && std::abs(next - lambda) <= tolerance * next;
    lambda = next;
    if (converged) break;
  }
  return std::sqrt(lambda);
}

}  // namespace stochreg
