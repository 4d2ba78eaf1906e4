#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stochreg/errors.hpp"
#include "stochreg/harness.hpp"
#include "stochreg/linear_benchmark.hpp"
#include "stochreg/metrics.hpp"
#include "stochreg/noise.hpp"
#include "stochreg/rng.hpp"
#include "stochreg/schlieren.hpp"
#include "stochreg/solvers.hpp"
#include "stochreg/stopping.hpp"

namespace py = pybind11;
using namespace stochreg;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

RealVector to_vector(const Array& a) {
  return RealVector(a.data(), a.data() + a.size());
}

py::array_t<double> to_array(const RealVector& v) {
  const std::vector<py::ssize_t> shape{static_cast<py::ssize_t>(v.size())};
  return py::array_t<double>(shape, v.data());
}

py::array_t<double> to_image(const RealVector& v, std::size_t N) {
  if (v.size() != N * N) throw DimensionError("image size mismatch");
  const auto n = static_cast<py::ssize_t>(N);
  return py::array_t<double>({n, n}, v.data());
}

std::size_t square_side(const Array& a) {
  if (a.ndim() == 2) {
    if (a.shape(0) != a.shape(1)) throw DimensionError("image must be square");
    return static_cast<std::size_t>(a.shape(0));
  }
  const auto n = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(a.size()))));
  if (n * n != static_cast<std::size_t>(a.size())) throw DimensionError("image must be square");
  return n;
}

std::vector<RealVector> to_data(const std::vector<Array>& rows) {
  std::vector<RealVector> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(to_vector(r));
  return out;
}

py::list from_data(std::span<const RealVector> rows) {
  py::list out;
  for (const auto& r : rows) out.append(to_array(r));
  return out;
}

py::object optional_float(const std::optional<double>& v) {
  if (!v) return py::none();
  return py::float_(*v);
}

LambdaScheduleKind schedule_kind(const std::string& name, double* constant) {
  if (name == "inverse-square") return LambdaScheduleKind::InverseSquare;
  if (name == "inverse-cube") return LambdaScheduleKind::InverseCube;
  if (name == "zero") return LambdaScheduleKind::Zero;
  if (name.rfind("constant:", 0) == 0) {
    *constant = std::stod(name.substr(9));
    return LambdaScheduleKind::Constant;
  }
  throw ConfigError("unknown lambda schedule '" + name + "'");
}

std::string validate_constants_json(const py::dict& d) {
  ConstantsInputs in;
  for (const auto& [key_obj, value] : d) {
    const auto key = key_obj.cast<std::string>();
    if (key == "L") in.L = value.cast<double>();
    else if (key == "eta") in.eta = value.cast<double>();
    else if (key == "rho") in.rho = value.cast<double>();
    else if (key == "kappa") in.kappa = value.cast<double>();
    else if (key == "varrho") in.varrho = value.cast<double>();
    else if (key == "lambda_max") in.lambda_max = value.cast<double>();
    else if (key == "omega") in.omega = value.cast<double>();
    else if (key == "Omega") in.Omega = value.cast<double>();
    else if (key == "tau") in.tau = value.cast<double>();
    else if (key == "a") in.a = value.cast<double>();
    else if (key == "M") in.M = value.cast<double>();
    else if (key == "k_max") in.k_max = value.cast<std::size_t>();
    else if (key == "lambda_schedule")
      in.lambda_kind = schedule_kind(value.cast<std::string>(), &in.lambda_constant);
    else throw ConfigError("unknown constant '" + key + "'");
  }
  return to_json(validate_constants(in));
}

py::dict execute_run(const std::string& config_json, const std::string& method,
                     double delta_rel, std::uint64_t seed) {
  harness::SingleRun r;
  {
    py::gil_scoped_release release;
    const auto config = harness::parse_config(config_json);
    const auto problem = harness::build_problem(config);
    r = harness::execute(problem, config, parse_method(method), delta_rel, seed);
  }
  RealVector ks, psis, errs, sums;
  for (const auto& rec : r.trace.records) {
    ks.push_back(static_cast<double>(rec.k));
    psis.push_back(rec.psi.value_or(std::nan("")));
    errs.push_back(rec.rel_err.value_or(std::nan("")));
    sums.push_back(rec.res_sq_sum.value_or(std::nan("")));
  }
  py::dict out;
  out["k_star"] = r.quality.k_star;
  out["stop_index"] = r.trace.stop_index;
  out["stop_reason"] = to_string(r.trace.stop_reason);
  out["E_at_k_star"] = optional_float(r.quality.E_at_k_star);
  out["psi_at_k_star"] = optional_float(r.quality.psi_at_k_star);
  out["psnr_db"] = optional_float(r.quality.psnr_db);
  out["ssim"] = optional_float(r.quality.ssim);
  out["noise_condition_estimate"] = optional_float(r.noise_condition);
  out["diverged"] = r.diverged;
  out["k"] = to_array(ks);
  out["psi"] = to_array(psis);
  out["rel_err"] = to_array(errs);
  out["res_sq_sum"] = to_array(sums);
  out["u_final"] = to_array(r.trace.u_final);
  out["warnings"] = r.trace.warnings;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "stochreg core bindings";

  auto base_error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<EmptyTraceError>(m, "EmptyTraceError", PyExc_ValueError);
  py::register_exception<SolverError>(m, "SolverError", base_error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const stochreg::IndexError& e) {
      PyErr_SetString(PyExc_IndexError, e.what());
    }
  });

  py::class_<RngStream>(m, "RngStream")
      .def(py::init<std::uint64_t>(), py::arg("seed"))
      .def_static("at", &RngStream::at, py::arg("seed"), py::arg("draw_count"))
      .def("next_u64", &RngStream::next_u64)
      .def("uniform01", &RngStream::uniform01)
      .def("draw_index", &RngStream::draw_index, py::arg("count"))
      .def("normal", &RngStream::normal)
      .def_property_readonly("seed", &RngStream::seed)
      .def_property_readonly("draw_count", &RngStream::draw_count);

  py::class_<ProblemSystem, std::shared_ptr<ProblemSystem>>(m, "ProblemSystem")
      .def_property_readonly("equation_count", &ProblemSystem::equation_count)
      .def_property_readonly("solution_dim", &ProblemSystem::solution_dim)
      .def("data_dim", &ProblemSystem::data_dim, py::arg("i"))
      .def("apply", [](const ProblemSystem& s, std::size_t i, const Array& u) {
        return to_array(s.apply(i, to_vector(u)));
      }, py::arg("i"), py::arg("u"))
      .def("derivative", [](const ProblemSystem& s, std::size_t i, const Array& u, const Array& h) {
        return to_array(s.derivative(i, to_vector(u), to_vector(h)));
      }, py::arg("i"), py::arg("u"), py::arg("h"))
      .def("derivative_adjoint",
           [](const ProblemSystem& s, std::size_t i, const Array& u, const Array& r) {
             return to_array(s.derivative_adjoint(i, to_vector(u), to_vector(r)));
           }, py::arg("i"), py::arg("u"), py::arg("r"))
      .def_property_readonly("exact_data",
                             [](const ProblemSystem& s) { return from_data(s.exact_data()); });

  py::class_<LinearSystem, ProblemSystem, std::shared_ptr<LinearSystem>>(m, "LinearSystem")
      .def(py::init([](const Array& matrix, const std::vector<Array>& exact) {
             if (matrix.ndim() != 2) throw DimensionError("matrix must be two-dimensional");
             return std::make_shared<LinearSystem>(static_cast<std::size_t>(matrix.shape(0)),
                                                   static_cast<std::size_t>(matrix.shape(1)),
                                                   to_vector(matrix), to_data(exact));
           }), py::arg("matrix"), py::arg("exact_data") = std::vector<Array>{})
      .def("row", [](const LinearSystem& s, std::size_t i) {
        const auto r = s.row(i);
        return to_array(RealVector(r.begin(), r.end()));
      }, py::arg("i"))
      .def("multiply", [](const LinearSystem& s, const Array& u) {
        return to_array(s.multiply(to_vector(u)));
      }, py::arg("u"))
      .def_property_readonly("max_row_norm", &LinearSystem::max_row_norm);

  py::class_<SchlierenSystem, ProblemSystem, std::shared_ptr<SchlierenSystem>>(m, "SchlierenSystem")
      .def_property_readonly("N", &SchlierenSystem::N)
      .def("radon", [](const SchlierenSystem& s, std::size_t i, const Array& img) {
        return to_array(s.radon().apply(i, to_vector(img)));
      }, py::arg("i"), py::arg("image"))
      .def("radon_adjoint", [](const SchlierenSystem& s, std::size_t i, const Array& g) {
        return to_image(s.radon().adjoint(i, to_vector(g)), s.N());
      }, py::arg("i"), py::arg("g"))
      .def("normal_apply", [](const SchlierenSystem& s, const Array& u, const Array& v) {
        return to_image(s.normal_apply(to_vector(u), to_vector(v)), s.N());
      }, py::arg("u"), py::arg("v"))
      .def("derivative_bound", [](const SchlierenSystem& s, const Array& u) {
        return estimate_derivative_bound(s, to_vector(u));
      }, py::arg("u"));

  m.def("build_linear_system", [](std::size_t P, double a, double b) {
    return std::make_shared<LinearSystem>(build_linear_system(LinearBenchmarkSpec{P, a, b}));
  }, py::arg("P") = 1000, py::arg("a") = -6.0, py::arg("b") = 6.0);
  m.def("sample_target", [](std::size_t P, double a, double b) {
    return to_array(sample_target(LinearBenchmarkSpec{P, a, b}));
  }, py::arg("P") = 1000, py::arg("a") = -6.0, py::arg("b") = 6.0);
  m.def("build_schlieren_system", [](const Array& truth, std::size_t P) {
    RadonGeometry g;
    g.grid.N = square_side(truth);
    g.P = P;
    return std::make_shared<SchlierenSystem>(build_schlieren_system(g, to_vector(truth)));
  }, py::arg("truth"), py::arg("P") = 60);
  m.def("shepp_logan", [](std::size_t N) { return to_image(shepp_logan(N), N); }, py::arg("N"));
  m.def("initial_image", [](const std::string& spec, std::size_t N) {
    return to_image(initial_image(spec, N), N);
  }, py::arg("spec"), py::arg("N"));
  m.def("elliptic_solve", [](const Array& f) {
    const std::size_t N = square_side(f);
    return to_image(elliptic_solve(to_vector(f), N), N);
  }, py::arg("f"));
  m.def("helmholtz_apply", [](const Array& v) {
    const std::size_t N = square_side(v);
    return to_image(helmholtz_apply(to_vector(v), N), N);
  }, py::arg("v"));

  m.def("add_relative_noise", [](const std::vector<Array>& y, double delta_rel, std::uint64_t seed) {
    RngStream rng(seed);
    const auto obs = add_relative_noise(to_data(y), delta_rel, rng);
    py::dict out;
    out["y_delta"] = from_data(obs.y_delta);
    out["delta_i"] = to_array(obs.delta_i);
    out["delta"] = obs.delta;
    return out;
  }, py::arg("y_exact"), py::arg("delta_rel"), py::arg("seed"));

  m.def("landweber_step", [](const ProblemSystem& s, const Array& u, const std::vector<Array>& y,
                             double omega) {
    return to_array(landweber_step(s, to_vector(u), to_data(y), omega));
  }, py::arg("system"), py::arg("u"), py::arg("y"), py::arg("omega") = 1.0);
  m.def("sgd_step", [](const ProblemSystem& s, const Array& u, std::size_t i, double omega,
                       const Array& y_i) {
    return to_array(sgd_step(s, to_vector(u), i, omega, to_vector(y_i)));
  }, py::arg("system"), py::arg("u"), py::arg("i"), py::arg("omega"), py::arg("y_i"));
  m.def("irsgd_step", [](const ProblemSystem& s, const Array& u, const Array& u0, std::size_t i,
                         double omega, double lambda, const Array& y_i) {
    return to_array(irsgd_step(s, to_vector(u), to_vector(u0), i, omega, lambda, to_vector(y_i)));
  }, py::arg("system"), py::arg("u"), py::arg("u0"), py::arg("i"), py::arg("omega"),
        py::arg("lam"), py::arg("y_i"));

  m.def("psi", [](double k, double a, double s) { return psi(k, a, s); }, py::arg("k"),
        py::arg("a"), py::arg("residual_sq_sum"));
  m.def("argmin_psi", [](const std::vector<std::pair<std::size_t, double>>& points) {
    std::vector<PsiPoint> pts;
    for (const auto& [k, v] : points) pts.push_back({k, v});
    return argmin_psi(pts);
  }, py::arg("points"));
  m.def("c_rho", &c_rho, py::arg("rho"), py::arg("lambda_max"), py::arg("varrho"),
        py::arg("kappa"), py::arg("Omega"), py::arg("L"));
  m.def("big_M", &big_M, py::arg("varrho"), py::arg("c_rho"), py::arg("tau"), py::arg("Omega"),
        py::arg("eta"));
  m.def("validate_constants_json", &validate_constants_json, py::arg("inputs"));

  m.def("relative_error", [](const Array& u, const Array& truth) {
    return relative_error(to_vector(u), to_vector(truth));
  }, py::arg("u"), py::arg("truth"));
  m.def("psnr", [](const Array& a, const Array& b, double range) {
    return psnr(to_vector(a), to_vector(b), range);
  }, py::arg("a"), py::arg("b"), py::arg("data_range"));
  m.def("ssim", [](const Array& a, const Array& b, double range) {
    if (a.ndim() != 2) throw DimensionError("ssim expects two-dimensional images");
    return ssim(to_vector(a), to_vector(b), static_cast<std::size_t>(a.shape(1)), range);
  }, py::arg("a"), py::arg("b"), py::arg("data_range"));

  m.def("execute", &execute_run, py::arg("config_json"), py::arg("method") = "irsgd",
        py::arg("delta_rel") = 1e-2, py::arg("seed") = 1,
        "Runs one configuration from a JSON config and returns the quality report and trace.");
}
