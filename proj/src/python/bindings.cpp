#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gnsq/harness.hpp"

namespace py = pybind11;
using namespace gnsq;
using nlohmann::json;

namespace {

json parse(const std::string& s) { return json::parse(s); }

py::dict run_dict(const RunState& s) {
  py::dict d;
  d["x"] = s.x;
  d["k"] = s.k;
  d["status"] = termination_name(s.status);
  d["converged"] = s.converged();
  d["f1hat"] = s.last_f1;
  d["L_k"] = s.L_k;
  d["fd_jacobian"] = s.fd_jacobian;
  py::list trace;
  for (const auto& r : s.trace) trace.append(serialize_record(r));
  d["trace"] = trace;
  return d;
}

// Python callables evaluate the whole residual; components are served from a one-point cache.
struct PyResidual {
  py::function residual;
  py::object jacobian;  // None for finite differences
  Vec xr, F;
  Vec xj;
  Mat J;

  const Vec& values(const Vec& x) {
    if (xr.size() != x.size() || xr != x) {
      F = residual(x).cast<Vec>();
      xr = x;
    }
    return F;
  }
  const Mat& jac(const Vec& x) {
    if (xj.size() != x.size() || xj != x) {
      J = jacobian(x).cast<Mat>();
      xj = x;
    }
    return J;
  }
};

RunState solve_callable(py::function residual, py::object jacobian, std::size_t m,
                        const Vec& x0, const std::string& solver, std::uint64_t seed) {
  auto st = std::make_shared<PyResidual>();
  st->residual = std::move(residual);
  st->jacobian = std::move(jacobian);
  ComponentEval ev = [st, m](std::size_t i, const Vec& x) {
    const Vec& F = st->values(x);
    if (static_cast<std::size_t>(F.size()) != m)
      throw Error(ErrorCode::DomainError, "residual returned the wrong length");
    return F(static_cast<Eigen::Index>(i));
  };
  ComponentGrad gr;
  if (!st->jacobian.is_none())
    gr = [st, m, n = x0.size()](std::size_t i, const Vec& x, Eigen::Ref<Vec> out) {
      const Mat& J = st->jac(x);
      if (static_cast<std::size_t>(J.rows()) != m || J.cols() != n)
        throw Error(ErrorCode::DomainError, "jacobian returned the wrong shape");
      out = J.row(static_cast<Eigen::Index>(i)).transpose();
    };
  GeneratedProblem g{ResidualProblem(static_cast<std::size_t>(x0.size()), m, ev, gr, "python"),
                     x0, json::object()};
  const RunConfig cfg = parse_run_config(
      json{{"schema", 1}, {"problem", json::object()}, {"solver", parse(solver)}});
  return run_one(g, cfg, seed);
}

}  // namespace

PYBIND11_MODULE(_gnsq, mod) {
  py::register_exception<Error>(mod, "GnsqError", PyExc_ValueError);

  mod.def(
      "run",
      [](const std::string& config, std::uint64_t seed) {
        const RunConfig cfg = parse_run_config(parse(config));
        const GeneratedProblem g = generate_problem(cfg.problem);
        return run_dict(run_one(g, cfg, seed));
      },
      py::arg("config"), py::arg("seed") = 0);

  mod.def(
      "solve",
      [](py::function residual, py::object jacobian, std::size_t m, const Vec& x0,
         const std::string& solver, std::uint64_t seed) {
        return run_dict(solve_callable(std::move(residual), std::move(jacobian), m, x0, solver, seed));
      },
      py::arg("residual"), py::arg("jacobian"), py::arg("m"), py::arg("x0"), py::arg("solver"),
      py::arg("seed") = 0);

  mod.def(
      "estimate",
      [](const std::string& problem, int cloud, double radius, std::uint64_t seed,
         std::size_t batch) {
        return estimate_report(generate_problem(parse(problem)), cloud, radius, seed, batch).dump();
      },
      py::arg("problem"), py::arg("cloud") = 64, py::arg("radius") = 1.0, py::arg("seed") = 0,
      py::arg("batch") = 0);

  mod.def(
      "plan",
      [](int formula, const std::string& constants, const std::string& params) {
        return plan_budget(formula, parse(constants), parse(params)).dump();
      },
      py::arg("formula"), py::arg("constants"), py::arg("params"));

  mod.def(
      "problem_values",
      [](const std::string& problem, const Vec& x) {
        const GeneratedProblem g = generate_problem(parse(problem));
        return py::make_tuple(residual_full(g.problem, x), eval_f1hat(g.problem, x),
                              grad_f2hat(g.problem, x));
      },
      py::arg("problem"), py::arg("x"));
}
