#include "psplit/fused_lasso.hpp"
#include "psplit/tomography.hpp"
#include "psplit/validate.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace psplit;

namespace {

struct Solution {
  Vec x;
  Vec y;
  double gamma = 0.0;
  int iterations = 0;
  std::string status;
  std::vector<double> residuals;
  std::optional<double> objective;
};

Solution from_trace(const SolverTrace& t) {
  Solution s;
  s.x = t.x;
  s.y = t.y;
  s.gamma = t.gamma;
  s.iterations = t.iterations();
  s.status = std::string(to_string(t.status));
  for (const auto& r : t.records) s.residuals.push_back(r.residual);
  return s;
}

SolverConfig make_config(double gamma, int max_iters, double tol, std::uint64_t seed, bool force) {
  SolverConfig cfg;
  cfg.gamma = gamma;
  cfg.max_iters = max_iters;
  cfg.tol = tol;
  cfg.seed = seed;
  cfg.force = force;
  return cfg;
}

// min ½xᵀQx + cᵀx over {lo ≤ x ≤ hi} ∩ ker T
Solution solve_subspace_qp(const Mat& q, const Vec& c, const Vec& lo, const Vec& hi, const Mat& t,
                           const std::string& method, double gamma, int max_iters, double tol) {
  const Eigen::Index n = q.rows();
  if (q.cols() != n || c.size() != n || lo.size() != n || hi.size() != n || (t.size() > 0 && t.cols() != n))
    throw DimensionError("solve_subspace_qp: shape mismatch");
  ProblemSpec p{box_resolvent(lo, hi), zero_forward(n), affine_forward(q, c),
                t.size() > 0 ? kernel_projector(LinearMap::dense(t)) : whole_space_projector()};
  const auto cfg = make_config(gamma, max_iters, tol, 0, false);
  const Vec x0 = Vec::Zero(n);
  if (method == "frpib") return from_trace(frpib_solve(p, cfg, x0));
  if (method == "fpisdr") return from_trace(fpisdr_solve(p, cfg, x0));
  throw std::invalid_argument("solve_subspace_qp: method must be 'frpib' or 'fpisdr'");
}

}  // namespace

PYBIND11_MODULE(_psplit, m) {
  m.doc() = "Projective splitting solvers";

  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<StepSizeError>(m, "StepSizeError", PyExc_ValueError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);

  py::class_<Solution>(m, "Solution")
      .def_readonly("x", &Solution::x)
      .def_readonly("y", &Solution::y)
      .def_readonly("gamma", &Solution::gamma)
      .def_readonly("iterations", &Solution::iterations)
      .def_readonly("status", &Solution::status)
      .def_readonly("residuals", &Solution::residuals)
      .def_readonly("objective", &Solution::objective)
      .def("__repr__", [](const Solution& s) {
        return "Solution(status='" + s.status + "', iterations=" + std::to_string(s.iterations) + ")";
      });

  m.def("soft_threshold", &soft_threshold, py::arg("x"), py::arg("alpha"));
  m.def("box_project", &box_project, py::arg("x"), py::arg("lo"), py::arg("hi"));
  m.def("step_size_frpib_max", &step_size_frpib_max, py::arg("beta"), py::arg("zeta"));
  m.def("step_size_fsdr_max", &step_size_fsdr_max, py::arg("beta"), py::arg("zeta"));

  m.def("solve_subspace_qp", &solve_subspace_qp, py::arg("q"), py::arg("c"), py::arg("lo"), py::arg("hi"),
        py::arg("t") = Mat(), py::arg("method") = "frpib", py::arg("gamma") = 0.0, py::arg("max_iters") = 50000,
        py::arg("tol") = 1e-10,
        "Minimize 0.5 x'Qx + c'x over the box [lo, hi] intersected with ker T.");

  py::class_<FusedLassoInstance>(m, "FusedLassoInstance")
      .def_property_readonly("m", [](const FusedLassoInstance& i) { return i.m.materialize(); })
      .def_property_readonly("l", [](const FusedLassoInstance& i) { return i.l.materialize(); })
      .def_readonly("z", &FusedLassoInstance::z)
      .def_readonly("lo", &FusedLassoInstance::lo)
      .def_readonly("hi", &FusedLassoInstance::hi)
      .def_readonly("alpha1", &FusedLassoInstance::alpha1)
      .def_readonly("alpha2", &FusedLassoInstance::alpha2)
      .def_readonly("norm_m", &FusedLassoInstance::norm_m)
      .def_readonly("seed", &FusedLassoInstance::seed)
      .def_property_readonly("n", &FusedLassoInstance::n)
      .def_property_readonly("k", &FusedLassoInstance::k);

  m.def("gen_fused_lasso", &gen_fused_lasso, py::arg("n"), py::arg("k"), py::arg("kappa"), py::arg("seed"),
        py::arg("alpha1") = 5.0, py::arg("alpha2") = 0.5);
  m.def("objective", &objective, py::arg("inst"), py::arg("x"));
  m.def("kkt_residual", &kkt_residual, py::arg("inst"), py::arg("x"), py::arg("zero_tol") = 1e-5,
        py::arg("active_tol") = 1e-5);
  m.def("fused_algorithms", &fused_algorithms);
  m.def(
      "solve_fused",
      [](const FusedLassoInstance& inst, const std::string& algorithm, double gamma, int max_iters, double tol,
         bool force) {
        FusedSolve r;
        {
          py::gil_scoped_release release;
          r = solve_fused(inst, algorithm, make_config(gamma, max_iters, tol, inst.seed, force));
        }
        Solution s = from_trace(r.trace);
        s.x = r.x;
        s.objective = r.report.objective;
        return s;
      },
      py::arg("inst"), py::arg("algorithm") = "mtpd", py::arg("gamma") = 0.0, py::arg("max_iters") = 200000,
      py::arg("tol") = 1e-8, py::arg("force") = false);

  m.def("shepp_logan", &shepp_logan, py::arg("n"));
  m.def("psnr", &psnr, py::arg("x"), py::arg("ref"));

  m.def("validate_suites", &validate_suites);
  m.def(
      "validate",
      [](const std::string& suite, int iters, std::uint64_t seed) {
        ValidateOptions opts{suite, iters, seed};
        py::list out;
        for (const auto& c : run_validation(opts)) {
          py::dict d;
          d["suite"] = c.suite;
          d["check"] = c.check;
          d["value"] = c.value;
          d["tolerance"] = c.tolerance;
          d["passed"] = c.passed;
          out.append(d);
        }
        return out;
      },
      py::arg("suite") = "", py::arg("iters") = 0, py::arg("seed") = 0);
}
