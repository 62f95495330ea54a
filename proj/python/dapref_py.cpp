#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dapref/delayed_acceptance.hpp"
#include "dapref/diagnostics.hpp"
#include "dapref/experiment.hpp"
#include "dapref/models/mixture.hpp"
#include "dapref/models/normal_normal.hpp"
#include "dapref/prefetch.hpp"

namespace py = pybind11;
using namespace dapref;

namespace {

ExperimentConfig config_from(const py::dict& settings) {
  ExperimentConfig c;
  for (const auto& [key, value] : settings) {
    const auto k = py::str(key).cast<std::string>();
    std::string v;
    if (py::isinstance<py::bool_>(value)) {
      v = value.cast<bool>() ? "true" : "false";
    } else {
      v = py::str(value).cast<std::string>();
    }
    apply_setting(c, k, v);
  }
  validate(c);
  return c;
}

py::object json_to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json py_to_json(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::dict experiment(const py::dict& settings) {
  const ExperimentConfig c = config_from(settings);
  ExperimentResult r;
  {
    py::gil_scoped_release release;
    r = run_experiment(c);
  }
  const auto& trace = r.sampler.trace;
  const auto dim = trace.states.empty() ? 0 : trace.states.front().size();
  Eigen::MatrixXd samples(static_cast<Eigen::Index>(trace.size()), dim);
  std::vector<bool> accepted;
  std::vector<int> stage;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    samples.row(static_cast<Eigen::Index>(i)) = trace.states[i].transpose();
    accepted.push_back(trace.meta[i].accepted);
    stage.push_back(trace.meta[i].stage);
  }
  py::dict out;
  out["report"] = json_to_py(r.report_json);
  out["samples"] = samples;
  out["accepted"] = accepted;
  out["stage"] = stage;
  return out;
}

py::list tour(std::size_t capacity, const std::string& policy, double alpha) {
  BranchPolicy p = parse_branch_policy(policy, 1.0);
  p.alpha_obs = alpha;
  if (needs_ratio_estimate(p) || p.kind == BranchKind::uniform_aware) {
    throw std::invalid_argument("only static-half and observed-rate tours can be built without a target");
  }
  FactorizedTarget target;
  target.dimension = 1;
  target.factors.push_back({"flat", CostTier::cheap, [](const ParamVector&) { return 0.0; }});
  const auto schedule = make_schedule(1, 1, 1);
  const auto root = evaluate_state(target, ParamVector::Zero(1));
  const Tour t = build_tour(capacity, p, root, 0, ProposalKernel::isotropic(1, 1.0), schedule);
  py::list out;
  for (const auto& n : t.nodes) {
    out.append(py::make_tuple(py::int_(py::str(to_string(n.index))), n.depth, n.gamma));
  }
  return out;
}

models::MixtureParams mixture(const Eigen::VectorXd& w, const Eigen::VectorXd& mu, const Eigen::VectorXd& sd) {
  return {w, mu, sd};
}

} // namespace

PYBIND11_MODULE(dapref, m) {
  m.doc() = "Metropolis-Hastings with delayed acceptance and prefetching";
  m.attr("__version__") = DAPREF_VERSION;

  m.def("run_experiment", &experiment, py::arg("settings") = py::dict(),
        "Run one chain. Keys follow the CLI flag names. Returns report, samples, accepted and stage.");
  m.def(
      "compare",
      [](const py::object& da, const py::object& mh) {
        const auto s = dapref::compare(py_to_json(da), py_to_json(mh));
        return py::make_tuple(s.rg, s.row);
      },
      py::arg("report_da"), py::arg("report_mh"));
  m.def(
      "bench",
      [](const py::dict& settings, std::vector<std::uint64_t> costs, std::vector<std::size_t> workers,
         std::vector<std::uint64_t> seeds) {
        ExperimentConfig c = config_from(settings);
        std::vector<BenchRow> rows;
        {
          py::gil_scoped_release release;
          rows = bench_sweep(c, costs, workers, seeds);
        }
        py::list out;
        for (const auto& r : rows) {
          py::dict d;
          d["cost_C"] = r.cost_c;
          d["workers"] = r.workers;
          d["seed"] = r.seed;
          d["rg"] = r.rg;
          d["ess_da"] = r.ess_da;
          d["ess_mh"] = r.ess_mh;
          d["t_da"] = r.t_da;
          d["t_mh"] = r.t_mh;
          d["dpi_da"] = r.dpi_da;
          d["dpi_mh"] = r.dpi_mh;
          d["acc_da"] = r.acc_da;
          d["acc_mh"] = r.acc_mh;
          out.append(d);
        }
        return out;
      },
      py::arg("settings"), py::arg("costs"), py::arg("workers"), py::arg("seeds"));

  m.def("build_tour", &tour, py::arg("capacity"), py::arg("policy") = "static-half", py::arg("alpha") = 0.5,
        "Tour of (index, depth, gamma) triples under a constant branch probability.");
  m.def("combined_acceptance_prob", [](std::vector<double> rho) { return combined_acceptance_prob(rho); });

  m.def("autocorrelation", [](std::vector<double> x, std::size_t lag) { return autocorrelation(x, lag); });
  m.def("integrated_autocorrelation_time", [](std::vector<double> x) { return integrated_autocorrelation_time(x); });
  m.def("effective_sample_size", [](std::vector<double> x) { return effective_sample_size(x); });
  m.def("relative_gain", &relative_gain, py::arg("ess_da"), py::arg("t_da"), py::arg("ess_mh"), py::arg("t_mh"));

  m.def(
      "nn_posterior_params",
      [](double x, double sigma_mu) { return models::nn_posterior_params({x, sigma_mu}); }, py::arg("x"),
      py::arg("sigma_mu"));
  m.def(
      "mixture_logpdf",
      [](const Eigen::VectorXd& w, const Eigen::VectorXd& mu, const Eigen::VectorXd& sd, double x) {
        return models::mixture_logpdf(mixture(w, mu, sd), x);
      },
      py::arg("weights"), py::arg("means"), py::arg("sds"), py::arg("x"));
  m.def(
      "fisher_info",
      [](const Eigen::VectorXd& w, const Eigen::VectorXd& mu, const Eigen::VectorXd& sd, std::size_t nodes) {
        return models::fisher_info(mixture(w, mu, sd), {nodes, 10.0});
      },
      py::arg("weights"), py::arg("means"), py::arg("sds"), py::arg("nodes") = 512);
  m.def(
      "jeffreys_logprior",
      [](const Eigen::VectorXd& w, const Eigen::VectorXd& mu, const Eigen::VectorXd& sd) {
        return models::jeffreys_logprior(mixture(w, mu, sd));
      },
      py::arg("weights"), py::arg("means"), py::arg("sds"));
  m.def(
      "simulate_mixture", [](std::size_t n, std::uint64_t seed) { return models::simulate_mixture(n, seed).values; },
      py::arg("n"), py::arg("seed"));

  py::register_exception<EvaluationError>(m, "EvaluationError", PyExc_RuntimeError);
}
