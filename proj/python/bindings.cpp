#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/operators.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "sfp/config.hpp"
#include "sfp/errors.hpp"
#include "sfp/evaluation.hpp"
#include "sfp/feasibility_pump.hpp"
#include "sfp/instance.hpp"
#include "sfp/lp.hpp"
#include "sfp/metrics.hpp"

namespace py = pybind11;
using namespace sfp;

namespace {

py::dict stats_dict(const EpisodeStats& s) {
  py::dict d;
  d["episodes"] = s.episodes;
  d["ep_len_mean"] = s.ep_len_mean;
  d["ep_len_std"] = s.ep_len_std;
  d["ep_len_max"] = s.ep_len_max;
  d["q90"] = s.q90;
  d["q10"] = s.q10;
  d["success_rate"] = s.success_rate;
  return d;
}

py::dict eval_dict(const EvalResult& r) {
  py::dict d = stats_dict(r.stats);
  d["solver"] = r.solver;
  d["lp_solves_per_episode"] = r.lp_solves_per_episode;
  py::list steps;
  for (const auto& e : r.episodes) steps.append(e.steps);
  d["steps"] = steps;
  return d;
}

Matrix to_matrix(const std::vector<std::vector<double>>& rows) {
  const std::size_t cols = rows.empty() ? 0 : rows.front().size();
  Matrix m(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) throw ShapeMismatch("ragged constraint matrix");
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = rows[i][j];
  }
  return m;
}

std::vector<double> observation_vector(const Observation& obs) {
  if (const auto* mlp = std::get_if<MlpObservation>(&obs)) return mlp->flat;
  const auto& cnn = std::get<CnnObservation>(obs);
  std::vector<double> out(cnn.grid.data().begin(), cnn.grid.data().end());
  out.insert(out.end(), cnn.sols.begin(), cnn.sols.end());
  out.insert(out.end(), cnn.mask.begin(), cnn.mask.end());
  return out;
}

class PyEnv {
 public:
  PyEnv(const MipInstance& inst, const std::string& variant, int max_steps)
      : env_(std::make_shared<const MipInstance>(inst), make_config(variant, max_steps)) {}

  std::vector<double> reset() { return observation_vector(env_.reset()); }

  py::tuple step(const std::vector<double>& action) {
    const StepOutcome out = env_.step(action);
    return py::make_tuple(observation_vector(out.obs), out.reward, out.done, out.info.feasible);
  }

  std::vector<double> x() const { return env_.state().x; }
  std::vector<double> x_tilde() const { return env_.state().x_tilde; }
  int episode_length() const { return env_.episode_length(); }
  int projection_count() const { return env_.projection_count(); }
  bool done() const { return env_.state().done; }

 private:
  static EnvConfig make_config(const std::string& variant, int max_steps) {
    EnvConfig c;
    c.variant = parse_obs_variant(variant);
    c.max_steps = max_steps;
    c.validate();
    return c;
  }
  FeasibilityEnv env_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Feasibility pump, LP and SFP evaluation core";

  // Translators run most recent first, so the base class goes first.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::enum_<ProblemKind>(m, "ProblemKind").value("IP", ProblemKind::kIP).value("MIP", ProblemKind::kMIP);

  py::class_<MipInstance>(m, "MipInstance")
      .def_readonly("n", &MipInstance::n)
      .def_readonly("m", &MipInstance::m)
      .def_readonly("a", &MipInstance::a)
      .def_readonly("b", &MipInstance::b)
      .def_readonly("c", &MipInstance::c)
      .def_readonly("int_mask", &MipInstance::int_mask)
      .def_readonly("lower_bound", &MipInstance::lower_bound)
      .def_readonly("upper_bound", &MipInstance::upper_bound)
      .def_readonly("seed", &MipInstance::seed)
      .def_readonly("kind", &MipInstance::kind)
      .def_readonly("witness", &MipInstance::witness)
      .def("to_text",
           [](const MipInstance& inst) {
             std::ostringstream os;
             write_instance(inst, os);
             return os.str();
           })
      .def("hash", [](const MipInstance& inst) { return instance_hash(inst); })
      .def(py::self == py::self);

  m.def(
      "generate", [](std::uint64_t seed, int n, int rows, ProblemKind kind) { return generate(seed, n, rows, kind); },
      py::arg("seed"), py::arg("n"), py::arg("m"), py::arg("kind") = ProblemKind::kIP);
  m.def("from_text", [](const std::string& text) {
    std::istringstream in(text);
    return read_instance(in, "<text>");
  });
  m.def("load_instance", &load_instance);
  m.def("save_instance", &save_instance);
  m.def("derive_seed", &derive_seed);

  m.def(
      "check",
      [](const MipInstance& inst, const std::vector<double>& x) {
        const FeasibilityReport r = check(inst, x);
        return py::make_tuple(r.feasible, r.constraint_violation, r.integrality_violation);
      },
      "Returns (feasible, constraint_violation, integrality_violation).");

  m.def(
      "project_l1",
      [](const std::vector<std::vector<double>>& a, const std::vector<double>& b, const std::vector<double>& lower,
         const std::vector<double>& upper, const std::vector<double>& anchor) {
        return project_l1(to_matrix(a), b, lower, upper, anchor);
      },
      py::arg("a"), py::arg("b"), py::arg("lower"), py::arg("upper"), py::arg("anchor"));

  m.def(
      "run_fp",
      [](const MipInstance& inst, int max_steps, std::uint64_t seed) {
        FpOptions options;
        options.max_steps = max_steps;
        options.seed = seed;
        const FpResult r = run_fp(inst, options);
        py::dict d;
        d["steps"] = r.steps_taken;
        d["feasible"] = r.terminated_by == FpTermination::kFoundFeasible;
        d["solution"] = r.solution;
        d["perturbations"] = r.perturbation_count;
        d["lp_solves"] = r.lp_solves;
        return d;
      },
      py::arg("instance"), py::arg("max_steps") = 100, py::arg("seed") = 0);

  m.def(
      "summarize_lengths", [](const std::vector<int>& lengths, int cap) { return stats_dict(summarize_lengths(lengths, cap)); },
      py::arg("lengths"), py::arg("cap") = 100);

  m.def(
      "evaluate_fp",
      [](const std::filesystem::path& instances, int cap, std::uint64_t seed) {
        EvalOptions o;
        o.cap = cap;
        o.seed = seed;
        return eval_dict(evaluate_fp(load_instances(instances), o));
      },
      py::arg("instances"), py::arg("cap") = 100, py::arg("seed") = 0);

  m.def(
      "evaluate_checkpoint",
      [](const std::filesystem::path& checkpoint, const std::filesystem::path& instances, int cap,
         std::uint64_t seed, bool deterministic) {
        const Checkpoint ckpt = load_checkpoint(checkpoint);
        EvalOptions o;
        o.cap = cap;
        o.seed = seed;
        o.deterministic = deterministic;
        return eval_dict(evaluate_policy(ckpt.policy, load_instances(instances), EnvConfig{}, o));
      },
      py::arg("checkpoint"), py::arg("instances"), py::arg("cap") = 100, py::arg("seed") = 0,
      py::arg("deterministic") = false);

  m.def("config_hash", [](const std::string& json_text) { return config_hash(parse_run_config(json_text)); });
  m.def("resolve_config", [](const std::string& json_text) { return to_json(parse_run_config(json_text)); });

  py::class_<PyEnv>(m, "FeasibilityEnv")
      .def(py::init<const MipInstance&, const std::string&, int>(), py::arg("instance"), py::arg("variant") = "mlp",
           py::arg("max_steps") = 100)
      .def("reset", &PyEnv::reset)
      .def("step", &PyEnv::step, "Returns (observation, reward, done, feasible).")
      .def_property_readonly("x", &PyEnv::x)
      .def_property_readonly("x_tilde", &PyEnv::x_tilde)
      .def_property_readonly("episode_length", &PyEnv::episode_length)
      .def_property_readonly("projection_count", &PyEnv::projection_count)
      .def_property_readonly("done", &PyEnv::done);
}
