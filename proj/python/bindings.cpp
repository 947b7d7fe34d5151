#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qsense/estimators.hpp"
#include "qsense/experiments.hpp"
#include "qsense/montecarlo.hpp"
#include "qsense/sensitivity.hpp"
#include "qsense/sensor_physics.hpp"
#include "qsense/signal_model.hpp"

namespace py = pybind11;
using namespace qsense;

namespace {

py::dict report_dict(const PipelineReport& r) {
  py::dict tables;
  for (const auto& t : r.tables) tables[py::str(t.name)] = t.csv;
  py::list checks;
  for (const auto& c : r.checks) {
    py::dict d;
    d["name"] = c.name;
    d["pass"] = c.pass;
    d["measured"] = c.measured;
    d["expected"] = c.expected;
    d["tolerance"] = c.tolerance;
    checks.append(d);
  }
  py::dict out;
  out["pipeline_id"] = r.pipeline_id;
  out["seed"] = r.seed;
  out["tables"] = tables;
  out["checks"] = checks;
  out["manifest"] = manifest_json(r);
  out["all_pass"] = r.all_pass();
  return out;
}

}  // namespace

PYBIND11_MODULE(_qsense, m) {
  m.doc() = "Ramsey sensor model, sensitivities and shot simulation";

  py::enum_<ToneConvention>(m, "ToneConvention")
      .value("HALF_SPLIT", ToneConvention::kHalfSplit)
      .value("PAPER_EXPONENT", ToneConvention::kPaperExponent);

  py::class_<SensorModel>(m, "SensorModel")
      .def(py::init<double, double, double>(), py::arg("fidelity") = 1.0, py::arg("t2") = 1.0,
           py::arg("theta") = 0.0)
      .def_readwrite("fidelity", &SensorModel::fidelity)
      .def_readwrite("t2", &SensorModel::t2)
      .def_readwrite("theta", &SensorModel::theta);

  py::class_<EnsembleConfig>(m, "EnsembleConfig")
      .def(py::init<std::int64_t, std::int64_t>(), py::arg("shots") = 1, py::arg("sensors") = 1)
      .def_readwrite("shots", &EnsembleConfig::shots)
      .def_readwrite("sensors", &EnsembleConfig::sensors)
      .def("total", &EnsembleConfig::total);

  py::class_<TwoTone>(m, "TwoTone")
      .def(py::init<double, double, double, ToneConvention>(), py::arg("omega_s"), py::arg("g"), py::arg("sigma"),
           py::arg("convention") = ToneConvention::kPaperExponent)
      .def_readwrite("omega_s", &TwoTone::omega_s)
      .def_readwrite("g", &TwoTone::g)
      .def_readwrite("sigma", &TwoTone::sigma)
      .def_readwrite("convention", &TwoTone::convention)
      .def("period", &TwoTone::period);

  py::class_<Constant>(m, "Constant").def(py::init<double>(), py::arg("g")).def_readwrite("g", &Constant::g);
  py::class_<StochasticAmplitude>(m, "StochasticAmplitude")
      .def(py::init<double>(), py::arg("g"))
      .def_readwrite("g", &StochasticAmplitude::g);
  py::class_<TwoToneStochastic>(m, "TwoToneStochastic")
      .def(py::init<TwoTone>(), py::arg("tones"))
      .def_readwrite("tones", &TwoToneStochastic::tones);
  py::class_<IntermittentTwoTone>(m, "IntermittentTwoTone")
      .def(py::init<TwoTone, double>(), py::arg("tones"), py::arg("t_sig"))
      .def_readwrite("tones", &IntermittentTwoTone::tones)
      .def_readwrite("t_sig", &IntermittentTwoTone::t_sig);

  py::class_<SensitivityResult>(m, "SensitivityResult")
      .def_readonly("g_min", &SensitivityResult::g_min)
      .def_readonly("t_i", &SensitivityResult::t_i)
      .def_readonly("contrast", &SensitivityResult::contrast)
      .def_readonly("valid", &SensitivityResult::valid)
      .def_property_readonly("method", [](const SensitivityResult& r) { return std::string(to_string(r.method)); });

  py::class_<PopulationEstimate>(m, "PopulationEstimate")
      .def_readonly("p_hat", &PopulationEstimate::p_hat)
      .def_readonly("std_err", &PopulationEstimate::std_err)
      .def_readonly("qpn_std_err", &PopulationEstimate::qpn_std_err)
      .def_readonly("n_shots", &PopulationEstimate::n_shots)
      .def_readonly("n_sensors", &PopulationEstimate::n_sensors);

  m.def("contrast", &contrast, py::arg("sensor"), py::arg("t"));
  m.def("excitation_probability", &excitation_probability, py::arg("sensor"), py::arg("t_i"), py::arg("phi"));
  m.def("qpn_variance", &qpn_variance, py::arg("p"), py::arg("ensemble"));
  m.def("mean_population", &mean_population, py::arg("spec"), py::arg("sensor"), py::arg("t_i"));
  m.def("phase_variance_exact", &phase_variance_exact, py::arg("tones"), py::arg("t_i"));

  m.def("gmin_constant", &gmin_constant, py::arg("sensor"), py::arg("ensemble"), py::arg("t_i"));
  m.def("gmin_variance", &gmin_variance, py::arg("sensor"), py::arg("ensemble"), py::arg("t_i"));
  m.def("gmin_intermittent",
        py::overload_cast<double, const EnsembleConfig&, const TwoTone&>(&gmin_intermittent),
        py::arg("contrast_t1"), py::arg("ensemble"), py::arg("tones"));
  m.def("gmin_root_found", &gmin_root_found, py::arg("family"), py::arg("sensor"), py::arg("ensemble"),
        py::arg("t_i"));
  m.def("exact_snr", &exact_snr, py::arg("spec"), py::arg("sensor"), py::arg("ensemble"), py::arg("t_i"));
  m.def(
      "compensation_sensors",
      [](const std::string& scenario, double fidelity, std::int64_t shots, double t1_over_t2) {
        const Scenario s = scenario == "constant"  ? Scenario::kConstant
                           : scenario == "variance" ? Scenario::kVariance
                           : scenario == "intermittent"
                               ? Scenario::kIntermittent
                               : throw std::invalid_argument("scenario must be constant, variance or intermittent");
        return compensation_sensors(s, fidelity, {shots, t1_over_t2});
      },
      py::arg("scenario"), py::arg("fidelity"), py::arg("shots") = 1000, py::arg("t1_over_t2") = 0.1);
  m.def("excess_sensors", &excess_sensors, py::arg("fidelity"), py::arg("t1_over_t2"), py::arg("shots"));

  m.def(
      "simulate_population",
      [](const SignalSpec& spec, const SensorModel& sensor, const EnsembleConfig& ensemble, double t_i,
         std::uint64_t seed) {
        return estimate_population(simulate_shots(spec, sensor, ensemble, t_i, {seed, pipeline_tag("python"), 0}));
      },
      py::arg("spec"), py::arg("sensor"), py::arg("ensemble"), py::arg("t_i"), py::arg("seed") = 0);

  m.def(
      "estimate_frequency_separation",
      [](double p_hat, const SensorModel& sensor, const IntermittentTwoTone& spec, bool exact) -> py::object {
        const auto e = invert_frequency_separation(p_hat, sensor, spec,
                                                   exact ? Inversion::kExact : Inversion::kGaussianLimit);
        if (!e.defined()) return py::none();
        return py::float_(e.g_hat);
      },
      py::arg("p_hat"), py::arg("sensor"), py::arg("spec"), py::arg("exact") = true,
      "Separation estimate in rad/s, or None when the estimate is excluded.");

  m.def(
      "run_fig2", [](std::vector<double> fidelities) {
        Fig2Options o;
        if (!fidelities.empty()) o.fidelities = std::move(fidelities);
        return report_dict(run_fig2(o));
      },
      py::arg("fidelities") = std::vector<double>{});
  m.def(
      "run_experiment_replica",
      [](std::uint64_t seed, double excess_factor) {
        ReplicaOptions o;
        o.excess_factor = excess_factor;
        return report_dict(run_experiment_replica(o, seed));
      },
      py::arg("seed") = 42, py::arg("excess_factor") = 1.17);
}
