#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qsense/csv.hpp"
#include "qsense/estimators.hpp"
#include "qsense/experiments.hpp"
#include "qsense/montecarlo.hpp"
#include "qsense/sensitivity.hpp"

namespace {

using qsense::kTwoPi;
using Json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitChecksFailed = 1;
constexpr int kExitConfig = 2;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Units { kHz, kRadPerS };

// A frequency given either in --units or explicitly in Hz.
struct Frequency {
  std::optional<double> value;
  std::optional<double> hz;
};

void add_frequency(CLI::App* app, const std::string& name, Frequency& f, const std::string& what) {
  app->add_option("--" + name, f.value, what + " in the unit chosen by --units");
  app->add_option("--" + name + "-hz", f.hz, what + " in Hz");
}

double resolve(const Frequency& f, const std::string& name, Units units, std::optional<double> fallback_rad) {
  if (f.value && f.hz) throw ConfigError("give only one of --" + name + " and --" + name + "-hz");
  if (f.hz) return *f.hz * kTwoPi;
  if (f.value) return units == Units::kHz ? *f.value * kTwoPi : *f.value;
  if (fallback_rad) return *fallback_rad;
  throw ConfigError("missing required parameter --" + name + "-hz (or --" + name + ")");
}

template <class T>
T require(const std::optional<T>& v, const std::string& name) {
  if (!v) throw ConfigError("missing required parameter --" + name);
  return *v;
}

qsense::ToneConvention convention_of(const std::string& s) {
  try {
    return qsense::parse_tone_convention(s);
  } catch (const std::invalid_argument&) {
    throw ConfigError("--convention must be half_split or paper_exponent");
  }
}

// ---------------------------------------------------------------------------
// Config file: flat `key = value` lines, `#` comments.

std::vector<std::pair<std::string, std::string>> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    if (key.empty()) throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key");
    out.emplace_back(key, trim(line.substr(eq + 1)));
  }
  return out;
}

std::optional<std::string> config_path(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return std::nullopt;
}

// Appends config entries that the command line does not already set.
std::vector<std::string> merge_config(std::vector<std::string> args) {
  const auto path = config_path(args);
  if (!path) return args;
  const auto original = args;
  for (const auto& [key, value] : read_config(*path)) {
    const std::string flag = "--" + key;
    const bool on_cli = std::any_of(original.begin(), original.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
    if (!on_cli) args.push_back(flag + "=" + value);
  }
  return args;
}

// ---------------------------------------------------------------------------
// Resolved configuration echo.

std::string option_value(const CLI::Option* opt) {
  if (opt->count() == 0) return opt->get_default_str();
  std::string out;
  for (const auto& r : opt->results()) {
    if (!out.empty()) out += ',';
    out += r;
  }
  return out;
}

// Options that do not change results are left out so reports stay
// byte-identical across worker counts and output locations.
bool echoed(const std::string& name) {
  return name != "--help" && name != "--config" && name != "--threads" && name != "--out";
}

Json resolved_config(const CLI::App& app) {
  Json j = Json::object();
  std::string command;
  const CLI::App* level = &app;
  while (level) {
    for (const CLI::Option* opt : level->get_options()) {
      const std::string name = opt->get_name();
      if (!echoed(name) || name.rfind("--", 0) != 0) continue;
      j[name.substr(2)] = option_value(opt);
    }
    const auto subs = level->get_subcommands();
    level = subs.empty() ? nullptr : subs.front();
    if (level) command += (command.empty() ? "" : " ") + level->get_name();
  }
  return Json{{"command", command}, {"options", j}};
}

// ---------------------------------------------------------------------------

struct Globals {
  std::uint64_t seed = 42;
  std::string out;
  int threads = 1;
  std::string config;
  std::string units = "hz";

  Units unit() const { return units == "rad_per_s" ? Units::kRadPerS : Units::kHz; }
};

int finish(const qsense::PipelineReport& report, const Globals& g) {
  const std::string dir = g.out.empty() ? "qsense-" + report.pipeline_id : g.out;
  qsense::write_report(report, dir);
  std::cout << "report: " << dir << "\n";
  for (const auto& c : report.checks) {
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << "  measured=" << qsense::format_double(c.measured)
              << " expected=" << qsense::format_double(c.expected)
              << " tolerance=" << qsense::format_double(c.tolerance) << "\n";
  }
  return report.all_pass() ? kExitOk : kExitChecksFailed;
}

void print_kv(const std::string& key, double v) { std::cout << key << " = " << qsense::format_double(v) << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    args = merge_config(std::move(args));
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  CLI::App app{"Quantum sensing of intermittent stochastic signals: sensitivities, simulation and scans"};
  app.option_defaults()->always_capture_default();
  app.fallthrough();
  app.require_subcommand(1);

  Globals g;
  app.add_option("--seed", g.seed, "Master seed");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--config", g.config, "Flat key = value config file; command-line flags take precedence");
  app.add_option("--units", g.units, "Unit of frequency inputs without an explicit suffix")
      ->check(CLI::IsMember({"hz", "rad_per_s"}));

  // analytic ---------------------------------------------------------------
  auto* analytic = app.add_subcommand("analytic", "Closed-form sensitivity g_min");
  std::string a_scenario;
  std::optional<double> a_fidelity, a_t2, a_ti, a_contrast;
  std::optional<std::int64_t> a_n;
  std::int64_t a_m = 1;
  std::string a_convention = "paper_exponent";
  std::string a_csv;
  Frequency a_omega, a_sigma;
  analytic->add_option("--scenario", a_scenario, "constant | variance | intermittent")
      ->required()
      ->check(CLI::IsMember({"constant", "variance", "intermittent"}));
  analytic->add_option("--fidelity", a_fidelity, "Fidelity F");
  analytic->add_option("--t2", a_t2, "Coherence time T2 (s)");
  analytic->add_option("--ti", a_ti, "Integration time (s)");
  analytic->add_option("--contrast", a_contrast, "Contrast at t1 (intermittent; replaces --fidelity/--t2)");
  analytic->add_option("--n", a_n, "Shots N");
  analytic->add_option("--m", a_m, "Sensors M");
  analytic->add_option("--convention", a_convention, "half_split | paper_exponent");
  analytic->add_option("--csv", a_csv, "Also write the result as a one-row CSV");
  add_frequency(analytic, "omega-s", a_omega, "Centre frequency");
  add_frequency(analytic, "sigma", a_sigma, "Tone amplitude standard deviation");

  // simulate ---------------------------------------------------------------
  auto* simulate = app.add_subcommand("simulate", "Simulate one shot table");
  std::string s_signal = "constant";
  double s_fidelity = 1.0, s_t2 = 1.0, s_theta = 0.0;
  std::optional<double> s_ti, s_tsig;
  std::int64_t s_n = 1000, s_m = 1;
  double s_flip = 0.0;
  std::string s_convention = "paper_exponent";
  Frequency s_g, s_omega, s_sigma;
  simulate->add_option("--signal", s_signal, "constant | stochastic | two_tone | intermittent")
      ->check(CLI::IsMember({"constant", "stochastic", "two_tone", "intermittent"}));
  simulate->add_option("--fidelity", s_fidelity, "Fidelity F");
  simulate->add_option("--t2", s_t2, "Coherence time T2 (s)");
  simulate->add_option("--theta", s_theta, "Bias phase (rad)");
  simulate->add_option("--ti", s_ti, "Integration time (s)");
  simulate->add_option("--t-sig", s_tsig, "Burst duration (s); defaults to t_i");
  simulate->add_option("--n", s_n, "Shots N");
  simulate->add_option("--m", s_m, "Sensors M");
  simulate->add_option("--flip", s_flip, "Readout bit-flip probability (M = 1)");
  simulate->add_option("--convention", s_convention, "half_split | paper_exponent");
  add_frequency(simulate, "g", s_g, "Signal parameter g (shift, standard deviation or tone separation)");
  add_frequency(simulate, "omega-s", s_omega, "Centre frequency");
  add_frequency(simulate, "sigma", s_sigma, "Tone amplitude standard deviation");

  // scan -------------------------------------------------------------------
  auto* scan = app.add_subcommand("scan", "Figure data scans");
  scan->require_subcommand(1);
  auto* fig2 = scan->add_subcommand("fig2", "Amplitude vs variance estimation over fidelity");
  qsense::Fig2Options f2;
  fig2->add_option("--n", f2.shots, "Shots N");
  fig2->add_option("--m", f2.sensors, "Sensors M");
  fig2->add_option("--t2", f2.t2, "Coherence time T2 (s)");
  fig2->add_option("--fidelities", f2.fidelities, "Fidelity grid")->delimiter(',');

  auto* fig3 = scan->add_subcommand("fig3", "Two-tone and intermittent signals");
  qsense::Fig3Options f3;
  double f3_t2_ms = f3.t2 * 1e3;
  double f3_step_ms = f3.t_step * 1e3;
  bool f3_no_mc = false;
  std::string f3_convention = "paper_exponent";
  Frequency f3_omega, f3_sigma, f3_g;
  add_frequency(fig3, "omega-s", f3_omega, "Centre frequency");
  add_frequency(fig3, "sigma", f3_sigma, "Tone amplitude standard deviation");
  add_frequency(fig3, "g", f3_g, "Tone separation for panel (a)");
  fig3->add_option("--n", f3.shots, "Shots N");
  fig3->add_option("--m", f3.sensors, "Sensors M");
  fig3->add_option("--t2-ms", f3_t2_ms, "Coherence time T2 (ms)");
  fig3->add_option("--t-step-ms", f3_step_ms, "Panel (a) time step (ms)");
  fig3->add_flag("--no-monte-carlo", f3_no_mc, "Skip the simulated panel (a) curve");
  fig3->add_option("--mc-shots", f3.mc_shots, "Simulated shots per point");
  fig3->add_option("--mc-sensors", f3.mc_sensors, "Sensors per simulated shot");
  fig3->add_option("--fidelities", f3.fidelities, "Fidelity grid for panels (b), (c)")->delimiter(',');
  fig3->add_option("--mex-t1-over-t2", f3.mex_t1_over_t2, "Panel (d) t1/T2 grid")->delimiter(',');
  fig3->add_option("--mex-fidelities", f3.mex_fidelities, "Panel (d) fidelities")->delimiter(',');
  fig3->add_option("--mex-n", f3.mex_shots, "Shots N for panel (d)");
  fig3->add_option("--convention", f3_convention, "half_split | paper_exponent");

  // replica ----------------------------------------------------------------
  auto* replica = app.add_subcommand("replica", "Simulated replica of the intermittent-signal experiment");
  replica->fallthrough();
  qsense::ReplicaOptions ro;
  double r_t2_ms = ro.t2 * 1e3;
  std::string r_convention = "paper_exponent";
  std::string r_inversion = "exact";
  std::vector<double> r_grid_hz;
  Frequency r_omega, r_sigma;
  add_frequency(replica, "omega-s", r_omega, "Centre frequency");
  add_frequency(replica, "sigma", r_sigma, "Tone amplitude standard deviation");
  replica->add_option("--contrast", ro.contrast_t1, "Contrast at t1");
  replica->add_option("--t2-ms", r_t2_ms, "Coherence time T2 (ms)");
  replica->add_option("--n", ro.shots, "Shots N per repetition");
  replica->add_option("--reps", ro.repetitions, "Repetitions per grid point");
  replica->add_option("--excess", ro.excess_factor, "Multiplicative excess noise over QPN");
  replica->add_option("--g-grid-hz", r_grid_hz, "Applied separations (Hz), increasing")->delimiter(',');
  replica->add_option("--inversion", r_inversion, "exact | gaussian_limit")
      ->check(CLI::IsMember({"exact", "gaussian_limit"}));
  replica->add_option("--rel-tol", ro.rel_tol, "Threshold rule tolerance");
  replica->add_option("--convention", r_convention, "half_split | paper_exponent");
  auto* degrade = replica->add_subcommand("degrade", "Readout degradation study");
  std::vector<double> flips{0.0, 0.05, 0.1, 0.2, 0.3};
  degrade->add_option("--flips", flips, "Bit-flip probabilities")->delimiter(',');

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    const Units units = g.unit();
    const Json config = resolved_config(app);

    if (analytic->parsed()) {
      const std::int64_t n = require(a_n, "n");
      const qsense::EnsembleConfig ens{n, a_m};
      qsense::validate(ens);
      qsense::SensitivityResult r;
      if (a_scenario == "intermittent") {
        const qsense::TwoTone tones{resolve(a_omega, "omega-s", units, {}), 0.0,
                                    resolve(a_sigma, "sigma", units, {}), convention_of(a_convention)};
        if (a_contrast) {
          r = qsense::gmin_intermittent(*a_contrast, ens, tones);
        } else {
          r = qsense::gmin_intermittent({require(a_fidelity, "fidelity"), require(a_t2, "t2"), 0.0}, ens, tones);
        }
      } else {
        const qsense::SensorModel sensor{a_fidelity.value_or(1.0), require(a_t2, "t2"),
                                         a_scenario == "constant" ? qsense::kPi / 2 : 0.0};
        r = a_scenario == "constant" ? qsense::gmin_constant(sensor, ens, require(a_ti, "ti"))
                                     : qsense::gmin_variance(sensor, ens, require(a_ti, "ti"));
      }
      std::cout << "scenario = " << a_scenario << "\n";
      std::cout << "method = " << qsense::to_string(r.method) << "\n";
      print_kv("g_min_rad_s", r.g_min);
      print_kv("g_min_hz", r.g_min / kTwoPi);
      std::cout << "valid = " << (r.valid ? "true" : "false") << "\n";
      print_kv("contrast", r.contrast);
      print_kv("t_i_s", r.t_i);
      std::cout << "n = " << n << "\nm = " << a_m << "\n";
      if (r.tones) {
        print_kv("omega_s_hz", r.tones->omega_s / kTwoPi);
        print_kv("sigma_hz", r.tones->sigma / kTwoPi);
        std::cout << "convention = " << qsense::to_string(r.tones->convention) << "\n";
      }
      if (!a_csv.empty()) {
        qsense::CsvWriter csv({"scenario", "method", "g_min_rad_s", "g_min_hz", "valid", "contrast", "t_i_s", "n",
                               "m"});
        csv.row(a_scenario, qsense::to_string(r.method), r.g_min, r.g_min / kTwoPi, int{r.valid}, r.contrast, r.t_i, n,
                a_m);
        std::ofstream(a_csv, std::ios::binary) << csv.str();
      }
      return kExitOk;
    }

    if (simulate->parsed()) {
      const qsense::SensorModel sensor{s_fidelity, s_t2, s_theta};
      const double ti = require(s_ti, "ti");
      qsense::SignalSpec spec;
      const double gval = resolve(s_g, "g", units, 0.0);
      if (s_signal == "constant") {
        spec = qsense::Constant{gval};
      } else if (s_signal == "stochastic") {
        spec = qsense::StochasticAmplitude{gval};
      } else {
        const qsense::TwoTone tones{resolve(s_omega, "omega-s", units, {}), gval, resolve(s_sigma, "sigma", units, {}),
                                    convention_of(s_convention)};
        if (s_signal == "two_tone") {
          spec = qsense::TwoToneStochastic{tones};
        } else {
          spec = qsense::IntermittentTwoTone{tones, s_tsig.value_or(ti)};
        }
      }
      qsense::validate(spec);
      qsense::validate(sensor);
      const qsense::StreamKey key{g.seed, qsense::pipeline_tag("simulate"), 0};
      auto table = qsense::simulate_shots(spec, sensor, {s_n, s_m}, ti, key);
      if (s_flip > 0) table = qsense::apply_readout_degradation(table, s_flip, {g.seed, qsense::pipeline_tag("simulate/flip"), 0});
      const auto est = qsense::estimate_population(table);
      const double p_model = qsense::mean_population(spec, sensor, ti);

      qsense::PipelineReport report;
      report.pipeline_id = "simulate";
      report.seed = g.seed;
      report.config = config;
      report.parameters = {{"signal", qsense::signal_kind(spec)},
                           {"p_hat", est.p_hat},
                           {"std_err", est.std_err},
                           {"qpn_std_err", est.qpn_std_err},
                           {"p_model", p_model},
                           {"flip_prob", table.flip_prob}};
      report.tables.push_back({"shots", qsense::shot_table_csv(table)});
      print_kv("p_hat", est.p_hat);
      print_kv("std_err", est.std_err);
      print_kv("qpn_std_err", est.qpn_std_err);
      print_kv("p_model", p_model);
      return finish(report, g);
    }

    if (fig2->parsed()) {
      auto report = qsense::run_fig2(f2);
      report.seed = g.seed;
      report.config = config;
      return finish(report, g);
    }

    if (fig3->parsed()) {
      f3.omega_s = resolve(f3_omega, "omega-s", units, f3.omega_s);
      f3.sigma = resolve(f3_sigma, "sigma", units, f3.sigma);
      f3.g = resolve(f3_g, "g", units, f3.g);
      f3.t2 = f3_t2_ms * 1e-3;
      f3.t_step = f3_step_ms * 1e-3;
      f3.monte_carlo = !f3_no_mc;
      f3.convention = convention_of(f3_convention);
      f3.threads = g.threads;
      auto report = qsense::run_fig3(f3, g.seed);
      report.config = config;
      return finish(report, g);
    }

    if (replica->parsed()) {
      ro.omega_s = resolve(r_omega, "omega-s", units, ro.omega_s);
      ro.sigma = resolve(r_sigma, "sigma", units, ro.sigma);
      ro.t2 = r_t2_ms * 1e-3;
      ro.convention = convention_of(r_convention);
      ro.inversion = r_inversion == "exact" ? qsense::Inversion::kExact : qsense::Inversion::kGaussianLimit;
      ro.threads = g.threads;
      if (!r_grid_hz.empty()) {
        ro.g_grid.clear();
        for (double v : r_grid_hz) ro.g_grid.push_back(v * kTwoPi);
      }
      auto report = degrade->parsed() ? qsense::run_fidelity_degradation(ro, flips, g.seed)
                                      : qsense::run_experiment_replica(ro, g.seed);
      report.config = config;
      return finish(report, g);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
