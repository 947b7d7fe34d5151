#include "qsense/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "qsense/csv.hpp"
#include "qsense/montecarlo.hpp"
#include "qsense/numerics.hpp"
#include "qsense/parallel.hpp"

namespace qsense {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
// Slack for grid values that are meant to sit exactly on a range boundary.
constexpr double kGridSlack = 1e-9;

Check near(std::string name, double measured, double expected, double tolerance) {
  return {std::move(name), std::abs(measured - expected) <= tolerance, measured, expected, tolerance};
}

Check within(std::string name, double measured, double lo, double hi) {
  return {std::move(name), measured >= lo && measured <= hi, measured, 0.5 * (lo + hi), 0.5 * (hi - lo)};
}

double hz(double rad_per_s) { return rad_per_s / kTwoPi; }

std::vector<std::size_t> local_maxima(const std::vector<double>& v) {
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i + 1 < v.size(); ++i)
    if (v[i] > v[i - 1] && v[i] > v[i + 1]) out.push_back(i);
  return out;
}

void require_fidelities(const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("fidelity grid must not be empty");
  for (double f : grid)
    if (!(f > 0 && f <= 1)) throw std::invalid_argument("fidelity grid values must lie in (0, 1]");
}

std::vector<double> sorted_unique(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

// 0.1, 0.2, ..., 0.9 as decimal literals.
std::vector<double> tenths() {
  std::vector<double> out;
  for (int k = 1; k <= 9; ++k) out.push_back(k / 10.0);
  return out;
}

double ceil_inverse_square(double f) { return std::ceil(1.0 / (f * f) * (1.0 - 1e-12)); }

double spread(const std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi / *lo - 1.0;
}

}  // namespace

bool PipelineReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

std::string manifest_json(const PipelineReport& report) {
  nlohmann::ordered_json j;
  j["pipeline_id"] = report.pipeline_id;
  j["seed"] = report.seed;
  j["parameters"] = report.parameters;
  j["config"] = report.config;
  auto& tables = j["tables"] = nlohmann::ordered_json::array();
  for (const auto& t : report.tables) tables.push_back(t.name + ".csv");
  auto& checks = j["checks"] = nlohmann::ordered_json::array();
  for (const auto& c : report.checks) {
    checks.push_back({{"name", c.name},
                      {"pass", c.pass},
                      {"measured", c.measured},
                      {"expected", c.expected},
                      {"tolerance", c.tolerance}});
  }
  j["all_pass"] = report.all_pass();
  return j.dump(2) + "\n";
}

void write_report(const PipelineReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write = [&](const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
  };
  for (const auto& t : report.tables) write(dir / (t.name + ".csv"), t.csv);
  write(dir / "manifest.json", manifest_json(report));
}

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  if (!(lo > 0 && hi >= lo) || n == 0) throw std::invalid_argument("log_grid: need 0 < lo <= hi and n >= 1");
  if (n == 1) return {lo};
  std::vector<double> out(n);
  const double step = std::log(hi / lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) out[i] = lo * std::exp(step * static_cast<double>(i));
  out.front() = lo;
  out.back() = hi;
  return out;
}

// ---------------------------------------------------------------------------
// fig2 scan: amplitude vs variance estimation as a function of fidelity.

PipelineReport run_fig2(const Fig2Options& o) {
  require_fidelities(o.fidelities);
  const EnsembleConfig ens{o.shots, o.sensors};
  validate(ens);
  if (!(o.t2 > 0)) throw std::invalid_argument("fig2: T2 must be > 0");

  PipelineReport report;
  report.pipeline_id = "fig2";
  report.parameters = {{"shots", o.shots}, {"sensors", o.sensors}, {"t2_s", o.t2}, {"fidelities", o.fidelities}};

  struct Scenario2 {
    Scenario scenario;
    OptimizationTarget target;
    double theta;
  };
  const Scenario2 scenarios[] = {{Scenario::kConstant, OptimizationTarget::kConstant, kPi / 2},
                                 {Scenario::kVariance, OptimizationTarget::kVariance, 0.0}};
  const auto fidelities = sorted_unique(o.fidelities);

  CsvWriter sens({"scenario", "fidelity", "n", "m", "t2_s", "theta_rad", "t_opt_s", "g_min_rad_s", "g_min_hz",
                  "ratio_to_unity"});
  OptimalTime unity_opt[2];
  for (int s = 0; s < 2; ++s) {
    const auto& sc = scenarios[s];
    unity_opt[s] = optimal_integration_time(sc.target, {1.0, o.t2, sc.theta}, ens);
    for (double f : fidelities) {
      const auto opt = optimal_integration_time(sc.target, {f, o.t2, sc.theta}, ens);
      sens.row(to_string(sc.scenario), f, o.shots, o.sensors, o.t2, sc.theta, opt.t_i, opt.g_min, hz(opt.g_min),
               opt.g_min / unity_opt[s].g_min);
    }
  }
  report.tables.push_back({"sensitivity", sens.str()});

  auto comp_grid = fidelities;
  for (double f : tenths()) comp_grid.push_back(f);
  comp_grid = sorted_unique(comp_grid);
  const CompensationReference ref{o.shots};
  CsvWriter comp({"scenario", "fidelity", "n", "sensors_required", "sensors_real", "inverse_f_squared"});
  for (const auto& sc : scenarios) {
    for (double f : comp_grid) {
      comp.row(to_string(sc.scenario), f, o.shots, compensation_sensors(sc.scenario, f, ref),
               compensation_sensors_real(sc.scenario, f, ref), 1.0 / (f * f));
    }
  }
  report.tables.push_back({"compensation", comp.str()});

  int mismatches = 0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (double f : tenths()) {
    if (compensation_sensors(Scenario::kConstant, f, ref) != static_cast<std::int64_t>(ceil_inverse_square(f)))
      ++mismatches;
    const double r = compensation_sensors_real(Scenario::kVariance, f, ref) * f * f;
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  report.checks.push_back(near("constant_compensation_equals_ceil_inverse_f2", mismatches, 0, 0));
  report.checks.push_back(within("variance_compensation_min_over_inverse_f2", lo, 0.7, 1.5));
  report.checks.push_back(within("variance_compensation_max_over_inverse_f2", hi, 0.7, 1.5));
  report.checks.push_back(near("constant_argmin_t2", unity_opt[0].t_i / o.t2, 1.0, 1e-3));
  report.checks.push_back(near("variance_argmin_sqrt2_t2", unity_opt[1].t_i / o.t2 / std::sqrt(2.0), 1.0, 0.1));
  return report;
}

// ---------------------------------------------------------------------------
// fig3 scan: two-tone and intermittent signals.

PipelineReport run_fig3(const Fig3Options& o, std::uint64_t seed) {
  require_fidelities(o.fidelities);
  require_fidelities(o.mex_fidelities);
  if (o.mex_t1_over_t2.empty()) throw std::invalid_argument("fig3: t1 grid must not be empty");
  if (!(o.t_step > 0 && o.t2 > 0)) throw std::invalid_argument("fig3: t_step and T2 must be > 0");
  const EnsembleConfig ens{o.shots, o.sensors};
  validate(ens);
  const TwoTone tones{o.omega_s, o.g, o.sigma, o.convention};
  const SignalSpec spec = TwoToneStochastic{tones};
  validate(spec);
  const double period = tones.period();
  const double t1_over_t2 = period / o.t2;

  PipelineReport report;
  report.pipeline_id = "fig3";
  report.seed = seed;
  report.parameters = {{"omega_s_hz", hz(o.omega_s)},
                       {"sigma_hz", hz(o.sigma)},
                       {"g_hz", hz(o.g)},
                       {"convention", to_string(o.convention)},
                       {"shots", o.shots},
                       {"sensors", o.sensors},
                       {"t2_s", o.t2},
                       {"t_step_s", o.t_step},
                       {"monte_carlo", o.monte_carlo},
                       {"mc_shots", o.mc_shots},
                       {"mc_sensors", o.mc_sensors},
                       {"fidelities", o.fidelities},
                       {"mex_t1_over_t2", o.mex_t1_over_t2},
                       {"mex_fidelities", o.mex_fidelities},
                       {"mex_shots", o.mex_shots}};

  // Panel (a).
  const SensorModel sensor_a{1.0, o.t2, 0.0};
  const auto n_t = static_cast<std::size_t>(std::floor(5.0 * o.t2 / o.t_step * (1.0 + kGridSlack)));
  std::vector<double> t_grid(n_t);
  for (std::size_t k = 0; k < n_t; ++k) t_grid[k] = static_cast<double>(k + 1) * o.t_step;
  std::vector<double> snr_a;
  for (const auto& p : snr_curve(spec, sensor_a, ens, t_grid)) snr_a.push_back(p.snr);
  std::vector<double> snr_mc(n_t, kNaN);
  if (o.monte_carlo) {
    const SnrMonteCarlo mc{o.mc_shots, o.mc_sensors, {seed, pipeline_tag("fig3/snr"), 0}, o.threads};
    const auto curve = snr_curve_monte_carlo(spec, sensor_a, ens, t_grid, mc);
    for (std::size_t k = 0; k < n_t; ++k) snr_mc[k] = curve[k].snr;
  }
  std::vector<char> max_a(n_t, 0), max_mc(n_t, 0);
  for (auto i : local_maxima(snr_a)) max_a[i] = 1;
  if (o.monte_carlo)
    for (auto i : local_maxima(snr_mc)) max_mc[i] = 1;

  CsvWriter pa({"t_s", "t_over_t2", "snr_analytic", "local_max_analytic", "snr_monte_carlo", "local_max_monte_carlo",
                "omega_s_hz", "sigma_hz", "g_hz", "fidelity", "t2_s", "n", "m"});
  for (std::size_t k = 0; k < n_t; ++k) {
    pa.row(t_grid[k], t_grid[k] / o.t2, snr_a[k], int{max_a[k]}, snr_mc[k], int{max_mc[k]}, hz(o.omega_s),
           hz(o.sigma), hz(o.g), 1.0, o.t2, o.shots, o.sensors);
  }
  report.tables.push_back({"panel_a_snr", pa.str()});

  auto structure_checks = [&](const std::vector<double>& snr, const char* variant) {
    const auto maxima = local_maxima(snr);
    for (int n = 1; n <= 3; ++n) {
      const double target = n * period;
      double nearest = kNaN;
      for (auto i : maxima)
        if (std::isnan(nearest) || std::abs(t_grid[i] - target) < std::abs(nearest - target)) nearest = t_grid[i];
      report.checks.push_back(near("snr_local_max_at_period_" + std::to_string(n) + "_" + variant,
                                   std::isnan(nearest) ? std::numeric_limits<double>::infinity() : nearest, target,
                                   o.t_step * (1.0 + kGridSlack)));
    }
    const auto best = std::max_element(snr.begin(), snr.end()) - snr.begin();
    report.checks.push_back(within(std::string("snr_global_max_1.2_1.7_t2_") + variant,
                                   t_grid[static_cast<std::size_t>(best)] / o.t2, 1.2 - kGridSlack,
                                   1.7 + kGridSlack));
  };
  structure_checks(snr_a, "analytic");
  if (o.monte_carlo) structure_checks(snr_mc, "monte_carlo");

  // Panels (b) and (c).
  const auto fidelities = sorted_unique(o.fidelities);
  struct Row {
    double constant, t_constant, variance, t_variance, two_tone, t_two_tone, intermittent;
    bool intermittent_valid;
  };
  auto evaluate = [&](double f) {
    const auto c = optimal_integration_time(OptimizationTarget::kConstant, {f, o.t2, kPi / 2}, ens);
    const auto v = optimal_integration_time(OptimizationTarget::kVariance, {f, o.t2, 0.0}, ens);
    const auto w = optimal_integration_time(OptimizationTarget::kContinuousTwoTone, {f, o.t2, 0.0}, ens, tones);
    const auto i = gmin_intermittent(SensorModel{f, o.t2, 0.0}, ens, tones);
    return Row{c.g_min, c.t_i, v.g_min, v.t_i, w.g_min, w.t_i, i.g_min, i.valid};
  };
  std::vector<Row> rows(fidelities.size());
  parallel_for(fidelities.size(), o.threads, [&](std::size_t k) { rows[k] = evaluate(fidelities[k]); });
  const Row unity = fidelities.back() == 1.0 ? rows.back() : evaluate(1.0);

  CsvWriter pb({"scenario", "fidelity", "t_i_s", "g_min_rad_s", "g_min_hz", "ratio_to_unity", "valid", "omega_s_hz",
                "sigma_hz", "t2_s", "n", "m"});
  auto emit_b = [&](std::string_view name, auto g_of, auto t_of, auto valid_of) {
    for (std::size_t k = 0; k < fidelities.size(); ++k) {
      pb.row(name, fidelities[k], t_of(rows[k]), g_of(rows[k]), hz(g_of(rows[k])), g_of(rows[k]) / g_of(unity),
             int{valid_of(rows[k])}, hz(o.omega_s), hz(o.sigma), o.t2, o.shots, o.sensors);
    }
  };
  auto always = [](const Row&) { return true; };
  emit_b("constant", [](const Row& r) { return r.constant; }, [](const Row& r) { return r.t_constant; }, always);
  emit_b("variance", [](const Row& r) { return r.variance; }, [](const Row& r) { return r.t_variance; }, always);
  emit_b("continuous_two_tone", [](const Row& r) { return r.two_tone; }, [](const Row& r) { return r.t_two_tone; },
         always);
  emit_b("intermittent", [](const Row& r) { return r.intermittent; }, [&](const Row&) { return period; },
         [](const Row& r) { return r.intermittent_valid; });
  report.tables.push_back({"panel_b_sensitivity", pb.str()});

  const CompensationReference ref{o.shots, t1_over_t2};
  CsvWriter pc({"scenario", "fidelity", "n", "t1_over_t2", "sensors_required", "sensors_real", "inverse_f_squared"});
  for (Scenario s : {Scenario::kConstant, Scenario::kVariance, Scenario::kIntermittent}) {
    std::vector<std::pair<std::int64_t, double>> comp(fidelities.size());
    parallel_for(fidelities.size(), o.threads, [&](std::size_t k) {
      comp[k] = {compensation_sensors(s, fidelities[k], ref), compensation_sensors_real(s, fidelities[k], ref)};
    });
    for (std::size_t k = 0; k < fidelities.size(); ++k) {
      const double f = fidelities[k];
      pc.row(to_string(s), f, o.shots, s == Scenario::kIntermittent ? t1_over_t2 : kNaN, comp[k].first,
             comp[k].second, 1.0 / (f * f));
    }
  }
  report.tables.push_back({"panel_c_compensation", pc.str()});

  // Panel (d).
  const auto t1_grid = sorted_unique(o.mex_t1_over_t2);
  CsvWriter pd({"fidelity", "t1_over_t2", "n", "m_ex", "m_ex_times_t1_sq", "m_int_real", "m_int_predicted",
                "n_small", "m_ex_n_small"});
  std::vector<std::vector<double>> mex_t1sq(o.mex_fidelities.size());
  std::vector<std::vector<double>> mex(o.mex_fidelities.size());
  for (std::size_t a = 0; a < o.mex_fidelities.size(); ++a) {
    const double f = o.mex_fidelities[a];
    for (double r : t1_grid) {
      const double m_ex = excess_sensors(f, r, o.mex_shots);
      const double m_int = compensation_sensors_real(Scenario::kIntermittent, f, {o.mex_shots, r});
      const double predicted = 1.0 / (f * f) / -std::expm1(-r * r);
      pd.row(f, r, o.mex_shots, m_ex, m_ex * r * r, m_int, predicted, o.shots, excess_sensors(f, r, o.shots));
      mex[a].push_back(m_ex);
      if (r >= 1e-3 * (1 - kGridSlack) && r <= 1e-2 * (1 + kGridSlack)) mex_t1sq[a].push_back(m_ex * r * r);
    }
  }
  report.tables.push_back({"panel_d_excess_sensors", pd.str()});

  for (std::size_t a = 0; a < o.mex_fidelities.size(); ++a) {
    const double f = o.mex_fidelities[a];
    if (f == 1.0) report.checks.push_back(near("mex_flat_at_unity_fidelity", spread(mex[a]), 0.0, 0.01));
    if (f == 0.2 && mex_t1sq[a].size() >= 2)
      report.checks.push_back(near("mex_times_t1_sq_constant_f0.2", spread(mex_t1sq[a]), 0.0, 0.05));
  }
  {
    const double f = 0.2;
    const double r = 1e-3;
    const double m_int = compensation_sensors_real(Scenario::kIntermittent, f, {o.mex_shots, r});
    const double predicted = 1.0 / (f * f) / -std::expm1(-r * r);
    report.checks.push_back(near("intermittent_compensation_matches_dephasing_law", m_int / predicted, 1.0, 0.1));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Experiment replica.

SensorModel ReplicaOptions::sensor() const {
  const double x = t1() / t2;
  return {contrast_t1 * std::exp(0.5 * x * x), t2, theta};
}

IntermittentTwoTone ReplicaOptions::spec(double g) const {
  return {{omega_s, g, sigma, convention}, t1()};
}

std::vector<double> ReplicaOptions::default_replica_grid() {
  std::vector<double> grid{0.0};
  for (double g : log_grid(kTwoPi * 10.0, kTwoPi * 1000.0, 21)) grid.push_back(g);
  return grid;
}

namespace {

void validate_replica(const ReplicaOptions& o) {
  if (o.g_grid.size() < 5) throw std::invalid_argument("replica: g grid needs at least five points");
  if (o.g_grid.front() < 0) throw std::invalid_argument("replica: g grid must be non-negative");
  for (std::size_t i = 1; i < o.g_grid.size(); ++i)
    if (!(o.g_grid[i] > o.g_grid[i - 1])) throw std::invalid_argument("replica: g grid must be strictly increasing");
  if (o.repetitions < 2) throw std::invalid_argument("replica: need at least two repetitions");
  if (!(o.excess_factor >= 1)) throw std::invalid_argument("replica: excess factor must be >= 1");
  if (!(o.contrast_t1 > 0 && o.contrast_t1 <= 1)) throw std::invalid_argument("replica: contrast must be in (0, 1]");
  validate(o.sensor());
  validate(SignalSpec{o.spec(0.0)});
  validate(EnsembleConfig{o.shots, 1});
}

std::size_t slot(const ReplicaOptions& o, std::size_t j, std::size_t r) {
  return j * static_cast<std::size_t>(o.repetitions) + r;
}

std::vector<ShotTable> replica_tables(const ReplicaOptions& o, std::uint64_t seed) {
  const auto reps = static_cast<std::size_t>(o.repetitions);
  std::vector<ShotTable> tables(o.g_grid.size() * reps);
  const auto sensor = o.sensor();
  parallel_for(o.g_grid.size(), o.threads, [&](std::size_t j) {
    for (std::size_t r = 0; r < reps; ++r) {
      tables[slot(o, j, r)] = simulate_shots(o.spec(o.g_grid[j]), sensor, {o.shots, 1}, o.t1(),
                                             {seed, pipeline_tag("replica/shots"), slot(o, j, r)});
    }
  });
  return tables;
}

struct ReplicaAnalysis {
  std::vector<PopulationEstimate> estimates;
  BiasScan scan;
  GminExtraction threshold;
  GminExtraction fit;
};

ReplicaAnalysis analyse(const ReplicaOptions& o, const std::vector<ShotTable>& tables, const SensorModel& sensor,
                        double excess, std::uint64_t seed) {
  ReplicaAnalysis a;
  a.estimates.resize(tables.size());
  for (std::size_t i = 0; i < tables.size(); ++i)
    a.estimates[i] = excess_noise_channel(tables[i], excess, {seed, pipeline_tag("replica/excess"), i});
  const auto reps = static_cast<std::size_t>(o.repetitions);
  for (std::size_t j = 0; j < o.g_grid.size(); ++j) {
    if (o.g_grid[j] <= 0) continue;
    BiasScanRow row{o.g_grid[j], {}};
    for (std::size_t r = 0; r < reps; ++r)
      row.estimates.push_back(
          estimate_frequency_separation(a.estimates[slot(o, j, r)], sensor, o.spec(o.g_grid[j]), o.inversion));
    a.scan.rows.push_back(std::move(row));
  }
  a.threshold = empirical_gmin(a.scan, o.rel_tol);
  a.fit = fitted_gmin(a.scan, {sensor, o.spec(0.0), {o.shots, 1}, o.inversion});
  return a;
}

double mean_p(const ReplicaOptions& o, const ReplicaAnalysis& a, std::size_t j) {
  double sum = 0.0;
  for (std::size_t r = 0; r < static_cast<std::size_t>(o.repetitions); ++r) sum += a.estimates[slot(o, j, r)].p_hat;
  return sum / static_cast<double>(o.repetitions);
}

double sd_p(const ReplicaOptions& o, const ReplicaAnalysis& a, std::size_t j) {
  const double m = mean_p(o, a, j);
  double ss = 0.0;
  for (std::size_t r = 0; r < static_cast<std::size_t>(o.repetitions); ++r) {
    const double d = a.estimates[slot(o, j, r)].p_hat - m;
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(o.repetitions - 1));
}

nlohmann::ordered_json replica_parameters(const ReplicaOptions& o) {
  return {{"omega_s_hz", hz(o.omega_s)},
          {"sigma_hz", hz(o.sigma)},
          {"convention", to_string(o.convention)},
          {"contrast_t1", o.contrast_t1},
          {"fidelity", o.sensor().fidelity},
          {"t2_s", o.t2},
          {"t1_s", o.t1()},
          {"theta_rad", o.theta},
          {"shots", o.shots},
          {"sensors", 1},
          {"repetitions", o.repetitions},
          {"g_grid_hz", [&] {
             std::vector<double> v;
             for (double g : o.g_grid) v.push_back(hz(g));
             return v;
           }()},
          {"excess_factor", o.excess_factor},
          {"excess_noise_mode", "multiplicative"},
          {"inversion", o.inversion == Inversion::kExact ? "exact" : "gaussian_limit"},
          {"rel_tol", o.rel_tol}};
}

std::string scan_with_header(const ReplicaOptions& o, const BiasScan& scan, double excess) {
  std::string out = "# omega_s_hz = " + format_double(hz(o.omega_s)) + "\n# sigma_hz = " +
                    format_double(hz(o.sigma)) + "\n# contrast_t1 = " + format_double(o.contrast_t1) +
                    "\n# n = " + std::to_string(o.shots) + "\n# m = 1\n# excess_factor = " + format_double(excess) +
                    "\n";
  return out + bias_scan_csv(scan);
}

}  // namespace

PipelineReport run_experiment_replica(const ReplicaOptions& o, std::uint64_t seed) {
  validate_replica(o);
  const auto sensor = o.sensor();
  const EnsembleConfig ens{o.shots, 1};
  const auto tables = replica_tables(o, seed);
  const auto main = analyse(o, tables, sensor, o.excess_factor, seed);
  const auto base = o.excess_factor > 1.0 ? analyse(o, tables, sensor, 1.0, seed) : main;
  const double analytic = gmin_intermittent(o.contrast_t1, ens, o.spec(0.0).tones).g_min;

  PipelineReport report;
  report.pipeline_id = "replica";
  report.seed = seed;
  report.parameters = replica_parameters(o);

  const auto reps = static_cast<std::size_t>(o.repetitions);
  CsvWriter pop({"g_applied_hz", "rep_index", "p_hat", "std_err", "qpn_std_err", "excess_factor", "omega_s_hz",
                 "sigma_hz", "contrast_t1", "n", "m"});
  CsvWriter summary({"g_applied_hz", "p_model", "p_mean", "p_sd_across_reps", "qpn_sd_model", "sd_ratio",
                     "excess_factor", "omega_s_hz", "sigma_hz", "contrast_t1", "n", "m"});
  for (std::size_t j = 0; j < o.g_grid.size(); ++j) {
    const double g = o.g_grid[j];
    for (std::size_t r = 0; r < reps; ++r) {
      const auto& e = main.estimates[slot(o, j, r)];
      pop.row(hz(g), r, e.p_hat, e.std_err, e.qpn_std_err, o.excess_factor, hz(o.omega_s), hz(o.sigma),
              o.contrast_t1, o.shots, 1);
    }
    const double p_model = mean_population(o.spec(g), sensor, o.t1());
    const double qpn = std::sqrt(qpn_variance(p_model, ens));
    summary.row(hz(g), p_model, mean_p(o, main, j), sd_p(o, main, j), qpn, sd_p(o, main, j) / qpn, o.excess_factor,
                hz(o.omega_s), hz(o.sigma), o.contrast_t1, o.shots, 1);
  }
  report.tables.push_back({"population", pop.str()});
  report.tables.push_back({"population_summary", summary.str()});
  report.tables.push_back({"bias_scan", scan_with_header(o, main.scan, o.excess_factor)});

  CsvWriter gmin({"rule", "excess_factor", "g_min_rad_s", "g_min_hz", "resolved", "noise_factor", "analytic_hz"});
  auto gmin_rows = [&](const ReplicaAnalysis& a, double excess) {
    gmin.row("threshold", excess, a.threshold.g_min, hz(a.threshold.g_min), int{a.threshold.resolved}, kNaN,
             hz(analytic));
    gmin.row("fit", excess, a.fit.g_min, hz(a.fit.g_min), int{a.fit.resolved}, a.fit.noise_factor, hz(analytic));
  };
  if (o.excess_factor > 1.0) gmin_rows(base, 1.0);
  gmin_rows(main, o.excess_factor);
  report.tables.push_back({"gmin", gmin.str()});

  report.checks.push_back(near("analytic_gmin_290hz_within_2pct", hz(analytic), 290.0, 0.02 * 290.0));
  if (o.g_grid.front() == 0.0) {
    const double p0 = mean_population(o.spec(0.0), sensor, o.t1());
    const double qpn = std::sqrt(qpn_variance(p0, ens));
    const double dof = static_cast<double>(o.repetitions - 1);
    report.checks.push_back(near("p0_matches_model", mean_p(o, main, 0), p0,
                                 3.0 * o.excess_factor * qpn / std::sqrt(static_cast<double>(o.repetitions))));
    report.checks.push_back(within("qpn_ratio_at_g0", sd_p(o, main, 0) / qpn,
                                   o.excess_factor * std::sqrt(chi_squared_quantile(0.001, dof) / dof),
                                   o.excess_factor * std::sqrt(chi_squared_quantile(0.999, dof) / dof)));
  }
  report.checks.push_back(near("gmin_290hz_within_15pct", hz(main.fit.g_min), 290.0, 0.15 * 290.0));
  report.checks.push_back(within("gmin_in_250_340hz_qpn_limited", hz(base.fit.g_min), 250.0, 340.0));
  if (o.excess_factor > 1.0) {
    const double ratio = main.fit.g_min / base.fit.g_min;
    report.checks.push_back({"gmin_increases_with_excess", ratio > 1.0, ratio, 1.0, 0.0});
  }
  return report;
}

PipelineReport run_fidelity_degradation(const ReplicaOptions& o, const std::vector<double>& flips,
                                        std::uint64_t seed) {
  validate_replica(o);
  if (o.g_grid.front() != 0.0) throw std::invalid_argument("degradation: g grid must start at 0");
  if (flips.size() < 2) throw std::invalid_argument("degradation: need at least two flip probabilities");
  for (double f : flips)
    if (!(f >= 0 && f <= 0.45)) throw std::invalid_argument("degradation: flip probabilities must lie in [0, 0.45]");
  const auto flip_grid = sorted_unique(flips);
  if (!(o.theta == 0.0)) throw std::invalid_argument("degradation: requires theta = 0");

  const auto nominal = o.sensor();
  const EnsembleConfig ens{o.shots, 1};
  const auto tables = replica_tables(o, seed);
  const auto reps = static_cast<std::size_t>(o.repetitions);

  auto g0_contrast = [&](const std::vector<ShotTable>& t) {
    double sum = 0.0;
    for (std::size_t r = 0; r < reps; ++r)
      sum += excess_noise_channel(t[slot(o, 0, r)], o.excess_factor, {seed, pipeline_tag("replica/excess"), slot(o, 0, r)})
                 .p_hat;
    return 1.0 - 2.0 * sum / static_cast<double>(reps);
  };
  const double c_undegraded = g0_contrast(tables);

  struct Point {
    double flip, fidelity, contrast;
    ReplicaAnalysis analysis;
  };
  std::vector<Point> points;
  for (double f : flip_grid) {
    std::vector<ShotTable> degraded(tables.size());
    for (std::size_t i = 0; i < tables.size(); ++i)
      degraded[i] = apply_readout_degradation(tables[i], f, {seed, pipeline_tag("replica/flip"), i});
    const double ratio = g0_contrast(degraded) / c_undegraded;
    if (!(ratio > 0)) throw std::runtime_error("degradation: measured contrast is not positive");
    SensorModel sensor = nominal;
    sensor.fidelity = nominal.fidelity * ratio;
    points.push_back({f, sensor.fidelity, o.contrast_t1 * ratio, analyse(o, degraded, sensor, o.excess_factor, seed)});
  }

  // Log-space least squares with one free scale per model.
  auto fit = [&](auto shape) {
    double sum = 0.0;
    for (const auto& p : points) sum += std::log(p.analysis.fit.g_min) - std::log(shape(p));
    const double log_scale = sum / static_cast<double>(points.size());
    double rss = 0.0;
    std::vector<double> pred;
    for (const auto& p : points) {
      const double d = std::log(p.analysis.fit.g_min) - std::log(shape(p)) - log_scale;
      rss += d * d;
      pred.push_back(std::exp(log_scale) * shape(p));
    }
    return std::pair{rss, pred};
  };
  const auto tones = o.spec(0.0).tones;
  const auto [rss_int, pred_int] =
      fit([&](const Point& p) { return gmin_intermittent(p.contrast, ens, tones).g_min; });
  const auto [rss_sqrt, pred_sqrt] = fit([](const Point& p) { return 1.0 / std::sqrt(p.fidelity); });

  PipelineReport report;
  report.pipeline_id = "replica_degrade";
  report.seed = seed;
  report.parameters = replica_parameters(o);
  report.parameters["flips"] = flip_grid;

  CsvWriter table({"flip_prob", "fidelity_eff", "fidelity_expected", "contrast_eff", "g_min_fit_hz", "resolved",
                   "noise_factor", "g_min_threshold_hz", "model_intermittent_hz", "model_inverse_sqrt_f_hz",
                   "omega_s_hz", "sigma_hz", "n", "m", "excess_factor"});
  for (std::size_t k = 0; k < points.size(); ++k) {
    const auto& p = points[k];
    table.row(p.flip, p.fidelity, (1.0 - 2.0 * p.flip) * nominal.fidelity, p.contrast, hz(p.analysis.fit.g_min),
              int{p.analysis.fit.resolved}, p.analysis.fit.noise_factor, hz(p.analysis.threshold.g_min),
              hz(pred_int[k]), hz(pred_sqrt[k]), hz(o.omega_s), hz(o.sigma), o.shots, 1, o.excess_factor);
  }
  report.tables.push_back({"degradation", table.str()});

  CsvWriter fits({"model", "rss_log"});
  fits.row("intermittent", rss_int);
  fits.row("inverse_sqrt_f", rss_sqrt);
  report.tables.push_back({"degradation_fit", fits.str()});

  report.checks.push_back({"intermittent_scaling_fits_better_than_inverse_sqrt_f", rss_int < rss_sqrt,
                           rss_int / rss_sqrt, 1.0, 0.0});
  if (flip_grid.front() == 0.0) {
    const auto replica = analyse(o, tables, nominal, o.excess_factor, seed);
    report.checks.push_back(near("flip0_reproduces_replica_gmin", hz(points.front().analysis.fit.g_min),
                                 hz(replica.fit.g_min), 0.0));
  }
  return report;
}

}  // namespace qsense
