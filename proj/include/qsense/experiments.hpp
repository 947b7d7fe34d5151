#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "qsense/estimators.hpp"
#include "qsense/sensitivity.hpp"
#include "qsense/signal_model.hpp"

namespace qsense {

struct Check {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;
};

struct NamedTable {
  std::string name;
  std::string csv;
};

struct PipelineReport {
  std::string pipeline_id;
  std::uint64_t seed = 0;
  nlohmann::ordered_json parameters = nlohmann::ordered_json::object();
  /// Resolved run configuration, filled in by the caller.
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::vector<NamedTable> tables;
  std::vector<Check> checks;

  bool all_pass() const;
};

std::string manifest_json(const PipelineReport& report);

/// Writes <dir>/<table>.csv for every table and <dir>/manifest.json.
void write_report(const PipelineReport& report, const std::filesystem::path& dir);

/// n log-spaced points over [lo, hi], both ends included.
std::vector<double> log_grid(double lo, double hi, std::size_t n);

struct Fig2Options {
  std::vector<double> fidelities = log_grid(0.05, 1.0, 50);
  std::int64_t shots = 1000;
  std::int64_t sensors = 1;
  double t2 = 1.0;
};

PipelineReport run_fig2(const Fig2Options& options);

struct Fig3Options {
  double omega_s = kTwoPi * 1000.0;
  double sigma = kTwoPi * 500.0;
  double g = kTwoPi * 10.0;
  ToneConvention convention = ToneConvention::kPaperExponent;
  std::int64_t shots = 1000;
  std::int64_t sensors = 1;
  double t2 = 0.01;
  /// Panel (a): SNR(t_i) on a uniform grid step, 2 step, ... up to 5 T2.
  double t_step = 1e-4;
  bool monte_carlo = true;
  std::int64_t mc_shots = 100000;
  /// Sensors per simulated shot in the Monte-Carlo panel.
  std::int64_t mc_sensors = 1000000;
  /// Panels (b) and (c); the burst lasts one centre period.
  std::vector<double> fidelities = log_grid(0.05, 1.0, 50);
  /// Panel (d).
  std::vector<double> mex_t1_over_t2 = log_grid(1e-3, 1.0, 31);
  std::vector<double> mex_fidelities{1.0, 0.9997, 0.2};
  /// N used for panel (d); the M_ex closed-form scaling needs
  /// N (1 - exp(-2 chi(t1))) >> 1.
  std::int64_t mex_shots = 10000000000;
  int threads = 1;
};

PipelineReport run_fig3(const Fig3Options& options, std::uint64_t seed);

struct ReplicaOptions {
  double omega_s = kTwoPi * 2000.0;
  double sigma = kTwoPi * 275.0;
  ToneConvention convention = ToneConvention::kPaperExponent;
  /// Contrast at t1 = 2 pi / omega_s; the fidelity follows from T2.
  double contrast_t1 = 0.903;
  double t2 = 7.97e-3;
  double theta = 0.0;
  std::int64_t shots = 1000;
  std::int64_t repetitions = 11;
  /// Applied separations in rad/s, strictly increasing.
  std::vector<double> g_grid = default_replica_grid();
  double excess_factor = 1.17;
  Inversion inversion = Inversion::kExact;
  double rel_tol = 0.1;
  int threads = 1;

  double t1() const { return kTwoPi / omega_s; }
  SensorModel sensor() const;
  IntermittentTwoTone spec(double g) const;
  static std::vector<double> default_replica_grid();
};

PipelineReport run_experiment_replica(const ReplicaOptions& options, std::uint64_t seed);

/// Re-analyses the replica's shot tables after symmetric bit flips. The
/// effective fidelity is re-measured from the degraded g = 0 tables
/// relative to the undegraded ones. Needs g = 0 as the first grid point.
PipelineReport run_fidelity_degradation(const ReplicaOptions& options, const std::vector<double>& flips,
                                        std::uint64_t seed);

}  // namespace qsense
