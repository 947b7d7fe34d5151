#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "qsense/montecarlo.hpp"
#include "qsense/sensor_physics.hpp"
#include "qsense/signal_model.hpp"

namespace qsense {

enum class EstimateStatus {
  kDefined,
  /// p_hat shows less signal than the g = 0 baseline.
  kBelowBaseline,
  /// p_hat lies beyond the range of the forward map.
  kOutOfDomain,
};

std::string_view to_string(EstimateStatus s);
EstimateStatus parse_estimate_status(std::string_view s);

struct EstimateOutcome {
  EstimateStatus status = EstimateStatus::kOutOfDomain;
  /// Only meaningful when defined(); rad/s.
  double g_hat = 0.0;

  bool defined() const noexcept { return status == EstimateStatus::kDefined; }
  static EstimateOutcome Defined(double g) { return {EstimateStatus::kDefined, g}; }
  static EstimateOutcome Excluded(EstimateStatus s) { return {s, 0.0}; }
};

/// theta = pi/2: g = arcsin((2p - 1)/C) / t_i.
EstimateOutcome estimate_amplitude(const PopulationEstimate& est, const SensorModel& sensor, double t_i);

/// theta in {0, pi}: g^2 = -(2/t_i^2) ln((1 - 2p) cos(theta) / C).
EstimateOutcome estimate_variance(const PopulationEstimate& est, const SensorModel& sensor, double t_i);

enum class Inversion {
  /// Solve the exact phase-variance functional for g.
  kExact,
  /// Invert the small-g Gaussian form exp(-kappa g^2).
  kGaussianLimit,
};

/// Frequency separation of an intermittent two-tone burst measured at one
/// centre period, t1 = 2pi/omega_s.
EstimateOutcome estimate_frequency_separation(const PopulationEstimate& est, const SensorModel& sensor,
                                              const IntermittentTwoTone& spec,
                                              Inversion inversion = Inversion::kExact);

/// Same inversion applied to a bare population value.
EstimateOutcome invert_frequency_separation(double p_hat, const SensorModel& sensor,
                                            const IntermittentTwoTone& spec, Inversion inversion);

struct BiasScanRow {
  double g_applied = 0.0;
  std::vector<EstimateOutcome> estimates;
};

/// Estimates over repetitions at increasing applied g.
struct BiasScan {
  std::vector<BiasScanRow> rows;
};

/// Throws std::invalid_argument unless g_applied is strictly increasing and
/// every row has at least two repetitions.
void validate(const BiasScan& scan);

std::string bias_scan_csv(const BiasScan& scan);
BiasScan parse_bias_scan_csv(std::string_view csv);

struct GminExtraction {
  double g_min = 0.0;
  bool resolved = false;
  /// Fitted noise level relative to QPN (fit rule only).
  double noise_factor = 0.0;
};

/// Threshold rule: smallest g_applied from which every larger grid point has
/// at least half its repetitions defined and a median estimate within
/// rel_tol of the applied value. Needs at least four grid points.
GminExtraction empirical_gmin(const BiasScan& scan, double rel_tol = 0.1);

/// Forward model used to explain the exclusion bias of a scan.
struct BiasModel {
  SensorModel sensor;
  IntermittentTwoTone spec;
  EnsembleConfig ensemble;
  Inversion inversion = Inversion::kExact;
};

/// Fit rule: finds the noise level lambda * QPN under which the truncated
/// (exclusion-conditioned) median of the estimator best matches the scan's
/// medians in log space, then returns the g at which the signal equals that
/// noise (SNR = 1).
GminExtraction fitted_gmin(const BiasScan& scan, const BiasModel& model);

}  // namespace qsense
