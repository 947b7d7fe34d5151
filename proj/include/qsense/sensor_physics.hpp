#pragma once

#include <cstdint>

#include "qsense/signal_model.hpp"

namespace qsense {

/// Ramsey sensor with time-independent fidelity F, Gaussian dephasing time
/// T2 (s) and bias phase theta (rad).
struct SensorModel {
  double fidelity = 1.0;
  double t2 = 1.0;
  double theta = 0.0;
};

/// N shots per population estimate, M unentangled sensors per shot.
struct EnsembleConfig {
  std::int64_t shots = 1;
  std::int64_t sensors = 1;

  double total() const noexcept { return static_cast<double>(shots) * static_cast<double>(sensors); }
};

void validate(const SensorModel& sensor);
void validate(const EnsembleConfig& ensemble);

/// chi(t) = t^2 / (2 T2^2).
double decoherence_exponent(const SensorModel& sensor, double t);

/// C(t) = F exp(-chi(t)).
double contrast(const SensorModel& sensor, double t);

/// p = (1 - C(t_i) cos(theta + phi)) / 2.
double excitation_probability(const SensorModel& sensor, double t_i, double phi);

/// Quantum projection noise p(1-p)/(NM).
double qpn_variance(double p, const EnsembleConfig& ensemble);

/// Population averaged over signal realizations, in closed form.
double mean_population(const SignalSpec& spec, const SensorModel& sensor, double t_i);

/// (1/T2^2 + g^2)^(-1/2).
double effective_coherence_time(const SensorModel& sensor, double g);

}  // namespace qsense
