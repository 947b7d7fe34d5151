#include "qsense/sensor_physics.hpp"

#include <cmath>
#include <stdexcept>

namespace qsense {

void validate(const SensorModel& sensor) {
  if (!(sensor.fidelity > 0 && sensor.fidelity <= 1))
    throw std::invalid_argument("sensor: fidelity must be in (0, 1]");
  if (!(sensor.t2 > 0) || !std::isfinite(sensor.t2))
    throw std::invalid_argument("sensor: T2 must be > 0");
  if (!std::isfinite(sensor.theta)) throw std::invalid_argument("sensor: theta must be finite");
}

void validate(const EnsembleConfig& ensemble) {
  if (ensemble.shots < 1) throw std::invalid_argument("ensemble: N must be >= 1");
  if (ensemble.sensors < 1) throw std::invalid_argument("ensemble: M must be >= 1");
}

double decoherence_exponent(const SensorModel& sensor, double t) {
  const double r = t / sensor.t2;
  return 0.5 * r * r;
}

double contrast(const SensorModel& sensor, double t) {
  if (t < 0) throw std::invalid_argument("contrast: t must be >= 0");
  return sensor.fidelity * std::exp(-decoherence_exponent(sensor, t));
}

double excitation_probability(const SensorModel& sensor, double t_i, double phi) {
  return 0.5 * (1.0 - contrast(sensor, t_i) * std::cos(sensor.theta + phi));
}

double qpn_variance(double p, const EnsembleConfig& ensemble) {
  if (!(p >= 0 && p <= 1)) throw std::invalid_argument("qpn_variance: p must be in [0, 1]");
  return p * (1.0 - p) / ensemble.total();
}

double mean_population(const SignalSpec& spec, const SensorModel& sensor, double t_i) {
  const double c = contrast(sensor, t_i);
  if (const auto* k = std::get_if<Constant>(&spec)) {
    return 0.5 * (1.0 - c * std::cos(sensor.theta + k->g * t_i));
  }
  double half_var = 0.0;
  if (const auto* s = std::get_if<StochasticAmplitude>(&spec)) {
    half_var = 0.5 * s->g * s->g * t_i * t_i;
  } else if (const auto* s = std::get_if<TwoToneStochastic>(&spec)) {
    half_var = 0.5 * phase_variance_exact(s->tones, t_i);
  } else {
    const auto& b = std::get<IntermittentTwoTone>(spec);
    if (t_i > b.t_sig * (1.0 + 1e-12))
      throw std::invalid_argument("mean_population: t_i exceeds the burst duration");
    half_var = 0.5 * phase_variance_exact(b.tones, t_i);
  }
  // <cos(theta + X)> = cos(theta) exp(-Var X / 2) for zero-mean Gaussian X.
  return 0.5 * (1.0 - c * std::cos(sensor.theta) * std::exp(-half_var));
}

double effective_coherence_time(const SensorModel& sensor, double g) {
  if (g < 0) throw std::invalid_argument("effective_coherence_time: g must be >= 0");
  return 1.0 / std::sqrt(1.0 / (sensor.t2 * sensor.t2) + g * g);
}

}  // namespace qsense
