#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qsense/random.hpp"
#include "qsense/sensor_physics.hpp"
#include "qsense/signal_model.hpp"

namespace qsense {

/// Per-shot counts of excited sensors, k in [0, M], plus everything needed
/// to regenerate the table.
struct ShotTable {
  std::vector<std::int32_t> counts;
  SignalSpec spec;
  SensorModel sensor;
  EnsembleConfig ensemble;
  double t_i = 0.0;
  StreamKey key;
  /// Net bit-flip probability applied after measurement.
  double flip_prob = 0.0;
};

struct PopulationEstimate {
  double p_hat = 0.0;
  /// Sample standard deviation of per-shot fractions over sqrt(N).
  double std_err = 0.0;
  /// sqrt(p_hat (1 - p_hat) / (N M)), for comparison with std_err.
  double qpn_std_err = 0.0;
  std::int64_t n_shots = 0;
  std::int64_t n_sensors = 0;
};

/// Number of successes in `trials` Bernoulli(p) draws. Small problems use
/// CDF inversion of a single uniform, so the count is non-decreasing in p
/// for a fixed stream.
std::int32_t sample_binomial(std::int64_t trials, double p, ShotRng& rng);

/// N shots; each draws one signal realization shared by all M sensors and a
/// binomial count of excited sensors. Shot i uses stream (key, i).
ShotTable simulate_shots(const SignalSpec& spec, const SensorModel& sensor,
                         const EnsembleConfig& ensemble, double t_i, const StreamKey& key);

PopulationEstimate estimate_population(const ShotTable& table);

/// Flips each recorded bit with probability flip_prob (M = 1 only).
ShotTable apply_readout_degradation(const ShotTable& table, double flip_prob, const StreamKey& key);

/// Estimate whose noise exceeds QPN by excess_factor: std_err is scaled and
/// p_hat receives Gaussian jitter of variance (factor^2 - 1) * QPN, then is
/// clamped to [0, 1].
PopulationEstimate excess_noise_channel(const ShotTable& table, double excess_factor,
                                        const StreamKey& key);

/// CSV with `# key = value` metadata lines and columns shot_index,count.
std::string shot_table_csv(const ShotTable& table);

}  // namespace qsense
