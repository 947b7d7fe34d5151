#include "qsense/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "qsense/csv.hpp"

namespace qsense {

std::int32_t sample_binomial(std::int64_t trials, double p, ShotRng& rng) {
  if (p <= 0.0) {
    rng.uniform();
    return 0;
  }
  if (p >= 1.0) {
    rng.uniform();
    return static_cast<std::int32_t>(trials);
  }
  const double q = 1.0 - p;
  const double log_p0 = static_cast<double>(trials) * std::log(q);
  if (trials <= 1024 && log_p0 > -700.0) {
    const double u = rng.uniform();
    double pmf = std::exp(log_p0);
    double cdf = pmf;
    const double ratio = p / q;
    std::int64_t k = 0;
    while (u >= cdf && k < trials) {
      pmf *= static_cast<double>(trials - k) / static_cast<double>(k + 1) * ratio;
      ++k;
      cdf += pmf;
    }
    return static_cast<std::int32_t>(k);
  }
  std::binomial_distribution<std::int64_t> dist(trials, p);
  return static_cast<std::int32_t>(dist(rng));
}

ShotTable simulate_shots(const SignalSpec& spec, const SensorModel& sensor,
                         const EnsembleConfig& ensemble, double t_i, const StreamKey& key) {
  validate(spec);
  validate(sensor);
  validate(ensemble);
  if (ensemble.sensors > std::numeric_limits<std::int32_t>::max())
    throw std::invalid_argument("simulate_shots: too many sensors per shot");

  ShotTable table{{}, spec, sensor, ensemble, t_i, key, 0.0};
  table.counts.resize(static_cast<std::size_t>(ensemble.shots));
  for (std::int64_t i = 0; i < ensemble.shots; ++i) {
    ShotRng rng(key, static_cast<std::uint64_t>(i));
    const auto realization = sample_realization(spec, rng);
    const double phi = accrued_phase(spec, realization, t_i);
    const double p = excitation_probability(sensor, t_i, phi);
    table.counts[static_cast<std::size_t>(i)] = sample_binomial(ensemble.sensors, p, rng);
  }
  return table;
}

PopulationEstimate estimate_population(const ShotTable& table) {
  if (table.counts.empty()) throw std::invalid_argument("estimate_population: empty table");
  const auto n = static_cast<std::int64_t>(table.counts.size());
  const auto m = table.ensemble.sensors;
  const double inv_m = 1.0 / static_cast<double>(m);

  double sum = 0.0;
  for (auto k : table.counts) sum += k;
  const double p_hat = sum * inv_m / static_cast<double>(n);

  double ss = 0.0;
  for (auto k : table.counts) {
    const double d = k * inv_m - p_hat;
    ss += d * d;
  }
  const double sample_sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;

  PopulationEstimate est;
  est.p_hat = p_hat;
  est.std_err = sample_sd / std::sqrt(static_cast<double>(n));
  est.qpn_std_err = std::sqrt(p_hat * (1.0 - p_hat) / (static_cast<double>(n) * static_cast<double>(m)));
  est.n_shots = n;
  est.n_sensors = m;
  return est;
}

ShotTable apply_readout_degradation(const ShotTable& table, double flip_prob, const StreamKey& key) {
  if (table.ensemble.sensors != 1)
    throw std::invalid_argument("apply_readout_degradation: requires one sensor per shot");
  if (!(flip_prob >= 0.0 && flip_prob <= 0.5))
    throw std::invalid_argument("apply_readout_degradation: flip_prob must be in [0, 0.5]");
  ShotTable out = table;
  out.flip_prob = table.flip_prob + flip_prob - 2.0 * table.flip_prob * flip_prob;
  if (flip_prob == 0.0) return out;
  for (std::size_t i = 0; i < out.counts.size(); ++i) {
    ShotRng rng(key, i);
    if (rng.uniform() < flip_prob) out.counts[i] = 1 - out.counts[i];
  }
  return out;
}

PopulationEstimate excess_noise_channel(const ShotTable& table, double excess_factor,
                                        const StreamKey& key) {
  if (!(excess_factor >= 1.0)) throw std::invalid_argument("excess_noise_channel: factor must be >= 1");
  PopulationEstimate est = estimate_population(table);
  if (excess_factor == 1.0) return est;
  ShotRng rng(key, 0);
  const double jitter_sd = std::sqrt(excess_factor * excess_factor - 1.0) * est.qpn_std_err;
  est.p_hat = std::clamp(est.p_hat + jitter_sd * rng.normal(), 0.0, 1.0);
  est.std_err *= excess_factor;
  return est;
}

std::string shot_table_csv(const ShotTable& table) {
  CsvWriter csv({"shot_index", "count"});
  csv.comment("signal", signal_kind(table.spec));
  csv.comment("g_rad_s", format_double(separation(table.spec)));
  if (const auto* s = std::get_if<TwoToneStochastic>(&table.spec)) {
    csv.comment("omega_s_rad_s", format_double(s->tones.omega_s));
    csv.comment("sigma_rad_s", format_double(s->tones.sigma));
    csv.comment("convention", to_string(s->tones.convention));
  } else if (const auto* b = std::get_if<IntermittentTwoTone>(&table.spec)) {
    csv.comment("omega_s_rad_s", format_double(b->tones.omega_s));
    csv.comment("sigma_rad_s", format_double(b->tones.sigma));
    csv.comment("convention", to_string(b->tones.convention));
    csv.comment("t_sig_s", format_double(b->t_sig));
  }
  csv.comment("fidelity", format_double(table.sensor.fidelity));
  csv.comment("t2_s", format_double(table.sensor.t2));
  csv.comment("theta_rad", format_double(table.sensor.theta));
  csv.comment("shots", std::to_string(table.ensemble.shots));
  csv.comment("sensors", std::to_string(table.ensemble.sensors));
  csv.comment("t_i_s", format_double(table.t_i));
  csv.comment("seed", std::to_string(table.key.seed));
  csv.comment("pipeline", std::to_string(table.key.pipeline));
  csv.comment("point", std::to_string(table.key.point));
  csv.comment("flip_prob", format_double(table.flip_prob));
  for (std::size_t i = 0; i < table.counts.size(); ++i) csv.row(i, table.counts[i]);
  return csv.str();
}

}  // namespace qsense
