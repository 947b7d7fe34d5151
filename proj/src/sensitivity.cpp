#include "qsense/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "qsense/montecarlo.hpp"
#include "qsense/numerics.hpp"
#include "qsense/parallel.hpp"

namespace qsense {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kBoundaryTolerance = 1e-9;
constexpr double kBracketT2 = 5.0;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// +1 when a growing parameter raises the population at this bias phase.
double signal_direction(const SignalSpec& spec, const SensorModel& sensor) {
  if (std::holds_alternative<Constant>(spec)) return std::sin(sensor.theta) >= 0 ? 1.0 : -1.0;
  return std::cos(sensor.theta) >= 0 ? 1.0 : -1.0;
}

const TwoTone* tones_of(const SignalSpec& spec) {
  if (const auto* s = std::get_if<TwoToneStochastic>(&spec)) return &s->tones;
  if (const auto* s = std::get_if<IntermittentTwoTone>(&spec)) return &s->tones;
  return nullptr;
}

// Largest parameter over which the SNR of the family is searched.
double search_ceiling(const SignalSpec& family, double t_i) {
  return std::visit(Overloaded{
                        [t_i](const Constant&) { return kPi / (2.0 * t_i); },
                        [t_i](const StochasticAmplitude&) { return 10.0 / t_i; },
                        [](const TwoToneStochastic& s) {
                          return s.tones.omega_s / (s.tones.convention == ToneConvention::kHalfSplit ? 0.5 : 1.0);
                        },
                        [](const IntermittentTwoTone& s) {
                          return s.tones.omega_s / (s.tones.convention == ToneConvention::kHalfSplit ? 0.5 : 1.0);
                        },
                    },
                    family);
}

// Small-signal check shared by closed forms and crossings.
bool small_signal(const SignalSpec& family, double g, double t_i) {
  if (!std::isfinite(g)) return false;
  if (const auto* tones = tones_of(family)) {
    TwoTone at = *tones;
    const double base = phase_variance_exact(at, t_i);
    at.g = g;
    return 0.5 * (phase_variance_exact(at, t_i) - base) < kSmallSignalLimit;
  }
  return (g * t_i) * (g * t_i) < kSmallSignalLimit;
}

double constant_gmin(double c, double nm, double t) { return 1.0 / (std::sqrt(nm) * t * c); }

double variance_gmin(double c, double nm, double t) {
  return std::sqrt(gaussian_kernel_gmin_squared(c, nm, 0.5 * t * t));
}

double gaussian_contrast(double fidelity, double t_over_t2) {
  return fidelity * std::exp(-0.5 * t_over_t2 * t_over_t2);
}

// Best g_min over t in units of T2 = 1, real-valued NM.
double best_constant(double fidelity, double nm) {
  auto f = [&](double t) { return constant_gmin(gaussian_contrast(fidelity, t), nm, t); };
  return golden_section_minimize(f, 1e-6, kBracketT2, 1e-9).value;
}

double best_variance(double fidelity, double nm) {
  auto f = [&](double t) { return variance_gmin(gaussian_contrast(fidelity, t), nm, t); };
  return golden_section_minimize(f, 1e-6, kBracketT2, 1e-9).value;
}

double best_gmin(Scenario s, double fidelity, double nm, double t1_over_t2) {
  switch (s) {
    case Scenario::kConstant:
      return best_constant(fidelity, nm);
    case Scenario::kVariance:
      return best_variance(fidelity, nm);
    case Scenario::kIntermittent:
      return std::sqrt(gaussian_kernel_gmin_squared(gaussian_contrast(fidelity, t1_over_t2), nm, 1.0));
  }
  throw std::invalid_argument("unknown scenario");
}

void check_reference(double fidelity, const CompensationReference& ref) {
  if (!(fidelity > 0 && fidelity <= 1)) throw std::invalid_argument("compensation: fidelity must be in (0, 1]");
  if (ref.shots < 1) throw std::invalid_argument("compensation: N must be >= 1");
  if (!(ref.t1_over_t2 > 0)) throw std::invalid_argument("compensation: t1/T2 must be > 0");
}

}  // namespace

std::string_view to_string(SensitivityMethod m) {
  switch (m) {
    case SensitivityMethod::kClosedForm:
      return "closed_form";
    case SensitivityMethod::kRootFound:
      return "root_found";
    case SensitivityMethod::kMonteCarlo:
      return "monte_carlo";
  }
  return "closed_form";
}

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::kConstant:
      return "constant";
    case Scenario::kVariance:
      return "variance";
    case Scenario::kIntermittent:
      return "intermittent";
  }
  return "constant";
}

double gaussian_kernel_gmin_squared(double c, double nm, double kappa) {
  if (!(c > 0 && c <= 1)) throw std::invalid_argument("gaussian kernel: contrast must be in (0, 1]");
  if (!(nm > 0)) throw std::invalid_argument("gaussian kernel: NM must be > 0");
  if (!(kappa > 0)) throw std::invalid_argument("gaussian kernel: kappa must be > 0");
  return (c + std::sqrt(c * c + nm * (1.0 - c * c))) / (nm * c * kappa);
}

double gaussian_kernel_required_nm(double c, double x) {
  if (!(c > 0 && c <= 1) || !(x > 0)) throw std::invalid_argument("gaussian kernel: bad arguments");
  return (1.0 - c * c + 2.0 * c * c * x) / (c * c * x * x);
}

SensitivityResult gmin_constant(const SensorModel& sensor, const EnsembleConfig& ensemble, double t_i) {
  validate(sensor);
  validate(ensemble);
  if (!(t_i > 0)) throw std::invalid_argument("gmin_constant: t_i must be > 0");
  SensitivityResult r;
  r.contrast = contrast(sensor, t_i);
  r.g_min = constant_gmin(r.contrast, ensemble.total(), t_i);
  r.method = SensitivityMethod::kClosedForm;
  r.sensor = sensor;
  r.ensemble = ensemble;
  r.t_i = t_i;
  r.valid = (r.g_min * t_i) * (r.g_min * t_i) < kSmallSignalLimit;
  return r;
}

SensitivityResult gmin_variance(const SensorModel& sensor, const EnsembleConfig& ensemble, double t_i) {
  validate(sensor);
  validate(ensemble);
  if (!(t_i > 0)) throw std::invalid_argument("gmin_variance: t_i must be > 0");
  SensitivityResult r;
  r.contrast = contrast(sensor, t_i);
  r.g_min = variance_gmin(r.contrast, ensemble.total(), t_i);
  r.method = SensitivityMethod::kClosedForm;
  r.sensor = sensor;
  r.ensemble = ensemble;
  r.t_i = t_i;
  r.valid = (r.g_min * t_i) * (r.g_min * t_i) < kSmallSignalLimit;
  return r;
}

SensitivityResult gmin_intermittent(double contrast_t1, const EnsembleConfig& ensemble, const TwoTone& tones) {
  validate(ensemble);
  validate(SignalSpec{TwoToneStochastic{tones}});
  const double kappa = 0.5 * small_g_phase_curvature(tones);
  SensitivityResult r;
  r.contrast = contrast_t1;
  r.g_min = std::sqrt(gaussian_kernel_gmin_squared(contrast_t1, ensemble.total(), kappa));
  r.method = SensitivityMethod::kClosedForm;
  r.ensemble = ensemble;
  r.t_i = tones.period();
  r.tones = tones;
  r.valid = kappa * r.g_min * r.g_min < kSmallSignalLimit;
  return r;
}

SensitivityResult gmin_intermittent(const SensorModel& sensor, const EnsembleConfig& ensemble,
                                    const TwoTone& tones) {
  validate(sensor);
  auto r = gmin_intermittent(contrast(sensor, tones.period()), ensemble, tones);
  r.sensor = sensor;
  return r;
}

double exact_snr(const SignalSpec& spec, const SensorModel& sensor, const EnsembleConfig& ensemble, double t_i) {
  const double p_g = mean_population(spec, sensor, t_i);
  const double p_0 = mean_population(with_separation(spec, 0.0), sensor, t_i);
  const double signal = signal_direction(spec, sensor) * (p_g - p_0);
  const double sd = std::sqrt(qpn_variance(p_g, ensemble));
  if (sd == 0.0) return signal > 0 ? kInf : 0.0;
  return signal / sd;
}

SensitivityResult gmin_root_found(const SignalSpec& family, const SensorModel& sensor,
                                  const EnsembleConfig& ensemble, double t_i) {
  validate(sensor);
  validate(ensemble);
  if (!(t_i > 0)) throw std::invalid_argument("gmin_root_found: t_i must be > 0");

  auto snr_minus_one = [&](double g) {
    return exact_snr(with_separation(family, g), sensor, ensemble, t_i) - 1.0;
  };

  SensitivityResult r;
  r.method = SensitivityMethod::kRootFound;
  r.sensor = sensor;
  r.ensemble = ensemble;
  r.t_i = t_i;
  r.contrast = contrast(sensor, t_i);
  if (const auto* tones = tones_of(family)) r.tones = *tones;

  const double ceiling = search_ceiling(family, t_i);
  double prev = ceiling * 0x1.0p-50;
  r.g_min = kInf;
  if (snr_minus_one(prev) >= 0) {
    r.g_min = prev;
  } else {
    for (double g = 2.0 * prev; g <= ceiling * (1.0 + 1e-12); g *= 2.0) {
      if (snr_minus_one(g) >= 0) {
        r.g_min = find_root(snr_minus_one, prev, g);
        break;
      }
      prev = g;
    }
  }
  r.valid = small_signal(family, r.g_min, t_i);
  return r;
}

SensitivityResult gmin_monte_carlo(const SignalSpec& family, const SensorModel& sensor,
                                   const EnsembleConfig& ensemble, double t_i,
                                   const MonteCarloCrossing& options) {
  validate(sensor);
  validate(ensemble);
  if (!(options.rel_tol > 0)) throw std::invalid_argument("gmin_monte_carlo: rel_tol must be > 0");
  const EnsembleConfig sim{options.shots, ensemble.sensors};
  const double nm = ensemble.total();
  const double direction = signal_direction(family, sensor);

  auto simulated_p = [&](double g) {
    return estimate_population(simulate_shots(with_separation(family, g), sensor, sim, t_i, options.key)).p_hat;
  };
  const double p0 = simulated_p(0.0);
  auto crosses = [&](double g) {
    const double p = simulated_p(g);
    const double signal = direction * (p - p0);
    return signal > 0 && signal * signal >= p * (1.0 - p) / nm;
  };

  SensitivityResult r;
  r.method = SensitivityMethod::kMonteCarlo;
  r.sensor = sensor;
  r.ensemble = ensemble;
  r.t_i = t_i;
  r.contrast = contrast(sensor, t_i);
  if (const auto* tones = tones_of(family)) r.tones = *tones;
  r.g_min = kInf;

  double hi = search_ceiling(family, t_i);
  if (!crosses(hi)) return r;
  double lo = 0.5 * hi;
  for (int i = 0; i < 60 && crosses(lo); ++i) {
    hi = lo;
    lo *= 0.5;
  }
  while (hi / lo > 1.0 + options.rel_tol) {
    const double mid = std::sqrt(lo * hi);
    (crosses(mid) ? hi : lo) = mid;
  }
  r.g_min = std::sqrt(lo * hi);
  r.valid = small_signal(family, r.g_min, t_i);
  return r;
}

std::vector<SnrPoint> snr_curve(const SignalSpec& spec, const SensorModel& sensor,
                                const EnsembleConfig& ensemble, std::span<const double> t_grid) {
  std::vector<SnrPoint> out;
  out.reserve(t_grid.size());
  for (double t : t_grid) out.push_back({t, exact_snr(spec, sensor, ensemble, t)});
  return out;
}

std::vector<SnrPoint> snr_curve_monte_carlo(const SignalSpec& spec, const SensorModel& sensor,
                                            const EnsembleConfig& ensemble, std::span<const double> t_grid,
                                            const SnrMonteCarlo& options) {
  validate(ensemble);
  const EnsembleConfig sim{options.shots, options.sensors};
  const SignalSpec zero = with_separation(spec, 0.0);
  const double direction = signal_direction(spec, sensor);
  std::vector<SnrPoint> out(t_grid.size());
  parallel_for(t_grid.size(), options.threads, [&](std::size_t i) {
    const double t = t_grid[i];
    const double p_g = estimate_population(simulate_shots(spec, sensor, sim, t, options.key)).p_hat;
    const double p_0 = estimate_population(simulate_shots(zero, sensor, sim, t, options.key)).p_hat;
    const double sd = std::sqrt(qpn_variance(p_g, ensemble));
    const double signal = direction * (p_g - p_0);
    out[i] = {t, sd > 0 ? signal / sd : 0.0};
  });
  return out;
}

OptimalTime optimal_integration_time(OptimizationTarget target, const SensorModel& sensor,
                                     const EnsembleConfig& ensemble, const std::optional<TwoTone>& tones) {
  validate(sensor);
  validate(ensemble);
  const double t_max = kBracketT2 * sensor.t2;
  const double tol = 1e-7 * sensor.t2;

  if (target == OptimizationTarget::kConstant || target == OptimizationTarget::kVariance) {
    auto f = [&](double t) {
      return target == OptimizationTarget::kConstant ? gmin_constant(sensor, ensemble, t).g_min
                                                     : gmin_variance(sensor, ensemble, t).g_min;
    };
    const auto m = golden_section_minimize(f, 1e-6 * sensor.t2, t_max, tol);
    return {m.x, m.value, m.at_bracket_edge};
  }

  if (!tones) throw std::invalid_argument("optimal_integration_time: two-tone target needs tones");
  const SignalSpec family = TwoToneStochastic{*tones};
  auto f = [&](double t) { return gmin_root_found(family, sensor, ensemble, t).g_min; };
  const double period = tones->period();
  const auto n_max = static_cast<std::int64_t>(std::floor(t_max / period * (1.0 + 1e-12)));
  if (n_max < 1) {
    const auto m = golden_section_minimize(f, 1e-6 * sensor.t2, t_max, tol);
    return {m.x, m.value, m.at_bracket_edge};
  }
  std::int64_t best_n = 1;
  double best = kInf;
  for (std::int64_t n = 1; n <= n_max; ++n) {
    const double v = f(static_cast<double>(n) * period);
    if (v < best) {
      best = v;
      best_n = n;
    }
  }
  const double centre = static_cast<double>(best_n) * period;
  const double lo = std::max(centre - 0.25 * period, 1e-6 * sensor.t2);
  const double hi = std::min(centre + 0.25 * period, t_max);
  auto m = golden_section_minimize(f, lo, hi, std::min(tol, 1e-4 * period));
  if (!(m.value < best)) m = {centre, best, false};
  return {m.x, m.value, t_max - m.x < 2.0 * tol};
}

double compensation_sensors_real(Scenario scenario, double fidelity, const CompensationReference& ref) {
  check_reference(fidelity, ref);
  const double n = static_cast<double>(ref.shots);
  if (scenario == Scenario::kIntermittent) {
    const double x_ref =
        gaussian_kernel_gmin_squared(gaussian_contrast(1.0, ref.t1_over_t2), n, 1.0);
    return gaussian_kernel_required_nm(gaussian_contrast(fidelity, ref.t1_over_t2), x_ref) / n;
  }
  if (scenario == Scenario::kConstant) {
    const double target = best_constant(1.0, n);
    // g_min scales as (NM)^{-1/2} at fixed t, so the optimum scales the same way.
    const double ratio = best_constant(fidelity, n) / target;
    return ratio * ratio;
  }
  const double target = std::log(best_variance(1.0, n));
  auto f = [&](double log_m) { return std::log(best_variance(fidelity, n * std::exp(log_m))) - target; };
  return std::exp(find_root(f, std::log(1e-6), std::log(1e15), 40));
}

std::int64_t compensation_sensors(Scenario scenario, double fidelity, const CompensationReference& ref) {
  check_reference(fidelity, ref);
  const double n = static_cast<double>(ref.shots);
  const double target = best_gmin(scenario, 1.0, n, ref.t1_over_t2) * (1.0 + kBoundaryTolerance);
  auto enough = [&](std::int64_t m) {
    return best_gmin(scenario, fidelity, n * static_cast<double>(m), ref.t1_over_t2) <= target;
  };
  if (enough(1)) return 1;
  std::int64_t hi = 2;
  while (!enough(hi)) {
    if (hi > (std::int64_t{1} << 60)) throw std::overflow_error("compensation_sensors: no finite M");
    hi *= 2;
  }
  std::int64_t lo = hi / 2;  // fails
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    (enough(mid) ? hi : lo) = mid;
  }
  return hi;
}

double excess_sensors(double fidelity, double t1_over_t2, std::int64_t shots) {
  if (!(t1_over_t2 > 0 && t1_over_t2 <= kBracketT2))
    throw std::invalid_argument("excess_sensors: t1/T2 must be in (0, 5]");
  const CompensationReference ref{shots, t1_over_t2};
  return compensation_sensors_real(Scenario::kIntermittent, fidelity, ref) /
         compensation_sensors_real(Scenario::kVariance, fidelity, ref);
}

}  // namespace qsense
