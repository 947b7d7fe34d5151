#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "qsense/random.hpp"
#include "qsense/sensor_physics.hpp"
#include "qsense/signal_model.hpp"

namespace qsense {

enum class SensitivityMethod { kClosedForm, kRootFound, kMonteCarlo };

std::string_view to_string(SensitivityMethod m);

/// Smallest resolvable parameter (SNR = 1) and the inputs that produced it.
struct SensitivityResult {
  double g_min = 0.0;
  SensitivityMethod method = SensitivityMethod::kClosedForm;
  SensorModel sensor;
  EnsembleConfig ensemble;
  double t_i = 0.0;
  double contrast = 0.0;
  std::optional<TwoTone> tones;
  /// False when the small-signal expansion behind a closed form does not
  /// hold at g_min: (g_min t_i)^2 >= 0.1, or kappa g_min^2 >= 0.1.
  bool valid = false;
};

inline constexpr double kSmallSignalLimit = 0.1;

/// g_min^2 for a contrast-loss signal dp = C/2 (1 - exp(-kappa g^2)) with
/// QPN variance (1 - C^2 exp(-2 kappa g^2)) / (4NM), from the linearised
/// SNR = 1 quadratic:
///   g_min^2 = [C + sqrt(C^2 + NM (1 - C^2))] / (NM C kappa).
double gaussian_kernel_gmin_squared(double contrast, double nm, double kappa);

/// Required NM for the same kernel to reach kappa g^2 = x at SNR = 1.
double gaussian_kernel_required_nm(double contrast, double x);

/// Amplitude of a constant shift, theta = pi/2: 1 / (sqrt(NM) t_i C(t_i)).
SensitivityResult gmin_constant(const SensorModel& sensor, const EnsembleConfig& ensemble, double t_i);

/// Standard deviation of a zero-mean stochastic shift, kappa = t_i^2 / 2.
SensitivityResult gmin_variance(const SensorModel& sensor, const EnsembleConfig& ensemble, double t_i);

/// Tone separation of an intermittent burst measured at t1 = 2pi/omega_s,
/// kappa from the small-g phase curvature of the tone convention.
SensitivityResult gmin_intermittent(const SensorModel& sensor, const EnsembleConfig& ensemble,
                                    const TwoTone& tones);
/// As above with the contrast at t1 given directly.
SensitivityResult gmin_intermittent(double contrast_t1, const EnsembleConfig& ensemble, const TwoTone& tones);

/// Signed SNR of the signal parameter against the same family at zero:
/// (p(g) - p(0)) / sqrt(qpn(p(g))), positive in the direction the bias
/// phase makes the population move.
double exact_snr(const SignalSpec& spec, const SensorModel& sensor, const EnsembleConfig& ensemble, double t_i);

/// SNR = 1 crossing of exact_snr (no small-signal expansion). The family's own
/// separation value is ignored. g_min is +inf if the family never reaches
/// SNR = 1.
SensitivityResult gmin_root_found(const SignalSpec& family, const SensorModel& sensor,
                                  const EnsembleConfig& ensemble, double t_i);

struct MonteCarloCrossing {
  /// Simulated shots per candidate g (each with the ensemble's M sensors).
  std::int64_t shots = 100000;
  /// Bisection stops when the bracket ratio is below 1 + rel_tol.
  double rel_tol = 0.01;
  StreamKey key;
};

/// SNR = 1 crossing with both populations estimated by simulate_shots.
/// Every candidate reuses one stream, so the estimates are coupled.
SensitivityResult gmin_monte_carlo(const SignalSpec& family, const SensorModel& sensor,
                                   const EnsembleConfig& ensemble, double t_i,
                                   const MonteCarloCrossing& options);

struct SnrPoint {
  double t_i;
  double snr;
};

std::vector<SnrPoint> snr_curve(const SignalSpec& spec, const SensorModel& sensor,
                                const EnsembleConfig& ensemble, std::span<const double> t_grid);

struct SnrMonteCarlo {
  std::int64_t shots = 100000;
  /// Sensors per simulated shot; large values suppress projection noise in
  /// the population estimates.
  std::int64_t sensors = 1000;
  StreamKey key;
  int threads = 1;
};

/// snr_curve with both populations estimated from simulated shots; the
/// noise term still refers to `ensemble`.
std::vector<SnrPoint> snr_curve_monte_carlo(const SignalSpec& spec, const SensorModel& sensor,
                                            const EnsembleConfig& ensemble, std::span<const double> t_grid,
                                            const SnrMonteCarlo& options);

enum class OptimizationTarget { kConstant, kVariance, kContinuousTwoTone };

struct OptimalTime {
  double t_i = 0.0;
  double g_min = 0.0;
  bool at_bracket_edge = false;
};

/// Minimises g_min over t_i in (0, 5 T2]. The two-tone target needs tones
/// and first restricts to whole centre periods.
OptimalTime optimal_integration_time(OptimizationTarget target, const SensorModel& sensor,
                                     const EnsembleConfig& ensemble,
                                     const std::optional<TwoTone>& tones = std::nullopt);

enum class Scenario { kConstant, kVariance, kIntermittent };

std::string_view to_string(Scenario s);

/// Unity-fidelity single-sensor baseline. N is shared by both sides;
/// constant and variance each use their optimal t_i, intermittent uses
/// t1 = t1_over_t2 * T2 on both sides.
struct CompensationReference {
  std::int64_t shots = 1000;
  double t1_over_t2 = 0.1;
};

/// Smallest integer M with g_min(F, M) <= g_min(1, 1), within 1e-9 relative
/// so exact boundaries such as M = 1/F^2 count.
std::int64_t compensation_sensors(Scenario scenario, double fidelity, const CompensationReference& ref);

/// Real-valued M solving g_min(F, M) = g_min(1, 1).
double compensation_sensors_real(Scenario scenario, double fidelity, const CompensationReference& ref);

/// M_ex: real-valued compensation for a burst at t1 divided by the
/// compensation of the continuous (variance) case at its optimal t_i.
double excess_sensors(double fidelity, double t1_over_t2, std::int64_t shots);

}  // namespace qsense
