#pragma once

#include <array>
#include <cstddef>
#include <string_view>
#include <variant>

#include "qsense/random.hpp"

namespace qsense {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;
inline constexpr double kPi = kTwoPi / 2.0;

/// How the tone separation g maps onto the two tone frequencies
/// omega_s +/- delta.
///
/// kHalfSplit:    delta = g / 2, so g = omega_1 - omega_2 literally.
/// kPaperExponent: delta = g, which makes the small-g Gaussian exponent at
///                 one centre period equal 4 pi^2 sigma^2 g^2 / omega_s^4.
enum class ToneConvention { kHalfSplit, kPaperExponent };

std::string_view to_string(ToneConvention c);
ToneConvention parse_tone_convention(std::string_view s);

/// Deterministic shift B(t) = g (rad/s).
struct Constant {
  double g = 0.0;
};

/// Shift B_s frozen within a shot, drawn from N(0, g^2) across shots.
struct StochasticAmplitude {
  double g = 0.0;
};

/// Parameters shared by the two-tone signal classes. All in rad/s.
struct TwoTone {
  double omega_s = 0.0;
  double g = 0.0;
  double sigma = 0.0;
  ToneConvention convention = ToneConvention::kPaperExponent;

  double tone_offset() const noexcept {
    return convention == ToneConvention::kHalfSplit ? 0.5 * g : g;
  }
  double omega_1() const noexcept { return omega_s + tone_offset(); }
  double omega_2() const noexcept { return omega_s - tone_offset(); }
  double period() const noexcept { return kTwoPi / omega_s; }
};

/// A1 sin w1 t + B1 cos w1 t + A2 sin w2 t + B2 cos w2 t with i.i.d.
/// N(0, sigma^2) quadrature amplitudes per shot.
struct TwoToneStochastic {
  TwoTone tones;
};

/// Two-tone signal present only for a burst of length t_sig starting with
/// the Ramsey sequence. Bursts are limited to two centre periods.
struct IntermittentTwoTone {
  TwoTone tones;
  double t_sig = 0.0;
};

using SignalSpec = std::variant<Constant, StochasticAmplitude, TwoToneStochastic, IntermittentTwoTone>;

/// Throws std::invalid_argument if a field violates its domain.
void validate(const SignalSpec& spec);

double separation(const SignalSpec& spec) noexcept;

/// Copy of spec with the separation / amplitude parameter replaced.
SignalSpec with_separation(const SignalSpec& spec, double g);

std::string_view signal_kind(const SignalSpec& spec) noexcept;

/// Per-shot sampled coefficients: {B_s} or {A1, B1, A2, B2}; empty for
/// Constant.
struct SignalRealization {
  std::array<double, 4> coeff{};
  std::size_t size = 0;
};

SignalRealization sample_realization(const SignalSpec& spec, ShotRng& rng);

/// Exact phase integral of B(t) over [0, t_i]. Rejects t_i beyond an
/// intermittent burst.
double accrued_phase(const SignalSpec& spec, const SignalRealization& realization, double t_i);

/// Var of the accrued phase over realizations; exact since the phase is a
/// linear functional of Gaussian coefficients.
double phase_variance_exact(const TwoTone& tones, double t_i);

/// Coefficient c in Var(phi) ~ c g^2 for small g, at t_i = periods * 2pi/omega_s.
double small_g_phase_curvature(const TwoTone& tones, int periods = 1);

}  // namespace qsense
