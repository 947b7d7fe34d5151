#include "qsense/signal_model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace qsense {
namespace {

// Relative slack when comparing durations that are computed two ways
// (e.g. t_sig = 2 * period vs. 4 pi / omega_s).
constexpr double kDurationSlack = 1e-12;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

void validate_tones(const TwoTone& t) {
  require(std::isfinite(t.omega_s) && t.omega_s > 0, "two-tone signal: omega_s must be > 0");
  require(std::isfinite(t.sigma) && t.sigma > 0, "two-tone signal: sigma must be > 0");
  require(std::isfinite(t.g) && t.g >= 0, "two-tone signal: g must be >= 0");
}

// (1 - cos wt)/w and sin(wt)/w, continuous through w = 0.
struct ToneKernels {
  double cos_part;
  double sin_part;
};

ToneKernels tone_kernels(double omega, double t) {
  const double x = omega * t;
  if (std::abs(x) < 1e-8) return {omega * t * t / 2.0, t};
  const double s = std::sin(x / 2.0);
  return {2.0 * s * s / omega, std::sin(x) / omega};
}

double tone_variance(double omega, double t) {
  const double x = omega * t;
  if (std::abs(x) < 1e-8) return t * t;
  const double s = std::sin(x / 2.0);
  return 4.0 * s * s / (omega * omega);
}

double two_tone_phase(const TwoTone& tones, const SignalRealization& r, double t) {
  const auto k1 = tone_kernels(tones.omega_1(), t);
  const auto k2 = tone_kernels(tones.omega_2(), t);
  return r.coeff[0] * k1.cos_part + r.coeff[1] * k1.sin_part + r.coeff[2] * k2.cos_part +
         r.coeff[3] * k2.sin_part;
}

SignalRealization sample_two_tone(const TwoTone& tones, ShotRng& rng) {
  SignalRealization r;
  r.size = 4;
  for (auto& c : r.coeff) c = tones.sigma * rng.normal();
  return r;
}

}  // namespace

std::string_view to_string(ToneConvention c) {
  return c == ToneConvention::kHalfSplit ? "half_split" : "paper_exponent";
}

ToneConvention parse_tone_convention(std::string_view s) {
  if (s == "half_split") return ToneConvention::kHalfSplit;
  if (s == "paper_exponent") return ToneConvention::kPaperExponent;
  throw std::invalid_argument("unknown tone convention: " + std::string(s));
}

void validate(const SignalSpec& spec) {
  std::visit(Overloaded{
                 [](const Constant& c) {
                   require(std::isfinite(c.g) && c.g >= 0, "constant signal: g must be >= 0");
                 },
                 [](const StochasticAmplitude& s) {
                   require(std::isfinite(s.g) && s.g >= 0, "stochastic signal: g must be >= 0");
                 },
                 [](const TwoToneStochastic& s) { validate_tones(s.tones); },
                 [](const IntermittentTwoTone& s) {
                   validate_tones(s.tones);
                   require(std::isfinite(s.t_sig) && s.t_sig > 0,
                           "intermittent signal: t_sig must be > 0");
                   require(s.t_sig <= 2.0 * s.tones.period() * (1.0 + kDurationSlack),
                           "intermittent signal: burst longer than two centre periods");
                 },
             },
             spec);
}

double separation(const SignalSpec& spec) noexcept {
  return std::visit(Overloaded{
                        [](const Constant& c) { return c.g; },
                        [](const StochasticAmplitude& s) { return s.g; },
                        [](const TwoToneStochastic& s) { return s.tones.g; },
                        [](const IntermittentTwoTone& s) { return s.tones.g; },
                    },
                    spec);
}

SignalSpec with_separation(const SignalSpec& spec, double g) {
  SignalSpec out = spec;
  std::visit(Overloaded{
                 [g](Constant& c) { c.g = g; },
                 [g](StochasticAmplitude& s) { s.g = g; },
                 [g](TwoToneStochastic& s) { s.tones.g = g; },
                 [g](IntermittentTwoTone& s) { s.tones.g = g; },
             },
             out);
  return out;
}

std::string_view signal_kind(const SignalSpec& spec) noexcept {
  return std::visit(Overloaded{
                        [](const Constant&) { return std::string_view{"constant"}; },
                        [](const StochasticAmplitude&) { return std::string_view{"stochastic_amplitude"}; },
                        [](const TwoToneStochastic&) { return std::string_view{"two_tone"}; },
                        [](const IntermittentTwoTone&) { return std::string_view{"intermittent_two_tone"}; },
                    },
                    spec);
}

SignalRealization sample_realization(const SignalSpec& spec, ShotRng& rng) {
  return std::visit(Overloaded{
                        [](const Constant&) { return SignalRealization{}; },
                        [&rng](const StochasticAmplitude& s) {
                          SignalRealization r;
                          r.size = 1;
                          r.coeff[0] = s.g * rng.normal();
                          return r;
                        },
                        [&rng](const TwoToneStochastic& s) { return sample_two_tone(s.tones, rng); },
                        [&rng](const IntermittentTwoTone& s) { return sample_two_tone(s.tones, rng); },
                    },
                    spec);
}

double accrued_phase(const SignalSpec& spec, const SignalRealization& realization, double t_i) {
  if (!(t_i > 0) || !std::isfinite(t_i)) throw std::invalid_argument("accrued_phase: t_i must be > 0");
  return std::visit(
      Overloaded{
          [t_i](const Constant& c) { return c.g * t_i; },
          [&](const StochasticAmplitude&) { return realization.coeff[0] * t_i; },
          [&](const TwoToneStochastic& s) { return two_tone_phase(s.tones, realization, t_i); },
          [&](const IntermittentTwoTone& s) {
            if (t_i > s.t_sig * (1.0 + kDurationSlack))
              throw std::invalid_argument("accrued_phase: t_i exceeds the burst duration");
            return two_tone_phase(s.tones, realization, t_i);
          },
      },
      spec);
}

double phase_variance_exact(const TwoTone& tones, double t_i) {
  if (!(t_i > 0)) throw std::invalid_argument("phase_variance_exact: t_i must be > 0");
  return tones.sigma * tones.sigma *
         (tone_variance(tones.omega_1(), t_i) + tone_variance(tones.omega_2(), t_i));
}

double small_g_phase_curvature(const TwoTone& tones, int periods) {
  if (periods < 1) throw std::invalid_argument("small_g_phase_curvature: periods must be >= 1");
  const double scale = tones.convention == ToneConvention::kHalfSplit ? 0.5 : 1.0;
  const double n = periods;
  const double w2 = tones.omega_s * tones.omega_s;
  return 8.0 * kPi * kPi * n * n * tones.sigma * tones.sigma * scale * scale / (w2 * w2);
}

}  // namespace qsense
