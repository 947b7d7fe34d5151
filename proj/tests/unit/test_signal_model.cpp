#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <random>
#include <stdexcept>

#include "qsense/random.hpp"
#include "qsense/signal_model.hpp"

using namespace qsense;

namespace {

// Time-domain field of a two-tone realization.
double field(const TwoTone& tones, const SignalRealization& r, double t) {
  const double w1 = tones.omega_1();
  const double w2 = tones.omega_2();
  return r.coeff[0] * std::sin(w1 * t) + r.coeff[1] * std::cos(w1 * t) + r.coeff[2] * std::sin(w2 * t) +
         r.coeff[3] * std::cos(w2 * t);
}

// Variance written as the sum of squared sine/cosine integrals.
double variance_oracle(const TwoTone& tones, double t) {
  double v = 0.0;
  for (double w : {tones.omega_1(), tones.omega_2()}) {
    const double a = (1.0 - std::cos(w * t)) / w;
    const double b = std::sin(w * t) / w;
    v += a * a + b * b;
  }
  return tones.sigma * tones.sigma * v;
}

}  // namespace

TEST_CASE("tone conventions place the tones at omega_s +/- delta") {
  const TwoTone exponent{100.0, 10.0, 1.0, ToneConvention::kPaperExponent};
  CHECK(exponent.omega_1() == 110.0);
  CHECK(exponent.omega_2() == 90.0);
  const TwoTone half{100.0, 10.0, 1.0, ToneConvention::kHalfSplit};
  CHECK(half.omega_1() - half.omega_2() == doctest::Approx(10.0));
  CHECK(parse_tone_convention(to_string(ToneConvention::kHalfSplit)) == ToneConvention::kHalfSplit);
  CHECK_THROWS_AS(parse_tone_convention("other"), std::invalid_argument);
}

TEST_CASE("validate rejects out-of-domain specs") {
  const TwoTone tones{kTwoPi * 1000.0, 0.0, 1.0};
  CHECK_NOTHROW(validate(SignalSpec{IntermittentTwoTone{tones, 2.0 * tones.period()}}));
  CHECK_THROWS_AS(validate(SignalSpec{IntermittentTwoTone{tones, 2.01 * tones.period()}}), std::invalid_argument);
  CHECK_THROWS_AS(validate(SignalSpec{Constant{-1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(validate(SignalSpec{TwoToneStochastic{{0.0, 1.0, 1.0}}}), std::invalid_argument);
  CHECK_THROWS_AS(validate(SignalSpec{TwoToneStochastic{{1.0, 1.0, 0.0}}}), std::invalid_argument);
}

TEST_CASE("separation accessors") {
  const SignalSpec s = IntermittentTwoTone{{10.0, 2.0, 1.0}, 0.5};
  CHECK(separation(s) == 2.0);
  CHECK(separation(with_separation(s, 3.0)) == 3.0);
  CHECK(std::get<IntermittentTwoTone>(with_separation(s, 3.0)).t_sig == 0.5);
  CHECK(signal_kind(s) == "intermittent_two_tone");
  CHECK(signal_kind(SignalSpec{Constant{1.0}}) == "constant");
}

TEST_CASE("constant signal has an empty realization and phase g t") {
  ShotRng rng({1, 2, 3}, 0);
  const SignalSpec s = Constant{1.5};
  const auto r = sample_realization(s, rng);
  CHECK(r.size == 0);
  CHECK(accrued_phase(s, r, 2.0) == 3.0);
}

TEST_CASE("stochastic amplitude draws are zero-mean with standard deviation g") {
  const double g = 3.0;
  const SignalSpec s = StochasticAmplitude{g};
  double sum = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    ShotRng rng({11, 0, 0}, i);
    sum += sample_realization(s, rng).coeff[0];
  }
  CHECK(std::abs(sum / n) < 4.0 * g / 1e3);
}

TEST_CASE("two-tone coefficients have variance sigma^2") {
  const double sigma = 2.5;
  const SignalSpec s = TwoToneStochastic{{100.0, 1.0, sigma}};
  double s1 = 0.0, s2 = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    ShotRng rng({12, 0, 0}, i);
    const double a1 = sample_realization(s, rng).coeff[0];
    s1 += a1;
    s2 += a1 * a1;
  }
  const double var = s2 / n - (s1 / n) * (s1 / n);
  CHECK(var == doctest::Approx(sigma * sigma).epsilon(0.01));
}

TEST_CASE("zero coefficients accrue no phase") {
  const SignalSpec s = TwoToneStochastic{{100.0, 5.0, 1.0}};
  CHECK(accrued_phase(s, SignalRealization{{0, 0, 0, 0}, 4}, 0.3) == 0.0);
}

TEST_CASE("accrued phase matches Gauss-Kronrod quadrature on 1000 random cases") {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n01;
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const double omega_s = kTwoPi * std::pow(10.0, 1.0 + 3.0 * u(gen));
    const auto conv = k % 2 ? ToneConvention::kHalfSplit : ToneConvention::kPaperExponent;
    const TwoTone tones{omega_s, omega_s * u(gen), omega_s * (0.05 + u(gen)), conv};
    const double t_sig = 2.0 * tones.period() * (0.05 + 0.95 * u(gen));
    const double t = t_sig * (0.01 + 0.99 * u(gen));
    SignalRealization r{{}, 4};
    for (auto& c : r.coeff) c = tones.sigma * n01(gen);

    const double exact = accrued_phase(SignalSpec{IntermittentTwoTone{tones, t_sig}}, r, t);
    const auto f = [&](double x) { return field(tones, r, x); };
    const double quad = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, t, 5, 1e-13);
    // Bound on the integral of |B| over [0, t].
    double scale = 0.0;
    for (double c : r.coeff) scale += std::abs(c) * t;
    worst = std::max(worst, std::abs(exact - quad) / scale);
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("accrued phase is linear in the realization") {
  const SignalSpec s = TwoToneStochastic{{kTwoPi * 100.0, 7.0, 30.0}};
  ShotRng rng({5, 5, 5}, 0);
  const auto r = sample_realization(s, rng);
  for (double alpha : {-2.0, 0.5, 3.0}) {
    SignalRealization scaled = r;
    for (auto& c : scaled.coeff) c *= alpha;
    CHECK(accrued_phase(s, scaled, 0.004) == doctest::Approx(alpha * accrued_phase(s, r, 0.004)).epsilon(1e-13));
  }
}

TEST_CASE("intermittent phase is rejected beyond the burst") {
  const TwoTone tones{kTwoPi * 1000.0, 0.0, 1.0};
  const SignalSpec s = IntermittentTwoTone{tones, 0.5e-3};
  SignalRealization r{{1, 1, 1, 1}, 4};
  CHECK_NOTHROW(accrued_phase(s, r, 0.5e-3));
  CHECK_THROWS_AS(accrued_phase(s, r, 0.6e-3), std::invalid_argument);
  CHECK_THROWS_AS(accrued_phase(s, r, 0.0), std::invalid_argument);
}

TEST_CASE("phase variance agrees with the squared-integral form") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const double omega_s = kTwoPi * std::pow(10.0, 1.0 + 3.0 * u(gen));
    const TwoTone tones{omega_s, 0.9 * omega_s * u(gen), omega_s * u(gen) + 1.0,
                        k % 2 ? ToneConvention::kHalfSplit : ToneConvention::kPaperExponent};
    const double t = 2.0 * tones.period() * (0.01 + u(gen));
    CHECK(phase_variance_exact(tones, t) == doctest::Approx(variance_oracle(tones, t)).epsilon(1e-9));
  }
}

TEST_CASE("phase variance vanishes at whole periods when g = 0") {
  const TwoTone tones{kTwoPi * 2000.0, 0.0, kTwoPi * 275.0};
  const double scale = tones.sigma * tones.sigma * tones.period() * tones.period();
  for (int n = 1; n <= 6; ++n) CHECK(phase_variance_exact(tones, n * tones.period()) < 1e-24 * scale);
}

TEST_CASE("phase variance matches the sample variance of accrued phases") {
  const TwoTone tones{kTwoPi * 1000.0, kTwoPi * 150.0, kTwoPi * 400.0};
  const SignalSpec s = TwoToneStochastic{tones};
  const double t = 0.73e-3;
  double s1 = 0.0, s2 = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    ShotRng rng({99, 0, 0}, i);
    const double phi = accrued_phase(s, sample_realization(s, rng), t);
    s1 += phi;
    s2 += phi * phi;
  }
  const double mean = s1 / n;
  const double var = s2 / n - mean * mean;
  const double expected = phase_variance_exact(tones, t);
  CHECK(std::abs(mean) < 5.0 * std::sqrt(expected / n));
  CHECK(var == doctest::Approx(expected).epsilon(0.01));
}

TEST_CASE("small-g curvature of the exact variance") {
  const double omega_s = kTwoPi * 2000.0;
  const double sigma = kTwoPi * 275.0;
  const double g = omega_s / 1e4;
  const double w4 = std::pow(omega_s, 4);
  SUBCASE("PaperExponent convention: 8 pi^2 sigma^2 / omega_s^4") {
    const TwoTone tones{omega_s, g, sigma, ToneConvention::kPaperExponent};
    const double curvature = phase_variance_exact(tones, tones.period()) / (g * g);
    CHECK(std::abs(curvature / (8.0 * kPi * kPi * sigma * sigma / w4) - 1.0) < 1e-6);
    CHECK(small_g_phase_curvature(tones) == doctest::Approx(curvature).epsilon(1e-6));
  }
  SUBCASE("half split: a quarter of that") {
    const TwoTone tones{omega_s, g, sigma, ToneConvention::kHalfSplit};
    const double curvature = phase_variance_exact(tones, tones.period()) / (g * g);
    CHECK(std::abs(curvature / (2.0 * kPi * kPi * sigma * sigma / w4) - 1.0) < 1e-6);
  }
  SUBCASE("n periods scale as n^2") {
    const TwoTone tones{omega_s, g, sigma};
    const double curvature = phase_variance_exact(tones, 3 * tones.period()) / (g * g);
    CHECK(small_g_phase_curvature(tones, 3) == doctest::Approx(curvature).epsilon(1e-6));
  }
}

TEST_CASE("phase variance at one period is increasing in g below omega_s") {
  for (auto conv : {ToneConvention::kPaperExponent, ToneConvention::kHalfSplit}) {
    TwoTone tones{kTwoPi * 2000.0, 0.0, kTwoPi * 275.0, conv};
    const double limit = conv == ToneConvention::kHalfSplit ? 2.0 * tones.omega_s : tones.omega_s;
    double prev = -1.0;
    for (int k = 0; k <= 1000; ++k) {
      tones.g = limit * k / 1000.0;
      const double v = phase_variance_exact(tones, tones.period());
      CHECK(v > prev);
      prev = v;
    }
  }
}
