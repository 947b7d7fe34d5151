#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "qsense/random.hpp"
#include "qsense/sensor_physics.hpp"

using namespace qsense;

TEST_CASE("contrast decays as a Gaussian from F") {
  CHECK(contrast({0.9, 1.0, 0.0}, 0.0) == 0.9);
  CHECK(contrast({1.0, 1.0, 0.0}, 1.0) == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
  CHECK(contrast({0.91, 7.97e-3, 0.0}, 0.5e-3) == doctest::Approx(0.9082).epsilon(5e-5));
  CHECK_THROWS_AS(contrast({1.0, 1.0, 0.0}, -1.0), std::invalid_argument);
}

TEST_CASE("contrast is non-increasing and factorises from F") {
  double prev = 2.0;
  for (int k = 0; k <= 100; ++k) {
    const double t = 0.05 * k;
    const double c = contrast({0.7, 1.3, 0.0}, t);
    CHECK(c <= prev);
    CHECK(c > 0.0);
    CHECK(contrast({0.7, 1.3, 0.0}, t) / 0.7 == doctest::Approx(contrast({0.2, 1.3, 0.0}, t) / 0.2));
    prev = c;
  }
}

TEST_CASE("sensor and ensemble validation") {
  CHECK_THROWS_AS(validate(SensorModel{0.0, 1.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(validate(SensorModel{1.1, 1.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(validate(SensorModel{1.0, 0.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(validate(EnsembleConfig{0, 1}), std::invalid_argument);
  CHECK_THROWS_AS(validate(EnsembleConfig{1, 0}), std::invalid_argument);
}

TEST_CASE("excitation probability examples") {
  CHECK(excitation_probability({0.8, 1.0, kPi / 2}, 0.0, 0.0) == doctest::Approx(0.5));
  const double c = 0.903;
  CHECK(excitation_probability({c, 1e9, 0.0}, 0.0, 0.0) == doctest::Approx(0.0485));
  CHECK(excitation_probability({c, 1e9, 0.0}, 0.0, kPi) == doctest::Approx((1 + c) / 2));
}

TEST_CASE("excitation probability: phase additivity and range") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 500; ++k) {
    const double theta = kTwoPi * u(gen);
    const double phi = 10.0 * (u(gen) - 0.5);
    const SensorModel s{0.1 + 0.9 * u(gen), 1.0, theta};
    const double t = 2.0 * u(gen);
    const double p = excitation_probability(s, t, phi);
    CHECK(p == doctest::Approx(excitation_probability({s.fidelity, s.t2, theta + phi}, t, 0.0)).epsilon(1e-12));
    const double c = contrast(s, t);
    CHECK(p >= (1 - c) / 2 - 1e-15);
    CHECK(p <= (1 + c) / 2 + 1e-15);
  }
}

TEST_CASE("QPN variance") {
  CHECK(qpn_variance(0.5, {1000, 1}) == doctest::Approx(2.5e-4));
  CHECK(qpn_variance(0.0, {17, 3}) == 0.0);
  CHECK(qpn_variance(1.0, {17, 3}) == 0.0);
  CHECK(qpn_variance(0.0485, {1000, 1}) == doctest::Approx(4.615e-5).epsilon(1e-3));
  for (double p = 0.0; p <= 1.0; p += 0.01) {
    CHECK(qpn_variance(p, {10, 10}) == doctest::Approx(qpn_variance(1 - p, {10, 10})));
    CHECK(qpn_variance(p, {10, 10}) <= qpn_variance(0.5, {10, 10}));
  }
  CHECK_THROWS_AS(qpn_variance(1.2, {1, 1}), std::invalid_argument);
}

TEST_CASE("mean population closed forms") {
  const SensorModel s{0.9, 0.01, 0.0};
  const double t = 0.004;
  const double c = contrast(s, t);
  SUBCASE("stochastic amplitude carries exp(-g^2 t^2 / 2)") {
    const double g = 150.0;
    CHECK(mean_population(StochasticAmplitude{g}, s, t) ==
          doctest::Approx(0.5 * (1 - c * std::exp(-g * g * t * t / 2))).epsilon(1e-14));
  }
  SUBCASE("g = 0 at theta = 0 gives (1 - C)/2 for every class") {
    const TwoTone tones{kTwoPi * 250.0, 0.0, 40.0};
    CHECK(mean_population(Constant{0.0}, s, t) == doctest::Approx((1 - c) / 2));
    CHECK(mean_population(StochasticAmplitude{0.0}, s, t) == doctest::Approx((1 - c) / 2));
    CHECK(mean_population(TwoToneStochastic{tones}, s, tones.period()) ==
          doctest::Approx((1 - contrast(s, tones.period())) / 2).epsilon(1e-12));
    CHECK(mean_population(IntermittentTwoTone{tones, tones.period()}, s, tones.period()) ==
          doctest::Approx((1 - contrast(s, tones.period())) / 2).epsilon(1e-12));
  }
  SUBCASE("constant signal: (1 - C cos(theta + g t))/2") {
    const SensorModel q{0.8, 0.01, kPi / 2};
    CHECK(mean_population(Constant{50.0}, q, t) ==
          doctest::Approx(0.5 * (1 - contrast(q, t) * std::cos(kPi / 2 + 50.0 * t))));
  }
}

TEST_CASE("intermittent mean population approaches the small-g Gaussian form") {
  const double omega_s = kTwoPi * 2000.0;
  const double sigma = kTwoPi * 275.0;
  const SensorModel s{0.91, 7.97e-3, 0.0};
  for (double frac : {1e-4, 1e-3, 3e-3, 1e-2}) {
    const double g = omega_s * frac;
    const TwoTone tones{omega_s, g, sigma};
    const double t1 = tones.period();
    const double ct = contrast(s, t1);
    const double kappa = 4.0 * kPi * kPi * sigma * sigma / std::pow(omega_s, 4);
    const double gaussian = 0.5 * (1 - ct * std::exp(-kappa * g * g));
    CHECK(std::abs(mean_population(IntermittentTwoTone{tones, t1}, s, t1) / gaussian - 1.0) < 1e-4);
  }
  CHECK_THROWS_AS(mean_population(IntermittentTwoTone{{omega_s, 0.0, sigma}, 0.4e-3}, s, 0.5e-3),
                  std::invalid_argument);
}

TEST_CASE("two-tone mean population matches realization averages on a 20-point grid") {
  // Monte-Carlo average of the excitation probability over 1e6 realizations.
  const TwoTone base{kTwoPi * 1000.0, 0.0, kTwoPi * 300.0};
  const SensorModel s{0.95, 5e-3, 0.3};
  int outside = 0;
  for (int i = 0; i < 20; ++i) {
    TwoTone tones = base;
    tones.g = kTwoPi * (20.0 + 40.0 * (i % 5));
    const double t = base.period() * (0.25 + 0.45 * (i / 5));
    const SignalSpec spec = TwoToneStochastic{tones};
    const int n = 1000000;
    double s1 = 0.0, s2 = 0.0;
    for (int k = 0; k < n; ++k) {
      ShotRng rng({77, 1, static_cast<std::uint64_t>(i)}, k);
      const double p = excitation_probability(s, t, accrued_phase(spec, sample_realization(spec, rng), t));
      s1 += p;
      s2 += p * p;
    }
    const double mean = s1 / n;
    const double se = std::sqrt((s2 / n - mean * mean) / n);
    if (std::abs(mean - mean_population(spec, s, t)) > 3.0 * se) ++outside;
  }
  // 3 sigma per point; at most one excursion over 20 points (p ~ 0.999).
  CHECK(outside <= 1);
}

TEST_CASE("effective coherence time") {
  const SensorModel s{1.0, 7.97e-3, 0.0};
  CHECK(effective_coherence_time(s, 0.0) == doctest::Approx(s.t2));
  CHECK(effective_coherence_time(s, 1.0 / s.t2) == doctest::Approx(s.t2 / std::sqrt(2.0)));
  CHECK(effective_coherence_time(s, kTwoPi * 275.0) == doctest::Approx(5.50e-4).epsilon(2e-3));
}
