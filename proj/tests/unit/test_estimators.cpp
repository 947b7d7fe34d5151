#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "qsense/estimators.hpp"
#include "qsense/montecarlo.hpp"

using namespace qsense;

namespace {

PopulationEstimate at(double p) {
  PopulationEstimate e;
  e.p_hat = p;
  return e;
}

const TwoTone kReplicaTones{kTwoPi * 2000.0, 0.0, kTwoPi * 275.0};
const SensorModel kReplicaSensor{0.903 * std::exp(0.5 * std::pow(0.5e-3 / 7.97e-3, 2)), 7.97e-3, 0.0};

IntermittentTwoTone replica_spec(double g = 0.0) {
  TwoTone t = kReplicaTones;
  t.g = g;
  return {t, t.period()};
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

BiasScan exact_scan(std::vector<double> gs, int reps) {
  BiasScan s;
  for (double g : gs) s.rows.push_back({g, std::vector<EstimateOutcome>(reps, EstimateOutcome::Defined(g))});
  return s;
}

}  // namespace

TEST_CASE("amplitude estimator") {
  const SensorModel s{0.9, 1.0, kPi / 2};
  const double t = 0.4;
  CHECK(estimate_amplitude(at(0.5), s, t).g_hat == 0.0);
  CHECK(estimate_amplitude(at(0.5), s, t).defined());
  const double c = contrast(s, t);
  CHECK(estimate_amplitude(at(0.5 * (1 + c) + 1e-9), s, t).status == EstimateStatus::kOutOfDomain);
  CHECK(estimate_amplitude(at(0.49), s, t).status == EstimateStatus::kBelowBaseline);
  CHECK_THROWS_AS(estimate_amplitude(at(0.5), {0.9, 1.0, 0.0}, t), std::invalid_argument);
}

TEST_CASE("variance estimator") {
  const SensorModel s{0.8, 1.0, 0.0};
  const double t = 0.5;
  const double c = contrast(s, t);
  const auto base = estimate_variance(at((1 - c) / 2), s, t);
  CHECK(base.defined());
  CHECK(base.g_hat == 0.0);
  CHECK(estimate_variance(at((1 - c) / 2 - 1e-6), s, t).status == EstimateStatus::kBelowBaseline);
  CHECK(estimate_variance(at(0.5), s, t).status == EstimateStatus::kOutOfDomain);
  CHECK(estimate_variance(at(0.7), s, t).status == EstimateStatus::kOutOfDomain);
  const double x = 0.37;
  CHECK(estimate_variance(at(0.5 * (1 - c * std::exp(-x))), s, t).g_hat ==
        doctest::Approx(std::sqrt(2 * x) / t).epsilon(1e-12));
  CHECK_THROWS_AS(estimate_variance(at(0.3), {0.8, 1.0, kPi / 2}, t), std::invalid_argument);
}

TEST_CASE("frequency-separation estimator") {
  const auto spec = replica_spec();
  const double ct = contrast(kReplicaSensor, spec.t_sig);
  CHECK(estimate_frequency_separation(at((1 - ct) / 2), kReplicaSensor, spec).g_hat == 0.0);
  const double kappa = 0.5 * small_g_phase_curvature(spec.tones);
  const double g0 = kTwoPi * 300.0;
  const auto gl = estimate_frequency_separation(at(0.5 * (1 - ct * std::exp(-kappa * g0 * g0))), kReplicaSensor, spec,
                                                Inversion::kGaussianLimit);
  CHECK(gl.g_hat == doctest::Approx(g0).epsilon(1e-12));
  CHECK_THROWS_AS(invert_frequency_separation(0.1, kReplicaSensor, IntermittentTwoTone{spec.tones, 0.4e-3},
                                              Inversion::kExact),
                  std::invalid_argument);
}

TEST_CASE("round trips on the analytic forward map") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const double t = 0.2 + u(gen);
    const SensorModel amp{0.3 + 0.7 * u(gen), 1.0, kPi / 2};
    const double ga = 0.95 * (kPi / 2) / t * u(gen) + 1e-3;
    const auto ea = estimate_amplitude(at(mean_population(Constant{ga}, amp, t)), amp, t);
    REQUIRE(ea.defined());
    CHECK(std::abs(ea.g_hat / ga - 1) < 1e-10);

    const SensorModel var{0.3 + 0.7 * u(gen), 1.0, k % 2 ? kPi : 0.0};
    const double gv = (0.05 + 3.0 * u(gen)) / t;
    const auto ev = estimate_variance(at(mean_population(StochasticAmplitude{gv}, var, t)), var, t);
    REQUIRE(ev.defined());
    CHECK(std::abs(ev.g_hat / gv - 1) < 1e-10);

    const double gf = kReplicaTones.omega_s * (0.01 + 0.9 * u(gen));
    const auto spec = replica_spec(gf);
    const auto ef =
        estimate_frequency_separation(at(mean_population(spec, kReplicaSensor, spec.t_sig)), kReplicaSensor, spec);
    REQUIRE(ef.defined());
    CHECK(std::abs(ef.g_hat / gf - 1) < 1e-10);
  }
}

TEST_CASE("exclusion consistency and monotonicity over a 10^4-point population grid") {
  const auto spec = replica_spec();
  const double ct = contrast(kReplicaSensor, spec.t_sig);
  const double p_lo = (1 - ct) / 2;
  TwoTone top = spec.tones;
  top.g = top.omega_s;
  const double p_hi = mean_population(IntermittentTwoTone{top, spec.t_sig}, kReplicaSensor, spec.t_sig);

  const SensorModel amp{0.85, 1.0, kPi / 2};
  const double ta = 0.6;
  const double ca = contrast(amp, ta);
  const SensorModel var{0.85, 1.0, 0.0};

  double prev_f = -1.0, prev_a = -1.0, prev_v = -1.0;
  for (int i = 0; i <= 10000; ++i) {
    const double p = i / 10000.0;
    const auto f = invert_frequency_separation(p, kReplicaSensor, spec, Inversion::kExact);
    CHECK(f.defined() == (p >= p_lo && p <= p_hi));
    if (f.defined()) {
      CHECK(f.g_hat > prev_f);
      CHECK(std::abs(mean_population(with_separation(SignalSpec{spec}, f.g_hat), kReplicaSensor, spec.t_sig) - p) < 1e-12);
      prev_f = f.g_hat;
    }
    const auto a = estimate_amplitude(at(p), amp, ta);
    CHECK(a.defined() == (p >= 0.5 && p <= 0.5 * (1 + ca)));
    if (a.defined()) {
      CHECK(a.g_hat > prev_a);
      prev_a = a.g_hat;
    }
    const auto v = estimate_variance(at(p), var, ta);
    CHECK(v.defined() == (p >= (1 - ca) / 2 && p < 0.5));
    if (v.defined()) {
      CHECK(v.g_hat > prev_v);
      prev_v = v.g_hat;
    }
  }
}

TEST_CASE("simulated estimates at 500 Hz recover the applied separation") {
  const double g = kTwoPi * 500.0;
  const auto spec = replica_spec(g);
  std::vector<double> values;
  for (int r = 0; r < 11; ++r) {
    const auto est = estimate_population(
        simulate_shots(spec, kReplicaSensor, {1000, 1}, spec.t_sig, {13, 1, static_cast<std::uint64_t>(r)}));
    const auto e = estimate_frequency_separation(est, kReplicaSensor, spec);
    if (e.defined()) values.push_back(e.g_hat);
  }
  REQUIRE(values.size() >= 6);
  CHECK(std::abs(median_of(values) / g - 1) < 0.1);
}

TEST_CASE("exclusion biases the median upward below g_min") {
  const double g = kTwoPi * 100.0;
  const auto spec = replica_spec(g);
  std::vector<double> values;
  for (int r = 0; r < 501; ++r) {
    const auto est = estimate_population(
        simulate_shots(spec, kReplicaSensor, {1000, 1}, spec.t_sig, {14, 1, static_cast<std::uint64_t>(r)}));
    const auto e = estimate_frequency_separation(est, kReplicaSensor, spec);
    if (e.defined()) values.push_back(e.g_hat);
  }
  REQUIRE(!values.empty());
  CHECK(median_of(values) > g);
}

TEST_CASE("empirical_gmin threshold rule") {
  SUBCASE("noiseless scan resolves at the smallest grid point") {
    const auto r = empirical_gmin(exact_scan({1, 2, 3, 4, 5}, 3));
    CHECK(r.resolved);
    CHECK(r.g_min == 1.0);
  }
  SUBCASE("all excluded is unresolved at the top of the grid") {
    BiasScan s;
    for (double g : {1.0, 2.0, 3.0, 4.0})
      s.rows.push_back({g, std::vector<EstimateOutcome>(3, EstimateOutcome::Excluded(EstimateStatus::kBelowBaseline))});
    const auto r = empirical_gmin(s);
    CHECK_FALSE(r.resolved);
    CHECK(r.g_min == 4.0);
  }
  SUBCASE("biased low rows are skipped") {
    auto s = exact_scan({1, 2, 3, 4, 5}, 3);
    s.rows[0].estimates.assign(3, EstimateOutcome::Defined(1.5));
    s.rows[1].estimates.assign(3, EstimateOutcome::Defined(2.5));
    CHECK(empirical_gmin(s).g_min == 3.0);
  }
  SUBCASE("a bad row high up resets the threshold above it") {
    auto s = exact_scan({1, 2, 3, 4, 5}, 3);
    s.rows[3].estimates = {EstimateOutcome::Defined(4.0), EstimateOutcome::Excluded(EstimateStatus::kOutOfDomain),
                           EstimateOutcome::Excluded(EstimateStatus::kOutOfDomain)};
    CHECK(empirical_gmin(s).g_min == 5.0);
  }
  SUBCASE("invalid scans") {
    CHECK_THROWS_AS(empirical_gmin(exact_scan({1, 2, 3}, 3)), std::invalid_argument);
    CHECK_THROWS_AS(empirical_gmin(exact_scan({1, 2, 2, 3}, 3)), std::invalid_argument);
    CHECK_THROWS_AS(empirical_gmin(exact_scan({1, 2, 3, 4}, 1)), std::invalid_argument);
  }
}

TEST_CASE("bias scan CSV round trip") {
  BiasScan s;
  s.rows.push_back({kTwoPi * 10.0,
                    {EstimateOutcome::Defined(kTwoPi * 12.5), EstimateOutcome::Excluded(EstimateStatus::kBelowBaseline)}});
  s.rows.push_back({kTwoPi * 20.0,
                    {EstimateOutcome::Excluded(EstimateStatus::kOutOfDomain), EstimateOutcome::Defined(kTwoPi * 0.1)}});
  const auto csv = bias_scan_csv(s);
  CHECK(csv.rfind("g_applied_hz,rep_index,status,g_hat_hz\n", 0) == 0);
  const auto back = parse_bias_scan_csv("# comment\n" + csv);
  REQUIRE(back.rows.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back.rows[i].g_applied == doctest::Approx(s.rows[i].g_applied).epsilon(1e-15));
    for (std::size_t r = 0; r < 2; ++r) {
      CHECK(back.rows[i].estimates[r].status == s.rows[i].estimates[r].status);
      CHECK(back.rows[i].estimates[r].g_hat == doctest::Approx(s.rows[i].estimates[r].g_hat).epsilon(1e-15));
    }
  }
  CHECK_THROWS_AS(parse_bias_scan_csv("a,b\n"), std::invalid_argument);
}

TEST_CASE("fitted_gmin recovers the injected noise level") {
  // Scan with 201 repetitions per point and noise 1.5x QPN.
  const double factor = 1.5;
  const EnsembleConfig ens{1000, 1};
  BiasScan scan;
  int point = 0;
  for (double hz : {100.0, 150.0, 200.0, 300.0, 450.0, 700.0, 1000.0}) {
    const auto spec = replica_spec(kTwoPi * hz);
    BiasScanRow row{spec.tones.g, {}};
    for (int r = 0; r < 201; ++r) {
      const auto table = simulate_shots(spec, kReplicaSensor, ens, spec.t_sig,
                                        {21, 1, static_cast<std::uint64_t>(point * 1000 + r)});
      const auto est = excess_noise_channel(table, factor, {21, 2, static_cast<std::uint64_t>(point * 1000 + r)});
      row.estimates.push_back(estimate_frequency_separation(est, kReplicaSensor, spec));
    }
    scan.rows.push_back(std::move(row));
    ++point;
  }
  const BiasModel model{kReplicaSensor, replica_spec(), ens, Inversion::kExact};
  const auto fit = fitted_gmin(scan, model);
  REQUIRE(fit.resolved);
  CHECK(fit.noise_factor == doctest::Approx(factor).epsilon(0.15));

  // Independent SNR = 1 solve at the fitted noise level.
  const auto spec0 = replica_spec();
  const double p0 = mean_population(spec0, kReplicaSensor, spec0.t_sig);
  const auto snr = [&](double g) {
    const auto sp = replica_spec(g);
    const double p = mean_population(sp, kReplicaSensor, sp.t_sig);
    return (p - p0) / (fit.noise_factor * std::sqrt(p * (1 - p) / ens.total()));
  };
  CHECK(snr(fit.g_min) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(snr(0.9 * fit.g_min) < 1.0);
}
