#include "qsense/estimators.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <cmath>
#include <stdexcept>
#include <string>

#include "qsense/csv.hpp"
#include "qsense/numerics.hpp"

namespace qsense {
namespace {

constexpr double kBiasTolerance = 1e-9;

// e^{-x} = (1 - 2p) cos(theta) / C for the contrast-loss estimators.
struct ContrastRatio {
  EstimateStatus status;
  double neg_log = 0.0;
};

ContrastRatio contrast_ratio(double p_hat, double c, double theta) {
  if (std::abs(std::sin(theta)) > kBiasTolerance)
    throw std::invalid_argument("contrast-loss estimator: sensor must be biased at theta = 0 or pi");
  const double r = (1.0 - 2.0 * p_hat) * std::cos(theta) / c;
  if (r > 1.0) return {EstimateStatus::kBelowBaseline};
  if (r <= 0.0) return {EstimateStatus::kOutOfDomain};
  return {EstimateStatus::kDefined, -std::log(r)};
}

double median(std::vector<double> v) {
  const auto n = v.size();
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (n % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

double tone_scale(ToneConvention c) { return c == ToneConvention::kHalfSplit ? 0.5 : 1.0; }

// Separation at which the lower tone reaches zero frequency; the phase
// variance at one period is increasing in g below it.
double monotone_limit(const TwoTone& tones) { return tones.omega_s / tone_scale(tones.convention); }

struct DefinedStats {
  std::size_t defined = 0;
  std::vector<double> values;
};

DefinedStats defined_stats(const BiasScanRow& row) {
  DefinedStats s;
  for (const auto& e : row.estimates) {
    if (e.defined()) {
      ++s.defined;
      s.values.push_back(e.g_hat);
    }
  }
  return s;
}

}  // namespace

std::string_view to_string(EstimateStatus s) {
  switch (s) {
    case EstimateStatus::kDefined:
      return "defined";
    case EstimateStatus::kBelowBaseline:
      return "below_baseline";
    case EstimateStatus::kOutOfDomain:
      return "out_of_domain";
  }
  return "out_of_domain";
}

EstimateStatus parse_estimate_status(std::string_view s) {
  if (s == "defined") return EstimateStatus::kDefined;
  if (s == "below_baseline") return EstimateStatus::kBelowBaseline;
  if (s == "out_of_domain") return EstimateStatus::kOutOfDomain;
  throw std::invalid_argument("unknown estimate status: " + std::string(s));
}

EstimateOutcome estimate_amplitude(const PopulationEstimate& est, const SensorModel& sensor, double t_i) {
  if (std::abs(std::cos(sensor.theta)) > kBiasTolerance || std::sin(sensor.theta) < 0)
    throw std::invalid_argument("estimate_amplitude: sensor must be biased at theta = pi/2");
  const double arg = (2.0 * est.p_hat - 1.0) / contrast(sensor, t_i);
  if (arg < 0.0) return EstimateOutcome::Excluded(EstimateStatus::kBelowBaseline);
  if (arg > 1.0) return EstimateOutcome::Excluded(EstimateStatus::kOutOfDomain);
  return EstimateOutcome::Defined(std::asin(arg) / t_i);
}

EstimateOutcome estimate_variance(const PopulationEstimate& est, const SensorModel& sensor, double t_i) {
  const auto r = contrast_ratio(est.p_hat, contrast(sensor, t_i), sensor.theta);
  if (r.status != EstimateStatus::kDefined) return EstimateOutcome::Excluded(r.status);
  return EstimateOutcome::Defined(std::sqrt(2.0 * r.neg_log) / t_i);
}

EstimateOutcome invert_frequency_separation(double p_hat, const SensorModel& sensor,
                                            const IntermittentTwoTone& spec, Inversion inversion) {
  const double t1 = spec.tones.period();
  if (spec.t_sig < t1 * (1.0 - 1e-12))
    throw std::invalid_argument("estimate_frequency_separation: burst shorter than one centre period");
  const auto r = contrast_ratio(p_hat, contrast(sensor, t1), sensor.theta);
  if (r.status != EstimateStatus::kDefined) return EstimateOutcome::Excluded(r.status);
  if (r.neg_log == 0.0) return EstimateOutcome::Defined(0.0);

  if (inversion == Inversion::kGaussianLimit) {
    const double kappa = 0.5 * small_g_phase_curvature(spec.tones);
    return EstimateOutcome::Defined(std::sqrt(r.neg_log / kappa));
  }

  TwoTone tones = spec.tones;
  auto half_var_minus = [&](double g) {
    tones.g = g;
    return 0.5 * phase_variance_exact(tones, t1) - r.neg_log;
  };
  const double g_hi = monotone_limit(spec.tones);
  if (half_var_minus(g_hi) < 0.0) return EstimateOutcome::Excluded(EstimateStatus::kOutOfDomain);
  return EstimateOutcome::Defined(find_root(half_var_minus, 0.0, g_hi));
}

EstimateOutcome estimate_frequency_separation(const PopulationEstimate& est, const SensorModel& sensor,
                                              const IntermittentTwoTone& spec, Inversion inversion) {
  return invert_frequency_separation(est.p_hat, sensor, spec, inversion);
}

void validate(const BiasScan& scan) {
  for (std::size_t i = 0; i < scan.rows.size(); ++i) {
    if (scan.rows[i].estimates.size() < 2)
      throw std::invalid_argument("bias scan: each row needs at least two repetitions");
    if (i > 0 && !(scan.rows[i].g_applied > scan.rows[i - 1].g_applied))
      throw std::invalid_argument("bias scan: g_applied must be strictly increasing");
  }
}

std::string bias_scan_csv(const BiasScan& scan) {
  CsvWriter csv({"g_applied_hz", "rep_index", "status", "g_hat_hz"});
  for (const auto& row : scan.rows) {
    for (std::size_t r = 0; r < row.estimates.size(); ++r) {
      const auto& e = row.estimates[r];
      csv.row(row.g_applied / kTwoPi, r, to_string(e.status),
              e.defined() ? e.g_hat / kTwoPi : std::numeric_limits<double>::quiet_NaN());
    }
  }
  return csv.str();
}

BiasScan parse_bias_scan_csv(std::string_view csv) {
  auto parse_double = [](const std::string& s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
      throw std::invalid_argument("bias scan csv: bad number '" + s + "'");
    return v;
  };

  BiasScan scan;
  std::size_t pos = 0;
  bool header = true;
  while (pos < csv.size()) {
    auto end = csv.find('\n', pos);
    if (end == std::string_view::npos) end = csv.size();
    const auto line = csv.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty() || line.front() == '#') continue;
    if (header) {
      if (line != "g_applied_hz,rep_index,status,g_hat_hz")
        throw std::invalid_argument("bias scan csv: unexpected header");
      header = false;
      continue;
    }
    const auto cells = split_csv_line(line);
    if (cells.size() != 4) throw std::invalid_argument("bias scan csv: expected 4 columns");
    const double g = parse_double(cells[0]) * kTwoPi;
    const auto status = parse_estimate_status(cells[2]);
    if (scan.rows.empty() || scan.rows.back().g_applied != g) scan.rows.push_back({g, {}});
    scan.rows.back().estimates.push_back(status == EstimateStatus::kDefined
                                             ? EstimateOutcome::Defined(parse_double(cells[3]) * kTwoPi)
                                             : EstimateOutcome::Excluded(status));
  }
  validate(scan);
  return scan;
}

GminExtraction empirical_gmin(const BiasScan& scan, double rel_tol) {
  validate(scan);
  if (scan.rows.size() < 4) throw std::invalid_argument("empirical_gmin: need at least four grid points");

  auto qualifies = [rel_tol](const BiasScanRow& row) {
    const auto s = defined_stats(row);
    if (2 * s.defined < row.estimates.size() || s.values.empty()) return false;
    return std::abs(median(s.values) - row.g_applied) <= rel_tol * row.g_applied;
  };

  std::size_t first = scan.rows.size();
  for (std::size_t i = scan.rows.size(); i-- > 0;) {
    if (!qualifies(scan.rows[i])) break;
    first = i;
  }
  if (first == scan.rows.size()) return {scan.rows.back().g_applied, false, 0.0};
  return {scan.rows[first].g_applied, true, 0.0};
}

GminExtraction fitted_gmin(const BiasScan& scan, const BiasModel& model) {
  validate(scan);
  const double t1 = model.spec.tones.period();
  const double nm = model.ensemble.total();
  const double direction = std::cos(model.sensor.theta) >= 0 ? 1.0 : -1.0;

  auto population = [&](double g) {
    return mean_population(with_separation(model.spec, g), model.sensor, t1);
  };
  const double p0 = population(0.0);

  struct Point {
    double g;
    double p;
    double log_median;
  };
  std::vector<Point> points;
  for (const auto& row : scan.rows) {
    const auto s = defined_stats(row);
    if (s.defined < 2 || row.g_applied <= 0) continue;
    const double m = median(s.values);
    if (m <= 0) continue;
    points.push_back({row.g_applied, population(row.g_applied), std::log(m)});
  }
  const double g_top = scan.rows.empty() ? 0.0 : scan.rows.back().g_applied;
  if (points.empty()) return {g_top, false, 0.0};

  const double g_limit = monotone_limit(model.spec.tones);
  auto predicted_log_median = [&](const Point& pt, double lambda) {
    const double sd = lambda * std::sqrt(pt.p * (1.0 - pt.p) / nm);
    const double snr = direction * (pt.p - p0) / sd;
    const double excluded = normal_cdf(-snr);
    const double q = excluded + 0.5 * (1.0 - excluded);
    const double p_med = pt.p + direction * sd * normal_quantile(q);
    const auto e = invert_frequency_separation(p_med, model.sensor, model.spec, model.inversion);
    return std::log(e.defined() ? std::max(e.g_hat, 1e-300) : g_limit);
  };
  auto loss = [&](double log_lambda) {
    const double lambda = std::exp(log_lambda);
    double sum = 0.0;
    for (const auto& pt : points) {
      const double d = pt.log_median - predicted_log_median(pt, lambda);
      sum += d * d;
    }
    return sum;
  };
  const auto best = golden_section_minimize(loss, std::log(0.2), std::log(5.0), 1e-7);
  const double lambda = std::exp(best.x);

  auto snr_minus_one = [&](double g) {
    const double p = population(g);
    return direction * (p - p0) - lambda * std::sqrt(p * (1.0 - p) / nm);
  };
  if (snr_minus_one(g_limit) < 0) return {g_top, false, lambda};
  const double lo = g_limit * 1e-9;
  return {find_root(snr_minus_one, lo, g_limit), true, lambda};
}

}  // namespace qsense
