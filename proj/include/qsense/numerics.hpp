#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>

namespace qsense {

struct MinimizeResult {
  double x;
  double value;
  /// True when the minimiser sits against either end of the bracket.
  bool at_bracket_edge;
};

/// Golden-section search for the minimum of a unimodal f on [lo, hi].
/// Stops when the bracket is narrower than tol.
MinimizeResult golden_section_minimize(const std::function<double(double)>& f, double lo,
                                       double hi, double tol);

/// Root of f on [lo, hi] (f(lo) and f(hi) must differ in sign) to relative
/// precision 2^-bits. Thin wrapper over Boost.Math TOMS 748.
double find_root(const std::function<double(double)>& f, double lo, double hi, int bits = 52,
                 std::uintmax_t max_iter = 200);

/// Standard normal CDF and quantile.
double normal_cdf(double z);
double normal_quantile(double q);
double chi_squared_quantile(double q, double dof);

}  // namespace qsense
