#include "qsense/numerics.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

namespace qsense {

MinimizeResult golden_section_minimize(const std::function<double(double)>& f, double lo,
                                       double hi, double tol) {
  if (!(hi > lo)) throw std::invalid_argument("golden_section_minimize: empty bracket");
  const double a0 = lo;
  const double b0 = hi;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  const double x = 0.5 * (a + b);
  const double edge_tol = 2.0 * tol;
  return {x, f(x), (x - a0) < edge_tol || (b0 - x) < edge_tol};
}

double find_root(const std::function<double(double)>& f, double lo, double hi, int bits,
                 std::uintmax_t max_iter) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0) == (fhi > 0)) throw std::domain_error("find_root: root not bracketed");
  boost::math::tools::eps_tolerance<double> tol(bits);
  auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, max_iter);
  return 0.5 * (a + b);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_quantile(double q) {
  return boost::math::quantile(boost::math::normal_distribution<double>{}, q);
}

double chi_squared_quantile(double q, double dof) {
  return boost::math::quantile(boost::math::chi_squared_distribution<double>(dof), q);
}

}  // namespace qsense
