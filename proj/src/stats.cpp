#include "rdm/stats.hpp"

#include <cmath>
#include <stdexcept>

namespace rdm {

namespace {

double gamma_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < 1000; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-15) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_cont_fraction(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 1000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-15) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double regularized_gamma_p(double a, double x) {
  if (a <= 0.0 || x < 0.0)
    throw std::invalid_argument("regularized_gamma_p: bad arguments");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_series(a, x);
  return 1.0 - gamma_cont_fraction(a, x);
}

double chi_square_cdf(double x, double df) {
  return regularized_gamma_p(df / 2.0, x / 2.0);
}

double chi_square_critical(double df, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("chi_square_critical: bad alpha");
  double lo = 0.0;
  double hi = df + 10.0;
  while (chi_square_cdf(hi, df) < 1.0 - alpha) hi *= 2.0;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (chi_square_cdf(mid, df) < 1.0 - alpha)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

ChiSquareResult chi_square_statistic(const std::vector<long>& observed,
                                     const std::vector<double>& probabilities,
                                     long draws) {
  if (observed.size() != probabilities.size())
    throw std::invalid_argument("chi_square_statistic: size mismatch");
  ChiSquareResult res;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double expected = probabilities[i] * draws;
    if (expected == 0.0) {
      if (observed[i] != 0) res.impossible_bin_hit = true;
      continue;
    }
    const double diff = observed[i] - expected;
    res.statistic += diff * diff / expected;
    ++res.dof;
  }
  res.dof = res.dof > 1 ? res.dof - 1 : 0;
  return res;
}

}  // namespace rdm
