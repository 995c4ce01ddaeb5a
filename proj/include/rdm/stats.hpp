#pragma once

#include <vector>

namespace rdm {

// Regularized lower incomplete gamma P(a, x); series for x < a+1, continued
// fraction otherwise.
double regularized_gamma_p(double a, double x);

// Chi-square CDF with df degrees of freedom.
double chi_square_cdf(double x, double df);

// Smallest x with CDF(x) >= 1 - alpha, found by bisection.
double chi_square_critical(double df, double alpha);

// Pearson statistic over bins with expected counts; bins with zero expectation
// must carry zero observations (counted as a failure by the caller otherwise).
struct ChiSquareResult {
  double statistic = 0.0;
  int dof = 0;
  bool impossible_bin_hit = false;  // observation in a zero-probability bin
};

ChiSquareResult chi_square_statistic(const std::vector<long>& observed,
                                     const std::vector<double>& probabilities,
                                     long draws);

}  // namespace rdm
