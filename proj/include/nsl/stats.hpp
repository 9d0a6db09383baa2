#ifndef NSL_STATS_HPP
#define NSL_STATS_HPP

#include <vector>

namespace nsl {

// Sample Pearson correlation; both inputs need n >= 3 and nonzero variance.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

// Two-sided p-value under the null of zero correlation:
//   t = r * sqrt((n-2) / (1-r^2)), p = 2 * (1 - T_cdf(|t|; n-2)),
// with the Student-t CDF evaluated through the regularized incomplete beta
// function. Clamped to [DBL_MIN, 1].
double pearson_pvalue(double r, long n);

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation with
// the standard symmetry split.
double incomplete_beta(double a, double b, double x);

}  // namespace nsl

#endif  // NSL_STATS_HPP
