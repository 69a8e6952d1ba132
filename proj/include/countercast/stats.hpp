#pragma once

#include <span>
#include <vector>

namespace ccast {

double mean(std::span<const double> x);

/// Sample variance, n-1 denominator.
double sample_var(std::span<const double> x);
double sample_sd(std::span<const double> x);

/// Linear-interpolation quantile on the sorted sample (R type 7):
/// position h = (n-1)q, value x[floor(h)] + frac(h) * (x[floor(h)+1] - x[floor(h)]).
double quantile_sorted(std::span<const double> sorted, double q);

/// Convenience overload that copies and sorts.
double quantile(std::span<const double> x, double q);

double median(std::span<const double> x);

/// Skewness with biased (n-denominator) central moments.
double skewness_biased(std::span<const double> x);

/// Raw (non-excess) kurtosis with biased central moments.
double kurtosis_biased(std::span<const double> x);

/// Upper tail of the chi-squared distribution with 2 degrees of freedom.
double chi2_2df_upper_tail(double x);

/// Pearson correlation.
double correlation(std::span<const double> x, std::span<const double> y);

}  // namespace ccast
