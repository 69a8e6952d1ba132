#pragma once

#include <span>
#include <string_view>
#include <vector>

namespace ccast {

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    int n = 0;
};

/// Jarque-Bera statistic from precomputed moments: n/6 * (S^2 + (K-3)^2/4)
/// with raw (non-excess) kurtosis K.
double jarque_bera_statistic(int n, double skewness, double kurtosis);

/// Jarque-Bera normality test on a series (classically, first differences).
/// Skewness and kurtosis use biased (n-denominator) moments; the p-value is
/// the chi-squared(2) upper tail. Requires n >= 8 and non-constant input.
TestResult jarque_bera(std::span<const double> x);

enum class PAdjustMethod { bonferroni, holm, hochberg, hommel, benjamini_hochberg };

PAdjustMethod p_adjust_from_string(std::string_view s);

/// Adjusted p-values, clamped to 1, in input order. Rejecting hypotheses
/// with adjusted p <= q reproduces each method's stepwise procedure at
/// level q; Benjamini-Hochberg controls the false discovery rate.
std::vector<double> adjust_pvalues(std::span<const double> p, PAdjustMethod method);

/// Fraction of periods where the observation lies strictly outside its band.
double coverage_fraction(std::span<const double> observed, std::span<const double> lo,
                         std::span<const double> hi);

struct QualityReport {
    double me = 0.0;    // mean(actual - forecast)
    double rmse = 0.0;
    double mae = 0.0;
    double maes = 0.0;  // MAE / sample sd of actuals
    double mape = 0.0;  // zero-actual pairs excluded
    double median_mape = 0.0;  // median of per-firm MAPEs
    int n_firms = 0;
    int mape_excluded = 0;  // pairs dropped from MAPE for zero actuals
};

/// Forecast-quality metrics over aligned (actual, forecast) pairs;
/// `firm_of_row` groups rows into firms for the median MAPE.
QualityReport forecast_quality(std::span<const double> actuals,
                               std::span<const double> forecasts,
                               std::span<const int> firm_of_row);

}  // namespace ccast
