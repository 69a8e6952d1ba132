#pragma once

#include <span>
#include <string>
#include <vector>

#include "countercast/panel.hpp"

namespace ccast {

struct HeterogeneityReport {
    std::vector<std::string> names;  // regressor names, intercept first when present
    std::vector<double> coef;
    std::vector<double> robust_se;   // HC1
    std::vector<std::string> dropped;  // covariates removed for collinearity
    bool industry_fe = false;
    double r2 = 0.0;
    double within_r2 = 0.0;  // only when industry_fe
    double mean_outcome = 0.0;  // mean observed outcome level over the sample
    double mean_effect = 0.0;   // mean of the dependent variable
    int n = 0;
};

struct FirmEffectRow {
    std::string firm_id;
    double average_effect = 0.0;   // dependent variable
    double average_outcome = 0.0;  // observed level, reported as the "Mean" row
};

/// Cross-sectional regression of per-firm average effects on baseline
/// covariates, optionally absorbing 2-digit industry fixed effects by
/// within-demeaning. Standard errors are heteroskedasticity-robust (HC1).
/// Perfectly collinear covariates are dropped with their names recorded.
HeterogeneityReport heterogeneity_regression(std::span<const FirmEffectRow> effects,
                                             std::span<const FirmCovariates> covariates,
                                             bool industry_fe);

struct BinscatterBin {
    double covariate_mean = 0.0;
    double effect_mean = 0.0;
    double lo = 0.0;  // normal-approximation 95% band
    double hi = 0.0;
    int n = 0;
};

struct BinscatterResult {
    std::vector<BinscatterBin> bins;
    bool reduced = false;  // ties forced fewer bins than requested
};

/// Equal-count quantile bins of `effects` by `covariate`; per-bin mean with
/// mean +- 1.96 * sd/sqrt(n) bands.
BinscatterResult binscatter(std::span<const double> covariate, std::span<const double> effects,
                            int n_bins = 5);

struct IndustryEffectRow {
    int naics2 = 0;
    int year = 0;
    double weighted_mean_effect = 0.0;
    double weight_total = 0.0;
    int n_firms = 0;
};

struct IndustryBreakdown {
    std::vector<IndustryEffectRow> rows;  // industries ascending by first-year effect
    double fleet_p25 = 0.0;               // unweighted effect quartiles, reference lines
    double fleet_p75 = 0.0;
};

struct IndustryEffectInput {
    std::string firm_id;
    int naics2 = 0;
    int year = 0;
    double effect = 0.0;
    double weight = 1.0;
};

IndustryBreakdown industry_breakdown(std::span<const IndustryEffectInput> effects);

}  // namespace ccast
