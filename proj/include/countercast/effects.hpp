#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "countercast/bsts.hpp"
#include "countercast/parallel.hpp"
#include "countercast/period.hpp"

namespace ccast {

struct EffectEstimate {
    std::string firm_id;
    Period period;
    int horizon = 0;  // 1-based
    double observed = 0.0;
    double counterfactual_mean = 0.0;
    double effect = 0.0;  // observed - counterfactual_mean
    std::optional<IntervalSet> interval;
    std::optional<double> posterior_p;
    std::optional<bool> significant;  // 95% band excludes the observed value
    int sign = 0;                     // sign of the effect
};

/// Two-sided posterior tail probability with the finite-sample floor
/// 2/(n_draws+1): p = max(2 * min(Pr(draw >= obs), Pr(draw <= obs)), floor),
/// clamped to 1.
double posterior_p_value(std::span<const double> draws, double observed);

/// Per-horizon effects from a Bayesian forecast; predictive draws supply the
/// posterior p-value and the significance flag.
std::vector<EffectEstimate> effect_estimates(const std::string& firm_id,
                                             std::span<const Period> periods,
                                             std::span<const double> observed,
                                             const ForecastDistribution& forecast,
                                             const Eigen::MatrixXd& predictive);

/// Point-forecast route (local projections): no per-firm significance;
/// inference comes from the aggregate bootstrap downstream.
std::vector<EffectEstimate> effect_estimates_point(const std::string& firm_id,
                                                   std::span<const Period> periods,
                                                   std::span<const double> observed,
                                                   std::span<const double> forecasts);

enum class AggregateStatistic { mean, q1, q2, q3 };
std::string to_string(AggregateStatistic s);

/// One firm's contribution to fleet aggregation: observed treated-period
/// outcomes and the aligned posterior predictive draws.
struct FleetFirmDraws {
    std::string firm_id;
    double weight = 1.0;
    std::vector<Period> periods;
    std::vector<double> observed;
    Eigen::MatrixXd predictive;  // draws x periods
};

struct AggregateRow {
    Period period;
    int n_firms = 0;
    double observed = 0.0;  // statistic across firms of observed values
    double point = 0.0;     // mean across simulations of the per-sim statistic
    IntervalSet band;
};

struct AggregateSeries {
    std::vector<AggregateRow> rows;
    bool resample_warning = false;  // some firm had fewer draws than simulations
};

/// Counterfactual aggregates: the statistic is applied across firms within
/// each joint posterior simulation, then bands are equally-tailed quantiles
/// across simulations. Means are weighted; quartiles are unweighted. Firms
/// with fewer draws than `n_sims` are resampled with replacement.
AggregateSeries aggregate_fleet(const std::vector<FleetFirmDraws>& firms,
                                AggregateStatistic statistic, int n_sims, std::uint64_t seed,
                                ParallelMode mode = ParallelMode::openmp);

struct SignificantFractions {
    Period period;
    int n_firms = 0;
    double frac_significant = 0.0;
    double frac_positive = 0.0;
    double frac_negative = 0.0;
};

/// Per-period share of firms whose 95% band excludes the observed value,
/// split by effect sign. positive + negative = total, exactly.
std::vector<SignificantFractions> significant_fraction_series(
    std::span<const EffectEstimate> effects);

struct FdrCounts {
    int n_rejected_bh = 0;
    int n_rejected_naive = 0;  // p <= 0.05, no correction
};

FdrCounts fdr_significant_count(std::span<const double> p, double q);

struct PcAudit {
    double mean_r2 = 0.0;
    double mean_pairwise_corr = 0.0;
    int n_windows = 0;
    int windows_skipped = 0;  // fewer than 2 complete firms
};

/// Cross-firm correlation audit: in consecutive `window`-period blocks,
/// regress each complete firm series on the window's first principal
/// component and average the R^2; also averages pairwise correlations.
PcAudit pc_correlation_audit(const Eigen::MatrixXd& outcomes_by_firm, int window);

struct ScaledEffects {
    std::vector<EffectEstimate> scaled;
    std::vector<std::string> excluded;  // firms with zero baseline
};

/// Effects divided by a per-firm baseline level (markups only upstream;
/// profit rates are never scaled).
ScaledEffects scaled_effects(std::span<const EffectEstimate> effects,
                             const std::vector<std::pair<std::string, double>>& baselines);

}  // namespace ccast
