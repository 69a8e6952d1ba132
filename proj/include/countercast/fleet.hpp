#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "countercast/bsts.hpp"
#include "countercast/llp.hpp"
#include "countercast/parallel.hpp"
#include "countercast/period.hpp"

namespace ccast {

struct FirmInput {
    std::string firm_id;
    double weight = 1.0;
    std::vector<Period> pre_periods;  // contiguous pre-treatment run
    std::vector<double> pre_values;
    std::vector<Period> treated_periods;
    std::vector<double> treated_observed;  // NaN where unobserved
    std::vector<double> cycle;             // optional; aligned with pre (+ treated)

    /// Data-access guard: fitting must never see periods past this cutoff.
    Period fit_cutoff;

    /// Set by input builders when the firm cannot be fit (gap before the
    /// cutoff, cycle not covering its periods); the fleet records it as the
    /// skip reason so firm conservation holds.
    std::string defect;
};

struct FirmFitResult {
    std::string firm_id;
    bool fitted = false;
    std::string skip_reason;
    std::string flags;  // e.g. "ess_warning", "pooled_only"
    double weight = 1.0;

    /// Full posterior chains for audit, one column per tracked quantity
    /// (obs/trend[/seasonal] variances[, cycle coefficient]); kept only when
    /// requested.
    Eigen::MatrixXd audit_draws;
    std::vector<std::string> audit_columns;

    std::vector<Period> horizon_periods;
    std::vector<double> observed;  // NaN where unobserved
    ForecastDistribution forecast;
    Eigen::MatrixXd predictive;  // draws x horizons, original scale; empty for LLP

    // pre-treatment one-step-ahead 95% bands (Bayesian route only)
    std::vector<Period> pre_periods;
    std::vector<double> pre_observed;
    std::vector<double> band_lo95;
    std::vector<double> band_hi95;

    // posterior means on the standardized scale (Bayesian route only)
    double var_obs = 0.0;
    double var_trend = 0.0;
    double var_seasonal = 0.0;
    double alpha_mean = 0.0;
    std::optional<std::pair<double, double>> alpha_interval95;

    int chosen_lag = -1;  // LLP routes only
};

struct FleetSummary {
    std::vector<FirmFitResult> results;  // one per input firm, same order
    int n_fitted = 0;
    int n_skipped = 0;
};

struct BstsFleetOptions {
    ModelSpec spec;  // spec.seed is the global seed; firms derive substreams
    PriorConfig priors;
    ParallelMode mode = ParallelMode::openmp;
    int workers = 0;  // 0 = runtime default
    bool keep_audit_draws = false;

    /// Called from worker threads every 100 completed firms (and at the end).
    std::function<void(int done, int total)> progress;
};

/// Fits one independent Gibbs sampler per firm. Firm-level failures
/// (degenerate series, numerical trouble) are recorded and skipped, never
/// fatal. Deterministic: output is independent of scheduling and workers.
FleetSummary fit_fleet_bsts(const std::vector<FirmInput>& firms, const BstsFleetOptions& options);

/// Firm-specific local projections across the fleet.
FleetSummary fit_fleet_llp_firm(const std::vector<FirmInput>& firms, const LlpSpec& spec,
                                ParallelMode mode, int workers = 0);

/// Panel local projection: pooled slopes with firm effects; estimation is a
/// single pooled regression, so this runs single-threaded.
FleetSummary fit_fleet_llp_panel(const std::vector<FirmInput>& firms, const LlpSpec& spec);

}  // namespace ccast
