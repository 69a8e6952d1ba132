#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "countercast/parallel.hpp"

namespace ccast {

enum class LlpVariant { firm_specific, panel_fixed_effects };

struct LlpSpec {
    int max_lag = 3;  // 3 yearly, 8 quarterly
    int horizon = 2;
    LlpVariant variant = LlpVariant::firm_specific;
    int n_bootstrap = 10000;
    std::uint64_t seed = 0;
};

/// Gaussian-likelihood Akaike criterion: n*ln(ssr/n) + 2*(k+1), with k the
/// number of regression coefficients.
double aic(int n, double ssr, int k);

/// Chooses the projection lag by AIC on the one-step regression, fitting
/// every candidate on the common largest sample; ties go to the smaller lag.
int select_lag_aic(std::span<const double> y, int max_lag);

struct HorizonFit {
    Eigen::VectorXd beta;     // (1, y_{t-1}, ..., y_{t-p}) coefficients
    double resid_var = 0.0;   // ssr / n
    int n = 0;
};

struct LlpFirmFit {
    int chosen_lag = 0;
    std::vector<HorizonFit> by_horizon;  // h = 1..H
    std::vector<double> forecasts;       // direct forecasts at T+1..T+H
};

/// Direct projections of y_{t+h} on a constant and lags y_{t-1..t-p}, one
/// regression per horizon, fit by OLS on pre-treatment rows only.
LlpFirmFit fit_firm_llp(std::span<const double> y, const LlpSpec& spec);

struct PanelLlpFit {
    int chosen_lag = 0;
    std::vector<Eigen::VectorXd> beta;  // per horizon; [0] is zero (level sits in the firm effect)
    std::vector<double> resid_var;      // per horizon
    // per firm: fixed effects and forecasts per horizon; NaN when unavailable
    std::map<std::string, std::vector<double>> firm_effect;
    std::map<std::string, std::vector<double>> forecasts;
    std::vector<std::string> pooled_only;  // forecast uses beta with zero firm effect
    std::vector<std::string> skipped;      // no lag window at the sample end
};

struct PanelSeries {
    std::string firm_id;
    std::vector<double> values;  // contiguous pre-treatment run
};

/// Pooled projection with firm fixed effects absorbed by within-demeaning;
/// the pooled lag is chosen by AIC on the demeaned one-step regression.
/// Forecasts combine the common slopes with each firm's own effect and lags.
PanelLlpFit fit_panel_llp(const std::vector<PanelSeries>& panel, const LlpSpec& spec);

struct BootstrapInterval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Firm-resampling bootstrap (n out of n, with replacement) of the weighted
/// average effect; 2.5th/97.5th percentiles per horizon. Missing effects
/// (NaN) drop out of a resample's average. Replicates use pre-split random
/// substreams, so the result is deterministic given the seed in either mode.
std::vector<BootstrapInterval> bootstrap_aggregate_ci(const Eigen::MatrixXd& effects,
                                                      std::span<const double> weights,
                                                      int n_bootstrap, std::uint64_t seed,
                                                      ParallelMode mode = ParallelMode::openmp);

}  // namespace ccast
