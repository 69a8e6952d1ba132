#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "countercast/rng.hpp"

namespace ccast {

struct ModelSpec {
    bool has_seasonal = false;  // quarterly data: 4-season component
    bool has_cycle = false;     // exogenous cycle regressor
    int horizon = 2;
    int n_iterations = 10000;
    int n_burn = 1000;
    int n_predictive_draws = 5000;
    std::uint64_t seed = 0;

    void validate() const;  // throws ConfigError
};

/// Inverse-Gamma prior on a variance: 1/sigma^2 ~ Gamma(v/2, s/2).
struct InverseGammaPrior {
    double v = 1.0;
    double s = 1.0;
};

struct PriorConfig {
    InverseGammaPrior obs{1.0, 0.01};
    InverseGammaPrior trend{0.01, 32.0};
    InverseGammaPrior seasonal{0.01, 0.01};
    double init_trend_sd = 1.0;     // prior mean comes from the data (first standardized value)
    double init_seasonal_sd = 1.0;  // prior mean 0

    void validate() const;
};

/// Multiplies every scale-type hyperparameter (both inverse-Gamma parameters
/// and initial-state sds) by `factor`; location parameters are untouched.
PriorConfig scale_hyperparameters(const PriorConfig& priors, double factor);

/// Affine transform linking a raw series to its standardized version:
/// z = (y - mean) / sd.
struct Standardization {
    double mean = 0.0;
    double sd = 1.0;

    double apply(double y) const { return (y - mean) / sd; }
    double invert(double z) const { return mean + sd * z; }
    static Standardization identity() { return {0.0, 1.0}; }
};

struct StandardizedSeries {
    std::vector<double> values;  // mean 0, sample sd 1
    Standardization transform;
};

/// Centers and scales to sample sd 1. Requires length >= 3 and sd > 0;
/// constant input raises DegenerateSeriesError (callers skip the firm).
StandardizedSeries standardize(std::span<const double> y);

struct VarianceDraw {
    double obs = 1.0;
    double trend = 1.0;
    double seasonal = 1.0;  // ignored unless seasonal
};

/// Gamma posterior on a precision: shape (v+n)/2, rate (s+sse)/2.
struct GammaPosterior {
    double shape = 0.0;
    double rate = 0.0;
};
GammaPosterior inverse_gamma_posterior(const InverseGammaPrior& prior, double sse, int n);

/// One draw of sigma^2 from its conjugate full conditional.
double draw_variance(const InverseGammaPrior& prior, double sse, int n, Rng& rng);

/// Joint draw of all model variances given a state path (columns of `states`
/// are [trend] or [trend, g_t, g_{t-1}, g_{t-2}]; rows are time).
VarianceDraw sample_variances(std::span<const double> y, const Eigen::MatrixXd& states,
                              bool has_seasonal, const PriorConfig& priors, Rng& rng);

/// One-step-ahead predictive moments collected during the filter pass,
/// on the standardized scale.
struct OneStepPrediction {
    std::vector<double> mean;
    std::vector<double> var;
};

/// Forward-filtering backward-sampling draw of the joint state path given
/// variances. Row t holds the state at time t+1; the first column is the
/// trend, followed by three lagged seasonal states when seasonal is on.
/// The initial trend prior is N(init_trend_mean, init_trend_sd^2); each
/// initial seasonal state is N(0, init_seasonal_sd^2). Throws NumericalError
/// when the filter covariance turns non-finite.
Eigen::MatrixXd ffbs_states(std::span<const double> y, const VarianceDraw& variances,
                            bool has_seasonal, const PriorConfig& priors, double init_trend_mean,
                            Rng& rng, OneStepPrediction* onestep = nullptr);

struct PosteriorDraws {
    // per retained iteration
    std::vector<double> obs_var;
    std::vector<double> trend_var;
    std::vector<double> seasonal_var;  // empty unless seasonal
    std::vector<double> cycle_coef;    // empty unless cycle
    Eigen::MatrixXd trend_path;        // retained x T
    Eigen::MatrixXd seasonal_path;     // retained x T (gamma_t), empty unless seasonal

    // posterior predictive, original scale: n_predictive_draws x horizon
    Eigen::MatrixXd predictive;

    // in-sample one-step-ahead simulated values, original scale: retained x T
    Eigen::MatrixXd onestep;

    Standardization transform;
    int effective_horizon = 0;
    bool ess_warning = false;  // some variance chain has effective sample size < 100

    int retained() const { return static_cast<int>(obs_var.size()); }
};

/// Full Gibbs run on an already standardized series. Alternates FFBS state
/// draws, the cycle-coefficient conjugate draw (when enabled), and variance
/// draws; after burn-in, simulates posterior predictive paths by iterating
/// the state equations forward and adding observation noise. Deterministic
/// given the seed. `cycle` must align with y and, when forecasting, carry
/// `horizon` extra post-sample values.
PosteriorDraws gibbs_run(std::span<const double> y_std, const Standardization& transform,
                         const ModelSpec& spec, const PriorConfig& priors,
                         std::span<const double> cycle = {});

/// Convenience wrapper: standardizes and runs the Gibbs sampler.
PosteriorDraws fit_bsts(std::span<const double> y_raw, const ModelSpec& spec,
                        const PriorConfig& priors, std::span<const double> cycle = {});

struct IntervalSet {
    double lo50 = 0, hi50 = 0;
    double lo80 = 0, hi80 = 0;
    double lo90 = 0, hi90 = 0;
    double lo95 = 0, hi95 = 0;
};

/// Equally-tailed interval bounds at the four standard levels from a sample.
IntervalSet interval_set(std::span<const double> draws);

struct ForecastDistribution {
    std::vector<double> point;          // predictive mean per horizon
    std::vector<IntervalSet> interval;  // per horizon
};

/// Point forecasts and nested equally-tailed bands from the predictive draws.
ForecastDistribution forecast_distribution(const PosteriorDraws& draws);

/// Validates that an exogenous cycle regressor is aligned and standardized,
/// returning a spec with the cycle component enabled.
ModelSpec cycle_regression_spec(std::span<const double> y, std::span<const double> cycle,
                                const ModelSpec& base);

}  // namespace ccast
