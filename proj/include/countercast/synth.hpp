#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "countercast/panel.hpp"
#include "countercast/period.hpp"
#include "countercast/rng.hpp"

namespace ccast {

enum class EffectKind { none, additive, multiplicative };

/// Synthetic data-generating process: per-firm local-level (optionally
/// seasonal) outcome paths, with a configurable treatment effect in the
/// final `treated_periods` periods and firm books reverse-engineered from
/// the outcomes (theta = 1).
struct DgpSpec {
    int n_firms = 100;
    int n_periods = 30;
    int treated_periods = 2;
    Frequency frequency = Frequency::yearly;
    double obs_var = 0.01;
    double trend_var = 0.0005;
    double seasonal_var = 0.0;
    bool seasonal = false;
    double seasonal_init_sd = 0.0;  // amplitude of the initial seasonal pattern
    double profit_scale = 0.25;     // profit-path noise sds relative to the markup path

    EffectKind effect_kind = EffectKind::none;
    Outcome effect_outcome = Outcome::markup;
    double effect_size = 0.0;         // additive units, or fraction when multiplicative
    double effect_tenure_link = 0.0;  // additive effect per year of listing tenure
    double effect_noise_sd = 0.0;     // idiosyncratic additive effect noise

    int entry_spread = 0;  // firm entries staggered uniformly over this many periods
    int start_year = 1990;
    double markup_base = 1.6;
    double profit_base = 0.1;
    double cogs_base = 100.0;
    double firm_scale_sd = 1.0;  // log-normal cross-sectional size dispersion
    int n_industries = 5;
    std::uint64_t seed = 0;

    Period treatment_start() const;
};

struct FirmTruth {
    std::string firm_id;
    std::vector<Period> periods;
    std::vector<double> markup_observed;       // with treatment applied
    std::vector<double> profit_observed;
    std::vector<double> markup_trend;          // latent state paths
    std::vector<double> profit_trend;
    std::vector<double> markup_counterfactual; // treated periods, no treatment
    std::vector<double> profit_counterfactual;
    std::vector<double> markup_effect;         // observed - counterfactual, exact
    std::vector<double> profit_effect;
};

struct SyntheticPanel {
    PanelDataset panel;
    std::vector<FirmTruth> truth;  // same order as panel.firms
    Period treatment_start;
};

/// Deterministic given spec and seed; each firm has its own substream.
SyntheticPanel generate_panel(const DgpSpec& spec);

/// Single local-level path: y_t = level_t + N(0, obs_var),
/// level_t = level_{t-1} + N(0, trend_var).
std::vector<double> simulate_local_level(int n, double level0, double obs_var, double trend_var,
                                         Rng& rng);

/// Exact Kalman filter/smoother for the local-level model with known
/// variances; the oracle the FFBS sampler is validated against.
struct SmootherResult {
    std::vector<double> mean;
    std::vector<double> var;
};
SmootherResult kalman_oracle(std::span<const double> y, double obs_var, double trend_var,
                             double init_mean, double init_var);

/// Brute-force Benjamini-Hochberg step-up: largest k with p_(k) <= k*q/m,
/// rejecting the k smallest. Returns rejected indices in input order.
std::vector<std::size_t> stepup_oracle(std::span<const double> p, double q);

}  // namespace ccast
