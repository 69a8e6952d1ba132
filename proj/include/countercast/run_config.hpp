#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "countercast/bsts.hpp"
#include "countercast/fleet.hpp"
#include "countercast/llp.hpp"
#include "countercast/panel.hpp"
#include "countercast/synth.hpp"

namespace ccast {

/// End-to-end run configuration. The file format is flat key = value text
/// under [section] headers; a key's full name is section.key, so every prior
/// hyperparameter is addressable (priors.obs.v, priors.trend.s, ...).
/// Unknown keys are configuration errors.
struct RunConfig {
    // [input]
    std::string panel_path;
    std::string elasticity_path;
    std::string deflator_path;
    std::string cycle_path;  // optional exogenous cycle source series
    Frequency frequency = Frequency::yearly;

    // [run]
    std::vector<Outcome> outcomes{Outcome::markup, Outcome::profit_rate};
    std::vector<std::string> estimators{"bsts"};  // bsts | llp_firm | llp_panel
    std::string outdir = "out";
    std::uint64_t seed = 1;
    int workers = 0;
    ParallelMode parallel = ParallelMode::openmp;
    std::vector<double> sensitivity;  // prior scale factors besides 1.0
    std::string weighting = "sales";  // sales | cogs | none
    double max_skip_fraction = 0.5;
    bool dump_draws = false;
    int holdout_cutoff_year = 2017;   // quality protocol: fit up to here
    int holdout_horizons = 2;
    int covariate_window_start = 2015;
    int covariate_window_end = 2019;
    double hp_lambda = 0.0;  // 0 = frequency default

    // [model]
    ModelSpec model;
    bool seasonal_override = false;  // set when model.seasonal appears in the file
    bool seasonal_value = false;

    // [priors]
    PriorConfig priors;

    // [llp]; max_lag 0 means the frequency default (3 yearly, 8 quarterly)
    LlpSpec llp;

    RunConfig() { llp.max_lag = 0; }

    // [cleaning]
    double ratio_trim_lo = 1.0;
    double ratio_trim_hi = 99.0;
    double share_trim_lo = 1.0;
    double share_trim_hi = 99.0;
    int min_pre_periods = -1;  // -1 = frequency default
    std::string share_numerator = "cogs";
    std::string treatment_start;  // "2020" or "2020Q1"; empty = default
    int deflator_base_year = 2010;

    // [synth]
    DgpSpec synth;

    bool seasonal() const;
    Period treatment_period() const;
    CleaningConfig cleaning_config(const DeflatorSeries& deflator) const;
    LlpSpec llp_spec() const;  // max_lag defaulted by frequency when unset
};

RunConfig parse_run_config(std::istream& in);
RunConfig load_run_config(const std::string& path);

/// CLI-style override: full dotted key plus value.
void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);

}  // namespace ccast
