#pragma once

#include <string>

#include "countercast/run_config.hpp"

namespace ccast::pipeline {

/// Generates synthetic fixture files (panel, elasticities, deflator, truth)
/// into the output directory.
void cmd_synth(const RunConfig& cfg);

/// Loads, validates, cleans the raw panel; writes the cleaned panel and the
/// cleaning log.
void cmd_ingest(const RunConfig& cfg);

/// Runs the selected estimators over every eligible firm, including the
/// sensitivity sweeps; writes forecast records, skip logs, coverage bands,
/// and the predictive-draw sidecars.
void cmd_fit(const RunConfig& cfg);

/// Assumption tests and model-fit summaries: normality of differenced
/// outcomes with multiple-testing corrections, pre-treatment coverage
/// statistics, cycle-coefficient summaries.
void cmd_diagnose(const RunConfig& cfg);

/// Effect estimates, fleet aggregation (fan charts, quartiles), significant
/// fractions, FDR counts, scaled effects, cross-firm correlation audit.
void cmd_effects(const RunConfig& cfg);

/// Cross-sectional heterogeneity regressions, binscatters, industry
/// breakdowns.
void cmd_heterogeneity(const RunConfig& cfg);

/// Everything above plus the forecast-quality holdout protocol, volatility
/// series, and entry/exit series.
void cmd_report(const RunConfig& cfg);

/// Dispatch by subcommand name; throws ConfigError for unknown commands.
void run_command(const std::string& command, const RunConfig& cfg);

/// ingest + fit + report (report covers diagnose, effects, heterogeneity).
void run_full(const RunConfig& cfg);

}  // namespace ccast::pipeline
