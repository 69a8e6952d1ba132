#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "countercast/fleet.hpp"
#include "countercast/panel.hpp"
#include "countercast/synth.hpp"

namespace ccast {

/// Cleaned panels round-trip through the same delimited schema the loader
/// reads, so downstream commands reuse load_panel.
void write_panel_csv(const std::string& path, const PanelDataset& panel);

/// One row per fitted firm-horizon: estimator variant, point forecast,
/// interval bounds per level, variance posterior means, cycle-coefficient
/// interval, chosen lag. The schema is shared by the Bayesian and
/// projection routes so downstream effect computation is estimator-agnostic.
void write_forecasts_csv(const std::string& path, const FleetSummary& summary,
                         const std::string& estimator);
std::vector<FirmFitResult> read_forecasts_csv(const std::string& path);

void write_skips_csv(const std::string& path, const FleetSummary& summary);

/// Pre-treatment one-step 95% bands per firm-period (model-fit diagnostics).
void write_coverage_csv(const std::string& path, const FleetSummary& summary);

struct CoverageRow {
    std::string firm_id;
    Period period;
    double observed = 0.0;
    double lo95 = 0.0;
    double hi95 = 0.0;
};
std::vector<CoverageRow> read_coverage_csv(const std::string& path);

/// Binary sidecar with the posterior predictive draws: per firm a text
/// header line "firm <id> rows <n> cols <h> dtype f64le order row-major"
/// followed by the raw little-endian doubles; terminated by "end".
void write_draws_sidecar(const std::string& path, const FleetSummary& summary);
std::map<std::string, Eigen::MatrixXd> read_draws_sidecar(const std::string& path);

/// Same format for the full audit chains (variance and cycle-coefficient
/// draws per retained iteration); the header carries the column names.
void write_audit_sidecar(const std::string& path, const FleetSummary& summary);

/// Ground-truth sidecar for synthetic fixtures.
void write_truth_csv(const std::string& path, const SyntheticPanel& synthetic);

void write_elasticity_csv(const std::string& path, double default_theta);
void write_deflator_csv(const std::string& path, const std::vector<Period>& periods,
                        double index_value, int base_year);

bool file_exists(const std::string& path);

/// Opens for reading or throws DataError naming the missing artifact and
/// the command that produces it.
void require_artifact(const std::string& path, const std::string& producing_command);

}  // namespace ccast
