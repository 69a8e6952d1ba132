#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "countercast/period.hpp"

namespace ccast {

struct FirmObservation {
    std::string firm_id;
    Period period;
    double sales = 0.0;
    double cogs = 0.0;
    double xsga = 0.0;
    double ppegt = 0.0;
    double employment = 0.0;  // thousands
    int naics2 = 0;           // 0 = missing
    std::optional<double> wage_bill;
};

/// One firm's observations, strictly ordered by period, no duplicates.
/// Interior gaps are permitted in storage; estimators receive contiguous
/// runs via longest_pretreatment_run().
struct FirmSeries {
    std::string firm_id;
    std::vector<FirmObservation> observations;

    // Derived outcomes, aligned with observations; filled by compute_outcomes.
    std::vector<double> markup;
    std::vector<double> profit_rate;

    Period entry_period() const { return observations.front().period; }
    Period exit_period() const { return observations.back().period; }
};

struct PanelDataset {
    Frequency frequency = Frequency::yearly;
    std::vector<FirmSeries> firms;  // sorted by firm_id

    std::size_t n_observations() const;
    const FirmSeries* find(const std::string& firm_id) const;
};

/// (naics2, period) -> output elasticity of variable inputs. A wildcard row
/// (naics2="*", period="*") declares the default; per-industry wildcards
/// (naics2, "*") are also honored. Lookup order: exact, industry default,
/// global default.
class IndustryElasticityTable {
public:
    void set_default(double theta);
    void set_industry_default(int naics2, double theta);
    void insert(int naics2, Period period, double theta);

    /// Throws CoverageError when no entry or default applies.
    double lookup(int naics2, Period period) const;

    static IndustryElasticityTable load(std::istream& in);

private:
    std::map<std::pair<int, std::pair<int, int>>, double> exact_;
    std::map<int, double> industry_default_;
    std::optional<double> default_;
};

/// period -> price index used to deflate nominal currency columns.
struct DeflatorSeries {
    std::map<Period, double> index;
    int base_year = 2010;

    /// index(period) / index(base year). Throws CoverageError on gaps.
    double factor(Period p) const;

    static DeflatorSeries load(std::istream& in, int base_year);
};

enum class CostShareNumerator { cogs, ppegt, xsga };

struct CleaningConfig {
    double ratio_trim_lo = 1.0;  // percentiles, [0, 100]
    double ratio_trim_hi = 99.0;
    double share_trim_lo = 1.0;
    double share_trim_hi = 99.0;
    int min_pre_periods = 3;  // 3 yearly, 20 quarterly
    CostShareNumerator share_numerator = CostShareNumerator::cogs;
    Period treatment_start{2020, 0};
    DeflatorSeries deflator;

    static CleaningConfig defaults(Frequency f);
};

/// Per-period trim bounds actually applied, keyed by period. Feeding these
/// back into clean_panel reproduces the same cut (idempotence).
struct TrimThresholds {
    std::map<Period, std::pair<double, double>> cogs_ratio;   // COGS/sales
    std::map<Period, std::pair<double, double>> xsga_ratio;   // XSGA/sales
    std::map<Period, std::pair<double, double>> share_basic;  // num/(COGS+PPEGT)
    std::map<Period, std::pair<double, double>> share_full;   // num/(COGS+PPEGT+XSGA)
};

struct CleaningLog {
    std::size_t rows_in = 0;
    std::size_t removed_nonpositive = 0;   // step 1
    std::size_t removed_ratio_trim = 0;    // step 3
    std::size_t removed_missing_ids = 0;   // step 4
    std::size_t removed_share_trim = 0;    // step 5
    std::size_t firms_removed_short = 0;   // step 6 (firms)
    std::size_t rows_removed_short = 0;    // step 6 (their rows)
    std::size_t rows_out = 0;
    TrimThresholds thresholds;

    std::string summary() const;
};

struct LoadResult {
    PanelDataset panel;
    std::size_t rows_dropped_unparseable = 0;
};

struct CleanResult {
    PanelDataset panel;
    CleaningLog log;
};

/// Reads a firm-period panel from delimited text with columns
/// firm_id, period, sales, cogs, xsga, ppegt, emp, naics2 [, wage_bill].
/// Rows with unparseable numeric fields are dropped and counted. Duplicate
/// (firm, period) pairs raise IntegrityError listing the offenders.
LoadResult load_panel(std::istream& in, Frequency frequency);

/// Applies the sample-construction rules in order: (1) drop rows with
/// non-positive sales/COGS or negative SG&A; (2) deflate currency columns;
/// (3) per-period percentile trim of COGS/sales and XSGA/sales;
/// (4) drop rows missing firm id or industry code; (5) per-period percentile
/// trim of the two cost shares; (6) drop firms with fewer pre-treatment
/// observations than the minimum or exiting before treatment start.
/// Percentiles use linear interpolation; ties at a threshold are kept.
CleanResult clean_panel(const PanelDataset& data, const CleaningConfig& cfg);

/// Same pipeline with trim thresholds held fixed instead of recomputed.
CleanResult clean_panel(const PanelDataset& data, const CleaningConfig& cfg,
                        const TrimThresholds& fixed);

/// theta_jt * sales / cogs. Throws DomainError when cogs <= 0.
double compute_markup(const FirmObservation& obs, const IndustryElasticityTable& theta);

/// (sales - cogs - xsga) / sales; may be negative. Throws DomainError when sales <= 0.
double compute_profit_rate(const FirmObservation& obs);

/// Fills the derived markup and profit_rate vectors on every series.
void compute_outcomes(PanelDataset& data, const IndustryElasticityTable& theta);

struct EntryExitRow {
    Period period;
    int firm_count = 0;
    int entries = 0;
    int exits = 0;
    double entry_rate = 0.0;
    double exit_rate = 0.0;
};

/// A firm enters at its first observed period and exits at its last;
/// rates divide by firms active (observed) in the period.
std::vector<EntryExitRow> entry_exit_rates(const PanelDataset& data);

/// |sd/mean| over the trailing `window` observations (current included),
/// sample sd. A window with mean exactly zero yields nullopt. Output has
/// length max(0, n - window + 1).
std::vector<std::optional<double>> rolling_cv(std::span<const double> series, int window);

struct FirmCovariates {
    std::string firm_id;
    int naics2 = 0;
    double log_cogs = 0.0;
    double log_sales = 0.0;
    double log_emp = 0.0;
    double tenure = 0.0;        // years listed at treatment start
    double market_share = 0.0;  // window-average share of 2-digit industry sales
    bool missing = false;       // no usable observation in the window
};

/// Baseline firm characteristics averaged over [window_start_year,
/// window_end_year], before treatment_start. Firms without a usable window
/// observation are flagged missing and excluded from regressions downstream.
std::vector<FirmCovariates> derive_covariates(const PanelDataset& data, int window_start_year,
                                              int window_end_year, Period treatment_start);

enum class Outcome { markup, profit_rate };
std::string to_string(Outcome o);
Outcome outcome_from_string(std::string_view s);

struct ContiguousRun {
    std::vector<Period> periods;
    std::vector<double> values;
};

/// Longest gap-free run of pre-treatment observations of the chosen outcome;
/// on ties the most recent run wins.
ContiguousRun longest_pretreatment_run(const FirmSeries& series, Outcome outcome,
                                       Period treatment_start, Frequency f);

}  // namespace ccast
