#include "countercast/panel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <istream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "countercast/csv.hpp"
#include "countercast/errors.hpp"
#include "countercast/stats.hpp"

namespace ccast {

namespace {

std::optional<double> parse_double(const std::string& s) {
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::optional<int> parse_int(const std::string& s) {
    if (s.empty()) return std::nullopt;
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

}  // namespace

std::size_t PanelDataset::n_observations() const {
    std::size_t n = 0;
    for (const auto& f : firms) n += f.observations.size();
    return n;
}

const FirmSeries* PanelDataset::find(const std::string& firm_id) const {
    auto it = std::lower_bound(firms.begin(), firms.end(), firm_id,
                               [](const FirmSeries& f, const std::string& id) { return f.firm_id < id; });
    if (it == firms.end() || it->firm_id != firm_id) return nullptr;
    return &*it;
}

void IndustryElasticityTable::set_default(double theta) { default_ = theta; }

void IndustryElasticityTable::set_industry_default(int naics2, double theta) {
    industry_default_[naics2] = theta;
}

void IndustryElasticityTable::insert(int naics2, Period period, double theta) {
    exact_[{naics2, {period.year, period.quarter}}] = theta;
}

double IndustryElasticityTable::lookup(int naics2, Period period) const {
    if (auto it = exact_.find({naics2, {period.year, period.quarter}}); it != exact_.end())
        return it->second;
    if (auto it = industry_default_.find(naics2); it != industry_default_.end()) return it->second;
    if (default_) return *default_;
    throw CoverageError("no elasticity for industry " + std::to_string(naics2) + " at " +
                        period.str());
}

IndustryElasticityTable IndustryElasticityTable::load(std::istream& in) {
    CsvReader reader(in);
    const auto c_naics = reader.require("naics2");
    const auto c_period = reader.require("period");
    const auto c_theta = reader.require("theta");
    IndustryElasticityTable table;
    std::vector<std::string> row;
    while (reader.next(row)) {
        const auto theta = parse_double(row.at(c_theta));
        if (!theta) throw SchemaError("unparseable theta: " + row.at(c_theta));
        if (*theta <= 0.0) throw IntegrityError("elasticity must be positive, got " + row.at(c_theta));
        const bool wild_industry = row.at(c_naics) == "*";
        const bool wild_period = row.at(c_period) == "*";
        if (wild_industry && wild_period) {
            table.set_default(*theta);
        } else if (wild_industry) {
            throw SchemaError("industry wildcard requires period wildcard too");
        } else {
            const auto naics = parse_int(row.at(c_naics));
            if (!naics) throw SchemaError("unparseable naics2: " + row.at(c_naics));
            if (wild_period)
                table.set_industry_default(*naics, *theta);
            else
                table.insert(*naics, Period::parse(row.at(c_period)), *theta);
        }
    }
    return table;
}

double DeflatorSeries::factor(Period p) const {
    const auto it = index.find(p);
    if (it == index.end()) throw CoverageError("deflator missing period " + p.str());
    double base_sum = 0.0;
    int base_n = 0;
    for (const auto& [period, value] : index) {
        if (period.year == base_year) {
            base_sum += value;
            ++base_n;
        }
    }
    if (base_n == 0)
        throw CoverageError("deflator missing base year " + std::to_string(base_year));
    return it->second / (base_sum / base_n);
}

DeflatorSeries DeflatorSeries::load(std::istream& in, int base_year) {
    CsvReader reader(in);
    const auto c_period = reader.require("period");
    const auto c_index = reader.require("index");
    DeflatorSeries d;
    d.base_year = base_year;
    std::vector<std::string> row;
    while (reader.next(row)) {
        const auto value = parse_double(row.at(c_index));
        if (!value) throw SchemaError("unparseable deflator index: " + row.at(c_index));
        d.index[Period::parse(row.at(c_period))] = *value;
    }
    return d;
}

CleaningConfig CleaningConfig::defaults(Frequency f) {
    CleaningConfig cfg;
    cfg.min_pre_periods = f == Frequency::quarterly ? 20 : 3;
    cfg.treatment_start = year_start(2020, f);
    return cfg;
}

std::string CleaningLog::summary() const {
    std::ostringstream os;
    os << "rows_in=" << rows_in << " step1_nonpositive=" << removed_nonpositive
       << " step3_ratio_trim=" << removed_ratio_trim << " step4_missing_ids=" << removed_missing_ids
       << " step5_share_trim=" << removed_share_trim << " step6_short_firms=" << firms_removed_short
       << " step6_rows=" << rows_removed_short << " rows_out=" << rows_out;
    return os.str();
}

LoadResult load_panel(std::istream& in, Frequency frequency) {
    CsvReader reader(in);
    const auto c_firm = reader.require("firm_id");
    const auto c_period = reader.require("period");
    const auto c_sales = reader.require("sales");
    const auto c_cogs = reader.require("cogs");
    const auto c_xsga = reader.require("xsga");
    const auto c_ppegt = reader.require("ppegt");
    const auto c_emp = reader.require("emp");
    const auto c_naics = reader.require("naics2");
    const auto c_wage = reader.find("wage_bill");

    const std::size_t n_columns = reader.header().size();
    std::unordered_map<std::string, std::vector<FirmObservation>> by_firm;
    std::size_t dropped = 0;
    std::vector<std::string> row;
    while (reader.next(row)) {
        if (row.size() != n_columns) {
            ++dropped;
            continue;
        }
        FirmObservation obs;
        obs.firm_id = row[c_firm];
        Period period;
        try {
            period = Period::parse(row[c_period]);
        } catch (const DomainError&) {
            ++dropped;
            continue;
        }
        if ((frequency == Frequency::quarterly) != period.is_quarterly())
            throw IntegrityError("period " + period.str() + " does not match declared " +
                                 to_string(frequency) + " frequency");
        obs.period = period;
        const auto sales = parse_double(row[c_sales]);
        const auto cogs = parse_double(row[c_cogs]);
        const auto xsga = parse_double(row[c_xsga]);
        const auto ppegt = parse_double(row[c_ppegt]);
        const auto emp = parse_double(row[c_emp]);
        if (!sales || !cogs || !xsga || !ppegt || !emp) {
            ++dropped;
            continue;
        }
        obs.sales = *sales;
        obs.cogs = *cogs;
        obs.xsga = *xsga;
        obs.ppegt = *ppegt;
        obs.employment = *emp;
        obs.naics2 = parse_int(row[c_naics]).value_or(0);
        if (c_wage) obs.wage_bill = parse_double(row[*c_wage]);
        by_firm[obs.firm_id].push_back(std::move(obs));
    }

    PanelDataset panel;
    panel.frequency = frequency;
    panel.firms.reserve(by_firm.size());
    std::string duplicates;
    for (auto& [id, observations] : by_firm) {
        std::sort(observations.begin(), observations.end(),
                  [](const FirmObservation& a, const FirmObservation& b) { return a.period < b.period; });
        for (std::size_t i = 1; i < observations.size(); ++i) {
            if (observations[i].period == observations[i - 1].period)
                duplicates += " (" + id + ", " + observations[i].period.str() + ")";
        }
        FirmSeries series;
        series.firm_id = id;
        series.observations = std::move(observations);
        panel.firms.push_back(std::move(series));
    }
    if (!duplicates.empty()) throw IntegrityError("duplicate (firm, period) rows:" + duplicates);
    std::sort(panel.firms.begin(), panel.firms.end(),
              [](const FirmSeries& a, const FirmSeries& b) { return a.firm_id < b.firm_id; });
    return {std::move(panel), dropped};
}

namespace {

struct FlatRow {
    FirmObservation obs;
    bool alive = true;
};

double cost_numerator(const FirmObservation& o, CostShareNumerator n) {
    switch (n) {
        case CostShareNumerator::cogs: return o.cogs;
        case CostShareNumerator::ppegt: return o.ppegt;
        case CostShareNumerator::xsga: return o.xsga;
    }
    return o.cogs;
}

/// Computes per-period [lo, hi] percentile bounds of `value` over live rows.
std::map<Period, std::pair<double, double>> period_bounds(
    const std::vector<FlatRow>& rows, double lo_pct, double hi_pct,
    const std::function<double(const FirmObservation&)>& value) {
    std::map<Period, std::vector<double>> samples;
    for (const auto& r : rows)
        if (r.alive) samples[r.obs.period].push_back(value(r.obs));
    std::map<Period, std::pair<double, double>> bounds;
    for (auto& [period, v] : samples) {
        std::sort(v.begin(), v.end());
        bounds[period] = {quantile_sorted(v, lo_pct / 100.0), quantile_sorted(v, hi_pct / 100.0)};
    }
    return bounds;
}

/// Kills rows strictly outside the per-period bounds; ties at a bound stay.
std::size_t apply_trim(std::vector<FlatRow>& rows,
                       const std::map<Period, std::pair<double, double>>& bounds,
                       const std::function<double(const FirmObservation&)>& value) {
    std::size_t removed = 0;
    for (auto& r : rows) {
        if (!r.alive) continue;
        const auto it = bounds.find(r.obs.period);
        if (it == bounds.end()) continue;
        const double v = value(r.obs);
        if (v < it->second.first || v > it->second.second) {
            r.alive = false;
            ++removed;
        }
    }
    return removed;
}

CleanResult clean_panel_impl(const PanelDataset& data, const CleaningConfig& cfg,
                             const TrimThresholds* fixed) {
    CleaningLog log;
    std::vector<FlatRow> rows;
    for (const auto& firm : data.firms)
        for (const auto& obs : firm.observations) rows.push_back({obs, true});
    log.rows_in = rows.size();

    // Deflator must cover every period present before anything else runs.
    std::set<Period> periods;
    for (const auto& r : rows) periods.insert(r.obs.period);
    std::string gaps;
    for (const auto& p : periods)
        if (!cfg.deflator.index.contains(p)) gaps += " " + p.str();
    if (!gaps.empty()) throw CoverageError("deflator does not cover periods:" + gaps);

    // step 1: non-positive sales/COGS, negative SG&A
    for (auto& r : rows) {
        if (r.obs.sales <= 0.0 || r.obs.cogs <= 0.0 || r.obs.xsga < 0.0) {
            r.alive = false;
            ++log.removed_nonpositive;
        }
    }

    // step 2: deflate currency columns to base-year units
    for (auto& r : rows) {
        if (!r.alive) continue;
        const double f = cfg.deflator.factor(r.obs.period);
        r.obs.sales /= f;
        r.obs.cogs /= f;
        r.obs.xsga /= f;
        r.obs.ppegt /= f;
        if (r.obs.wage_bill) r.obs.wage_bill = *r.obs.wage_bill / f;
    }

    // step 3: per-period trims of COGS/sales and XSGA/sales
    const auto cogs_ratio = [](const FirmObservation& o) { return o.cogs / o.sales; };
    const auto xsga_ratio = [](const FirmObservation& o) { return o.xsga / o.sales; };
    log.thresholds.cogs_ratio =
        fixed ? fixed->cogs_ratio : period_bounds(rows, cfg.ratio_trim_lo, cfg.ratio_trim_hi, cogs_ratio);
    log.thresholds.xsga_ratio =
        fixed ? fixed->xsga_ratio : period_bounds(rows, cfg.ratio_trim_lo, cfg.ratio_trim_hi, xsga_ratio);
    log.removed_ratio_trim += apply_trim(rows, log.thresholds.cogs_ratio, cogs_ratio);
    log.removed_ratio_trim += apply_trim(rows, log.thresholds.xsga_ratio, xsga_ratio);

    // step 4: identifiers
    for (auto& r : rows) {
        if (!r.alive) continue;
        if (r.obs.firm_id.empty() || r.obs.naics2 <= 0) {
            r.alive = false;
            ++log.removed_missing_ids;
        }
    }

    // step 5: cost-share trims
    const auto num = cfg.share_numerator;
    const auto share_basic = [num](const FirmObservation& o) {
        return cost_numerator(o, num) / (o.cogs + o.ppegt);
    };
    const auto share_full = [num](const FirmObservation& o) {
        return cost_numerator(o, num) / (o.cogs + o.ppegt + o.xsga);
    };
    log.thresholds.share_basic =
        fixed ? fixed->share_basic : period_bounds(rows, cfg.share_trim_lo, cfg.share_trim_hi, share_basic);
    log.thresholds.share_full =
        fixed ? fixed->share_full : period_bounds(rows, cfg.share_trim_lo, cfg.share_trim_hi, share_full);
    log.removed_share_trim += apply_trim(rows, log.thresholds.share_basic, share_basic);
    log.removed_share_trim += apply_trim(rows, log.thresholds.share_full, share_full);

    // regroup
    std::map<std::string, std::vector<FirmObservation>> by_firm;
    for (auto& r : rows)
        if (r.alive) by_firm[r.obs.firm_id].push_back(std::move(r.obs));

    // step 6: pre-treatment length and survival into treatment
    PanelDataset out;
    out.frequency = data.frequency;
    for (auto& [id, observations] : by_firm) {
        int pre = 0;
        for (const auto& o : observations)
            if (o.period < cfg.treatment_start) ++pre;
        const bool survives = observations.back().period >= cfg.treatment_start;
        if (pre < cfg.min_pre_periods || !survives) {
            ++log.firms_removed_short;
            log.rows_removed_short += observations.size();
            continue;
        }
        FirmSeries series;
        series.firm_id = id;
        series.observations = std::move(observations);
        out.firms.push_back(std::move(series));
    }
    std::sort(out.firms.begin(), out.firms.end(),
              [](const FirmSeries& a, const FirmSeries& b) { return a.firm_id < b.firm_id; });
    log.rows_out = out.n_observations();
    if (out.firms.empty()) throw DataError("cleaning removed every firm: " + log.summary());
    return {std::move(out), std::move(log)};
}

}  // namespace

CleanResult clean_panel(const PanelDataset& data, const CleaningConfig& cfg) {
    return clean_panel_impl(data, cfg, nullptr);
}

CleanResult clean_panel(const PanelDataset& data, const CleaningConfig& cfg,
                        const TrimThresholds& fixed) {
    return clean_panel_impl(data, cfg, &fixed);
}

double compute_markup(const FirmObservation& obs, const IndustryElasticityTable& theta) {
    if (obs.cogs <= 0.0) throw DomainError("markup requires cogs > 0");
    return theta.lookup(obs.naics2, obs.period) * obs.sales / obs.cogs;
}

double compute_profit_rate(const FirmObservation& obs) {
    if (obs.sales <= 0.0) throw DomainError("profit rate requires sales > 0");
    return (obs.sales - obs.cogs - obs.xsga) / obs.sales;
}

void compute_outcomes(PanelDataset& data, const IndustryElasticityTable& theta) {
    for (auto& firm : data.firms) {
        firm.markup.clear();
        firm.profit_rate.clear();
        firm.markup.reserve(firm.observations.size());
        firm.profit_rate.reserve(firm.observations.size());
        for (const auto& obs : firm.observations) {
            firm.markup.push_back(compute_markup(obs, theta));
            firm.profit_rate.push_back(compute_profit_rate(obs));
        }
    }
}

std::vector<EntryExitRow> entry_exit_rates(const PanelDataset& data) {
    if (data.firms.empty()) throw DataError("entry/exit rates of empty panel");
    std::map<Period, EntryExitRow> by_period;
    for (const auto& firm : data.firms) {
        for (const auto& obs : firm.observations) {
            auto& row = by_period[obs.period];
            row.period = obs.period;
            ++row.firm_count;
        }
        ++by_period[firm.entry_period()].entries;
        ++by_period[firm.exit_period()].exits;
    }
    std::vector<EntryExitRow> out;
    out.reserve(by_period.size());
    for (auto& [period, row] : by_period) {
        row.entry_rate = static_cast<double>(row.entries) / row.firm_count;
        row.exit_rate = static_cast<double>(row.exits) / row.firm_count;
        out.push_back(row);
    }
    return out;
}

std::vector<std::optional<double>> rolling_cv(std::span<const double> series, int window) {
    std::vector<std::optional<double>> out;
    if (window < 2) throw DomainError("rolling_cv window must be >= 2");
    if (static_cast<int>(series.size()) < window) return out;
    for (std::size_t t = static_cast<std::size_t>(window) - 1; t < series.size(); ++t) {
        const auto chunk = series.subspan(t + 1 - window, window);
        const double m = mean(chunk);
        if (m == 0.0) {
            out.push_back(std::nullopt);
            continue;
        }
        out.push_back(std::abs(sample_sd(chunk) / m));
    }
    return out;
}

std::vector<FirmCovariates> derive_covariates(const PanelDataset& data, int window_start_year,
                                              int window_end_year, Period treatment_start) {
    const Period window_end{window_end_year,
                            data.frequency == Frequency::quarterly ? 4 : 0};
    if (window_end >= treatment_start)
        throw DomainError("baseline window must precede treatment start");

    const auto in_window = [&](Period p) {
        return p.year >= window_start_year && p.year <= window_end_year;
    };

    // industry sales totals per period
    std::map<std::pair<int, Period>, double> industry_sales;
    for (const auto& firm : data.firms)
        for (const auto& obs : firm.observations)
            if (in_window(obs.period)) industry_sales[{obs.naics2, obs.period}] += obs.sales;

    std::vector<FirmCovariates> out;
    out.reserve(data.firms.size());
    for (const auto& firm : data.firms) {
        FirmCovariates cov;
        cov.firm_id = firm.firm_id;
        double sum_lc = 0, sum_ls = 0, sum_le = 0, sum_share = 0;
        int n = 0, n_emp = 0;
        for (const auto& obs : firm.observations) {
            if (!in_window(obs.period)) continue;
            cov.naics2 = obs.naics2;
            sum_lc += std::log(obs.cogs);
            sum_ls += std::log(obs.sales);
            sum_share += obs.sales / industry_sales.at({obs.naics2, obs.period});
            if (obs.employment > 0.0) {
                sum_le += std::log(obs.employment);
                ++n_emp;
            }
            ++n;
        }
        if (n == 0 || n_emp == 0) {
            cov.missing = true;
        } else {
            cov.log_cogs = sum_lc / n;
            cov.log_sales = sum_ls / n;
            cov.log_emp = sum_le / n_emp;
            cov.market_share = sum_share / n;
        }
        const double per_year = periods_per_year(data.frequency);
        cov.tenure = (treatment_start.index(data.frequency) -
                      firm.entry_period().index(data.frequency)) /
                     per_year;
        out.push_back(std::move(cov));
    }
    return out;
}

std::string to_string(Outcome o) { return o == Outcome::markup ? "markup" : "profit_rate"; }

Outcome outcome_from_string(std::string_view s) {
    if (s == "markup") return Outcome::markup;
    if (s == "profit_rate") return Outcome::profit_rate;
    throw ConfigError("unknown outcome: " + std::string(s));
}

ContiguousRun longest_pretreatment_run(const FirmSeries& series, Outcome outcome,
                                       Period treatment_start, Frequency f) {
    const auto& values = outcome == Outcome::markup ? series.markup : series.profit_rate;
    if (values.size() != series.observations.size())
        throw IntegrityError("derived outcomes not computed for firm " + series.firm_id);

    ContiguousRun best, current;
    int prev_index = 0;
    for (std::size_t i = 0; i < series.observations.size(); ++i) {
        const Period p = series.observations[i].period;
        if (p >= treatment_start) break;
        const int idx = p.index(f);
        if (!current.periods.empty() && idx != prev_index + 1) {
            if (current.periods.size() >= best.periods.size()) best = std::move(current);
            current = {};
        }
        current.periods.push_back(p);
        current.values.push_back(values[i]);
        prev_index = idx;
    }
    if (current.periods.size() >= best.periods.size()) best = std::move(current);
    return best;
}

}  // namespace ccast
