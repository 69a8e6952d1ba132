#include "countercast/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "countercast/artifacts.hpp"
#include "countercast/csv.hpp"
#include "countercast/diagnostics.hpp"
#include "countercast/effects.hpp"
#include "countercast/errors.hpp"
#include "countercast/heterogeneity.hpp"
#include "countercast/hp_filter.hpp"
#include "countercast/stats.hpp"

namespace ccast::pipeline {

namespace {

namespace fs = std::filesystem;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string join(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

std::string factor_suffix(double factor) {
    if (factor == 1.0) return "";
    std::ostringstream os;
    os << "_x" << factor;
    return os.str();
}

std::string tag_of(const std::string& estimator, Outcome outcome, double factor = 1.0) {
    return estimator + "_" + to_string(outcome) + factor_suffix(factor);
}

struct Inputs {
    PanelDataset cleaned;  // outcomes computed
    IndustryElasticityTable theta;
    DeflatorSeries deflator;
    std::map<Period, double> cycle;  // standardized HP cycle; empty if unused
};

DeflatorSeries load_deflator(const RunConfig& cfg) {
    if (cfg.deflator_path.empty()) throw ConfigError("input.deflator not set");
    std::ifstream in(cfg.deflator_path);
    if (!in) throw DataError("cannot open deflator file: " + cfg.deflator_path);
    return DeflatorSeries::load(in, cfg.deflator_base_year);
}

IndustryElasticityTable load_theta(const RunConfig& cfg) {
    if (cfg.elasticity_path.empty()) throw ConfigError("input.elasticities not set");
    std::ifstream in(cfg.elasticity_path);
    if (!in) throw DataError("cannot open elasticity file: " + cfg.elasticity_path);
    return IndustryElasticityTable::load(in);
}

/// Standardized HP cycle of the configured source series, keyed by period.
std::map<Period, double> load_cycle(const RunConfig& cfg) {
    std::map<Period, double> out;
    if (cfg.cycle_path.empty()) return out;
    std::ifstream in(cfg.cycle_path);
    if (!in) throw DataError("cannot open cycle file: " + cfg.cycle_path);
    CsvReader reader(in);
    const auto c_period = reader.require("period");
    const auto c_value = reader.require("value");
    std::map<Period, double> level;
    std::vector<std::string> row;
    while (reader.next(row)) level[Period::parse(row.at(c_period))] = std::stod(row.at(c_value));
    if (level.size() < 4) throw DataError("cycle source series too short");

    std::vector<Period> periods;
    std::vector<double> values;
    for (const auto& [p, v] : level) {
        periods.push_back(p);
        values.push_back(v);
    }
    const double lambda = cfg.hp_lambda > 0.0 ? cfg.hp_lambda : hp_default_lambda(cfg.frequency);
    const HpDecomposition hp = hp_filter(values, lambda);

    // standardize on the pre-treatment sample only
    const Period treatment = cfg.treatment_period();
    std::vector<double> pre;
    for (std::size_t i = 0; i < periods.size(); ++i)
        if (periods[i] < treatment) pre.push_back(hp.cycle[i]);
    const auto transform = standardize(pre).transform;
    for (std::size_t i = 0; i < periods.size(); ++i) out[periods[i]] = transform.apply(hp.cycle[i]);
    return out;
}

Inputs load_inputs(const RunConfig& cfg) {
    Inputs inputs;
    require_artifact(join(cfg.outdir, "cleaned_panel.csv"), "ingest");
    std::ifstream in(join(cfg.outdir, "cleaned_panel.csv"));
    inputs.cleaned = load_panel(in, cfg.frequency).panel;
    inputs.theta = load_theta(cfg);
    inputs.deflator = load_deflator(cfg);
    compute_outcomes(inputs.cleaned, inputs.theta);
    inputs.cycle = load_cycle(cfg);
    return inputs;
}

double firm_weight(const FirmSeries& firm, const std::string& weighting, Period treatment) {
    if (weighting == "none") return 1.0;
    double sum = 0.0;
    int n = 0;
    for (const auto& o : firm.observations) {
        if (o.period >= treatment) continue;
        sum += weighting == "cogs" ? o.cogs : o.sales;
        ++n;
    }
    return n > 0 ? sum / n : 0.0;
}

/// Builds one FirmInput per firm: the contiguous pre-treatment run ending at
/// `cutoff`, the next `horizons` treated periods, and the firm weight.
/// Firms whose run does not reach the cutoff carry a defect and get skipped
/// by the fleet with that reason, preserving firm conservation.
std::vector<FirmInput> build_firm_inputs(const PanelDataset& panel, Outcome outcome,
                                         Period cutoff, int horizons,
                                         const std::string& weighting,
                                         const std::map<Period, double>& cycle) {
    const Frequency f = panel.frequency;
    const Period first_horizon = Period::from_index(cutoff.index(f) + 1, f);
    std::vector<FirmInput> out;
    out.reserve(panel.firms.size());
    for (const auto& firm : panel.firms) {
        FirmInput input;
        input.firm_id = firm.firm_id;
        input.fit_cutoff = cutoff;
        input.weight = firm_weight(firm, weighting, first_horizon);

        const ContiguousRun run = longest_pretreatment_run(firm, outcome, first_horizon, f);
        input.pre_periods = run.periods;
        input.pre_values = run.values;

        for (int h = 0; h < horizons; ++h) {
            const Period p = Period::from_index(cutoff.index(f) + 1 + h, f);
            input.treated_periods.push_back(p);
            double observed = kNaN;
            const auto& values = outcome == Outcome::markup ? firm.markup : firm.profit_rate;
            for (std::size_t i = 0; i < firm.observations.size(); ++i)
                if (firm.observations[i].period == p) observed = values[i];
            input.treated_observed.push_back(observed);
        }

        if (run.periods.empty()) {
            input.defect = "no pre-treatment observations";
        } else if (run.periods.back() != cutoff) {
            input.defect = "gap before the fit cutoff: pre-treatment run ends at " +
                           run.periods.back().str();
        } else if (!cycle.empty()) {
            std::vector<double> c;
            bool missing = false;
            for (const auto& p : input.pre_periods) {
                const auto it = cycle.find(p);
                if (it == cycle.end()) missing = true;
                else c.push_back(it->second);
            }
            for (const auto& p : input.treated_periods) {
                const auto it = cycle.find(p);
                if (it == cycle.end()) missing = true;
                else c.push_back(it->second);
            }
            if (missing)
                input.defect = "cycle series does not cover the firm's periods";
            else
                input.cycle = std::move(c);
        }
        out.push_back(std::move(input));
    }
    return out;
}

std::ofstream open_text(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    return out;
}

}  // namespace

void cmd_synth(const RunConfig& cfg) {
    fs::create_directories(cfg.outdir);
    DgpSpec spec = cfg.synth;
    spec.frequency = cfg.frequency;
    spec.seed = cfg.seed;
    const SyntheticPanel synthetic = generate_panel(spec);

    write_panel_csv(join(cfg.outdir, "panel.csv"), synthetic.panel);
    write_elasticity_csv(join(cfg.outdir, "elasticities.csv"), 1.0);

    std::set<Period> periods;
    for (const auto& firm : synthetic.panel.firms)
        for (const auto& o : firm.observations) periods.insert(o.period);
    write_deflator_csv(join(cfg.outdir, "deflator.csv"),
                       {periods.begin(), periods.end()}, 100.0, cfg.deflator_base_year);
    write_truth_csv(join(cfg.outdir, "truth.csv"), synthetic);
}

void cmd_ingest(const RunConfig& cfg) {
    fs::create_directories(cfg.outdir);
    if (cfg.panel_path.empty()) throw ConfigError("input.panel not set");
    std::ifstream in(cfg.panel_path);
    if (!in) throw DataError("cannot open panel file: " + cfg.panel_path);
    // fail fast on the other inputs the pipeline will need
    load_theta(cfg);
    const DeflatorSeries deflator = load_deflator(cfg);

    const LoadResult loaded = load_panel(in, cfg.frequency);
    const CleanResult cleaned = clean_panel(loaded.panel, cfg.cleaning_config(deflator));

    write_panel_csv(join(cfg.outdir, "cleaned_panel.csv"), cleaned.panel);
    auto log = open_text(join(cfg.outdir, "cleaning_log.txt"));
    log << "rows_dropped_unparseable=" << loaded.rows_dropped_unparseable << '\n'
        << cleaned.log.summary() << '\n';
}

namespace {

FleetSummary run_one_fleet(const RunConfig& cfg, const std::vector<FirmInput>& inputs,
                           const std::string& estimator, double factor,
                           const std::string& progress_label = "") {
    if (estimator == "bsts") {
        BstsFleetOptions options;
        options.spec = cfg.model;
        options.spec.has_seasonal = cfg.seasonal();
        options.spec.seed = cfg.seed;
        options.priors = factor == 1.0 ? cfg.priors : scale_hyperparameters(cfg.priors, factor);
        options.mode = cfg.parallel;
        options.workers = cfg.workers;
        options.keep_audit_draws = cfg.dump_draws;
        if (!progress_label.empty())
            options.progress = [progress_label](int done, int total) {
                std::fprintf(stderr, "fit %s: %d/%d firms\n", progress_label.c_str(), done, total);
            };
        return fit_fleet_bsts(inputs, options);
    }
    if (estimator == "llp_firm")
        return fit_fleet_llp_firm(inputs, cfg.llp_spec(), cfg.parallel, cfg.workers);
    if (estimator == "llp_panel") return fit_fleet_llp_panel(inputs, cfg.llp_spec());
    throw ConfigError("unknown estimator: " + estimator);
}

void write_fit_artifacts(const RunConfig& cfg, const std::string& tag,
                         const std::string& estimator, const FleetSummary& summary,
                         bool bayesian) {
    write_forecasts_csv(join(cfg.outdir, "forecasts_" + tag + ".csv"), summary, estimator);
    write_skips_csv(join(cfg.outdir, "skips_" + tag + ".csv"), summary);
    if (bayesian) {
        write_coverage_csv(join(cfg.outdir, "coverage_" + tag + ".csv"), summary);
        write_draws_sidecar(join(cfg.outdir, "draws_" + tag + ".bin"), summary);
        if (cfg.dump_draws)
            write_audit_sidecar(join(cfg.outdir, "draws_audit_" + tag + ".bin"), summary);
    }
    const double skip_fraction =
        summary.results.empty()
            ? 0.0
            : static_cast<double>(summary.n_skipped) / summary.results.size();
    if (skip_fraction > cfg.max_skip_fraction) {
        throw PartialFailureError("fit " + tag + ": skip fraction " +
                                  format_number(skip_fraction) + " exceeds limit " +
                                  format_number(cfg.max_skip_fraction));
    }
}

}  // namespace

void cmd_fit(const RunConfig& cfg) {
    const Inputs inputs = load_inputs(cfg);
    const Period treatment = cfg.treatment_period();
    const Period cutoff = Period::from_index(treatment.index(cfg.frequency) - 1, cfg.frequency);

    for (const auto& estimator : cfg.estimators) {
        const bool bayesian = estimator == "bsts";
        std::vector<double> factors{1.0};
        if (bayesian)
            for (double f : cfg.sensitivity)
                if (f != 1.0) factors.push_back(f);

        for (const Outcome outcome : cfg.outcomes) {
            const auto firm_inputs =
                build_firm_inputs(inputs.cleaned, outcome, cutoff, cfg.model.horizon,
                                  cfg.weighting, bayesian ? inputs.cycle : std::map<Period, double>{});
            for (const double factor : factors) {
                const std::string tag = tag_of(estimator, outcome, factor);
                const FleetSummary summary =
                    run_one_fleet(cfg, firm_inputs, estimator, factor, tag);
                write_fit_artifacts(cfg, tag, estimator, summary, bayesian);
                std::fprintf(stderr, "fit %s: %d fitted, %d skipped\n", tag.c_str(),
                             summary.n_fitted, summary.n_skipped);
            }
        }
    }
}

namespace {

struct EffectTable {
    std::vector<EffectEstimate> rows;
    std::vector<FirmFitResult> records;               // fitted firms
    std::map<std::string, Eigen::MatrixXd> draws;     // bayesian only
};

EffectTable load_effects_for_tag(const RunConfig& cfg, const std::string& tag, bool bayesian) {
    EffectTable table;
    const std::string forecasts = join(cfg.outdir, "forecasts_" + tag + ".csv");
    require_artifact(forecasts, "fit");
    table.records = read_forecasts_csv(forecasts);
    if (bayesian) {
        const std::string sidecar = join(cfg.outdir, "draws_" + tag + ".bin");
        require_artifact(sidecar, "fit");
        table.draws = read_draws_sidecar(sidecar);
    }
    for (const auto& r : table.records) {
        // keep only horizons with an observed value
        std::vector<Period> periods;
        std::vector<double> observed, points;
        std::vector<int> cols;
        for (std::size_t h = 0; h < r.horizon_periods.size(); ++h) {
            if (std::isnan(r.observed[h])) continue;
            periods.push_back(r.horizon_periods[h]);
            observed.push_back(r.observed[h]);
            points.push_back(r.forecast.point[h]);
            cols.push_back(static_cast<int>(h));
        }
        if (periods.empty()) continue;
        if (bayesian) {
            const auto it = table.draws.find(r.firm_id);
            if (it == table.draws.end())
                throw DataError("draws sidecar missing firm " + r.firm_id);
            Eigen::MatrixXd sub(it->second.rows(), cols.size());
            for (std::size_t j = 0; j < cols.size(); ++j) sub.col(j) = it->second.col(cols[j]);
            ForecastDistribution fc;
            for (int c : cols) {
                fc.point.push_back(r.forecast.point[c]);
                fc.interval.push_back(r.forecast.interval[c]);
            }
            auto rows = effect_estimates(r.firm_id, periods, observed, fc, sub);
            table.rows.insert(table.rows.end(), rows.begin(), rows.end());
        } else {
            auto rows = effect_estimates_point(r.firm_id, periods, observed, points);
            table.rows.insert(table.rows.end(), rows.begin(), rows.end());
        }
    }
    return table;
}

void write_effects_csv(const std::string& path, const std::vector<EffectEstimate>& rows) {
    auto out = open_text(path);
    out << "firm_id,period,horizon,observed,counterfactual,effect,lo95,hi95,posterior_p,"
           "significant,sign\n";
    for (const auto& e : rows) {
        out << e.firm_id << ',' << e.period.str() << ',' << e.horizon << ','
            << format_number(e.observed) << ',' << format_number(e.counterfactual_mean) << ','
            << format_number(e.effect) << ',';
        if (e.interval)
            out << format_number(e.interval->lo95) << ',' << format_number(e.interval->hi95);
        else
            out << "nan,nan";
        out << ',' << (e.posterior_p ? format_number(*e.posterior_p) : "nan") << ','
            << (e.significant ? (*e.significant ? "1" : "0") : "") << ',' << e.sign << '\n';
    }
}

std::vector<EffectEstimate> read_effects_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read file: " + path);
    CsvReader reader(in);
    const auto c_firm = reader.require("firm_id");
    const auto c_period = reader.require("period");
    const auto c_horizon = reader.require("horizon");
    const auto c_obs = reader.require("observed");
    const auto c_cf = reader.require("counterfactual");
    const auto c_effect = reader.require("effect");
    const auto c_p = reader.require("posterior_p");
    const auto c_sig = reader.require("significant");
    const auto c_sign = reader.require("sign");
    std::vector<EffectEstimate> out;
    std::vector<std::string> row;
    while (reader.next(row)) {
        EffectEstimate e;
        e.firm_id = row.at(c_firm);
        e.period = Period::parse(row.at(c_period));
        e.horizon = std::stoi(row.at(c_horizon));
        e.observed = std::stod(row.at(c_obs));
        e.counterfactual_mean = std::stod(row.at(c_cf));
        e.effect = std::stod(row.at(c_effect));
        const std::string p = row.at(c_p);
        if (p != "nan" && !p.empty()) e.posterior_p = std::stod(p);
        const std::string sig = row.at(c_sig);
        if (!sig.empty()) e.significant = sig == "1";
        e.sign = std::stoi(row.at(c_sign));
        out.push_back(std::move(e));
    }
    return out;
}

void write_fanchart_csv(const std::string& path, const AggregateSeries& series,
                        const std::map<Period, std::pair<double, int>>& observed_history) {
    auto out = open_text(path);
    out << "period,n_firms,observed,point,lo50,hi50,lo80,hi80,lo90,hi90,lo95,hi95\n";
    std::set<Period> treated;
    for (const auto& r : series.rows) treated.insert(r.period);
    for (const auto& [period, obs] : observed_history) {
        if (treated.contains(period)) continue;
        out << period.str() << ',' << obs.second << ',' << format_number(obs.first)
            << ",,,,,,,,,\n";
    }
    for (const auto& r : series.rows) {
        out << r.period.str() << ',' << r.n_firms << ',' << format_number(r.observed) << ','
            << format_number(r.point) << ',' << format_number(r.band.lo50) << ','
            << format_number(r.band.hi50) << ',' << format_number(r.band.lo80) << ','
            << format_number(r.band.hi80) << ',' << format_number(r.band.lo90) << ','
            << format_number(r.band.hi90) << ',' << format_number(r.band.lo95) << ','
            << format_number(r.band.hi95) << '\n';
    }
}

/// Observed per-period aggregate over the whole sample (history line).
std::map<Period, std::pair<double, int>> observed_aggregate_history(
    const PanelDataset& panel, Outcome outcome, AggregateStatistic stat,
    const std::string& weighting) {
    std::map<Period, std::vector<std::pair<double, double>>> values;  // (value, weight)
    for (const auto& firm : panel.firms) {
        const auto& outcomes = outcome == Outcome::markup ? firm.markup : firm.profit_rate;
        for (std::size_t i = 0; i < firm.observations.size(); ++i) {
            const auto& o = firm.observations[i];
            const double w = weighting == "none" ? 1.0
                             : weighting == "cogs" ? o.cogs
                                                   : o.sales;
            values[o.period].push_back({outcomes[i], w});
        }
    }
    std::map<Period, std::pair<double, int>> out;
    for (const auto& [period, rows] : values) {
        std::vector<double> v, w;
        for (const auto& [value, weight] : rows) {
            v.push_back(value);
            w.push_back(weight);
        }
        double agg = 0.0;
        switch (stat) {
            case AggregateStatistic::mean: {
                double num = 0.0, den = 0.0;
                for (std::size_t i = 0; i < v.size(); ++i) {
                    num += w[i] * v[i];
                    den += w[i];
                }
                agg = den > 0.0 ? num / den : kNaN;
                break;
            }
            case AggregateStatistic::q1: agg = quantile(v, 0.25); break;
            case AggregateStatistic::q2: agg = quantile(v, 0.50); break;
            case AggregateStatistic::q3: agg = quantile(v, 0.75); break;
        }
        out[period] = {agg, static_cast<int>(v.size())};
    }
    return out;
}

}  // namespace

void cmd_effects(const RunConfig& cfg) {
    const Inputs inputs = load_inputs(cfg);
    const Period treatment = cfg.treatment_period();

    for (const auto& estimator : cfg.estimators) {
        const bool bayesian = estimator == "bsts";
        std::vector<double> factors{1.0};
        if (bayesian)
            for (double f : cfg.sensitivity)
                if (f != 1.0) factors.push_back(f);

        for (const Outcome outcome : cfg.outcomes) {
            for (const double factor : factors) {
                const std::string tag = tag_of(estimator, outcome, factor);
                EffectTable table = load_effects_for_tag(cfg, tag, bayesian);
                write_effects_csv(join(cfg.outdir, "effects_" + tag + ".csv"), table.rows);

                if (bayesian) {
                    // fleet aggregation from the joint posterior simulations
                    std::vector<FleetFirmDraws> fleet;
                    for (const auto& r : table.records) {
                        FleetFirmDraws fd;
                        fd.firm_id = r.firm_id;
                        fd.weight = r.weight;
                        const auto& draws = table.draws.at(r.firm_id);
                        std::vector<int> cols;
                        for (std::size_t h = 0; h < r.horizon_periods.size(); ++h) {
                            if (std::isnan(r.observed[h])) continue;
                            fd.periods.push_back(r.horizon_periods[h]);
                            fd.observed.push_back(r.observed[h]);
                            cols.push_back(static_cast<int>(h));
                        }
                        if (fd.periods.empty()) continue;
                        fd.predictive.resize(draws.rows(), cols.size());
                        for (std::size_t j = 0; j < cols.size(); ++j)
                            fd.predictive.col(j) = draws.col(cols[j]);
                        fleet.push_back(std::move(fd));
                    }
                    if (!fleet.empty()) {
                        for (const auto stat :
                             {AggregateStatistic::mean, AggregateStatistic::q1,
                              AggregateStatistic::q2, AggregateStatistic::q3}) {
                            const auto series = aggregate_fleet(fleet, stat,
                                                                cfg.model.n_predictive_draws,
                                                                cfg.seed);
                            const auto history = observed_aggregate_history(
                                inputs.cleaned, outcome, stat,
                                stat == AggregateStatistic::mean ? cfg.weighting : "none");
                            write_fanchart_csv(join(cfg.outdir, "fanchart_" + tag + "_" +
                                                                    to_string(stat) + ".csv"),
                                               series, history);
                            if (stat != AggregateStatistic::mean) continue;
                            // headline numbers: markups as a share of the
                            // counterfactual, profit rates in level units
                            auto summary_out = open_text(
                                join(cfg.outdir, "aggregate_summary_" + tag + ".csv"));
                            summary_out << "period,observed,counterfactual_point,effect_level";
                            if (outcome == Outcome::markup)
                                summary_out << ",effect_share_of_counterfactual";
                            summary_out << '\n';
                            for (const auto& row : series.rows) {
                                summary_out << row.period.str() << ','
                                            << format_number(row.observed) << ','
                                            << format_number(row.point) << ','
                                            << format_number(row.observed - row.point);
                                if (outcome == Outcome::markup)
                                    summary_out << ','
                                                << format_number((row.observed - row.point) /
                                                                 row.point);
                                summary_out << '\n';
                            }
                        }
                    }

                    // significance fractions and FDR counts
                    const auto fractions = significant_fraction_series(table.rows);
                    auto frac_out = open_text(join(cfg.outdir, "fractions_" + tag + ".csv"));
                    frac_out << "period,n_firms,frac_significant,frac_positive,frac_negative\n";
                    for (const auto& f : fractions)
                        frac_out << f.period.str() << ',' << f.n_firms << ','
                                 << format_number(f.frac_significant) << ','
                                 << format_number(f.frac_positive) << ','
                                 << format_number(f.frac_negative) << '\n';

                    // firm-level p-value for the average treated-period effect
                    std::vector<double> avg_p;
                    for (const auto& r : table.records) {
                        const auto& draws = table.draws.at(r.firm_id);
                        double obs_sum = 0.0;
                        int n_obs = 0;
                        Eigen::VectorXd draw_mean = Eigen::VectorXd::Zero(draws.rows());
                        for (std::size_t h = 0; h < r.horizon_periods.size(); ++h) {
                            if (std::isnan(r.observed[h])) continue;
                            obs_sum += r.observed[h];
                            draw_mean += draws.col(static_cast<int>(h));
                            ++n_obs;
                        }
                        if (n_obs == 0) continue;
                        draw_mean /= n_obs;
                        avg_p.push_back(posterior_p_value(
                            {draw_mean.data(), static_cast<std::size_t>(draw_mean.size())},
                            obs_sum / n_obs));
                    }
                    const FdrCounts fdr = fdr_significant_count(avg_p, 0.05);
                    auto fdr_out = open_text(join(cfg.outdir, "fdr_" + tag + ".csv"));
                    fdr_out << "n_firms,n_rejected_bh,n_rejected_naive\n"
                            << avg_p.size() << ',' << fdr.n_rejected_bh << ','
                            << fdr.n_rejected_naive << '\n';

                    // scaled effects: markups only, baseline = covariate-window mean
                    if (outcome == Outcome::markup) {
                        std::vector<std::pair<std::string, double>> baselines;
                        for (const auto& firm : inputs.cleaned.firms) {
                            double sum = 0.0;
                            int n = 0;
                            for (std::size_t i = 0; i < firm.observations.size(); ++i) {
                                const int y = firm.observations[i].period.year;
                                if (y < cfg.covariate_window_start || y > cfg.covariate_window_end)
                                    continue;
                                sum += firm.markup[i];
                                ++n;
                            }
                            if (n > 0) baselines.push_back({firm.firm_id, sum / n});
                        }
                        const ScaledEffects scaled = scaled_effects(table.rows, baselines);
                        auto sc_out = open_text(join(cfg.outdir, "scaled_effects_" + tag + ".csv"));
                        sc_out << "firm_id,period,scaled_effect\n";
                        for (const auto& e : scaled.scaled)
                            sc_out << e.firm_id << ',' << e.period.str() << ','
                                   << format_number(e.effect) << '\n';
                    }
                } else {
                    // projection route: aggregate inference via the firm bootstrap
                    std::map<Period, int> period_col;
                    for (const auto& r : table.records)
                        for (const auto& p : r.horizon_periods) period_col.try_emplace(
                            p, static_cast<int>(period_col.size()));
                    const auto n_periods = static_cast<int>(period_col.size());
                    Eigen::MatrixXd effects = Eigen::MatrixXd::Constant(
                        static_cast<int>(table.records.size()), n_periods, kNaN);
                    std::vector<double> weights;
                    for (std::size_t i = 0; i < table.records.size(); ++i) {
                        const auto& r = table.records[i];
                        weights.push_back(r.weight);
                        for (std::size_t h = 0; h < r.horizon_periods.size(); ++h) {
                            if (std::isnan(r.observed[h])) continue;
                            effects(static_cast<int>(i), period_col.at(r.horizon_periods[h])) =
                                r.observed[h] - r.forecast.point[h];
                        }
                    }
                    const auto ci = bootstrap_aggregate_ci(effects, weights,
                                                           cfg.llp_spec().n_bootstrap, cfg.seed);
                    auto out = open_text(join(cfg.outdir, "aggregate_effects_" + tag + ".csv"));
                    out << "period,weighted_mean_effect,lo95,hi95\n";
                    for (const auto& [period, col] : period_col) {
                        double num = 0.0, den = 0.0;
                        for (int i = 0; i < effects.rows(); ++i) {
                            if (std::isnan(effects(i, col))) continue;
                            num += weights[i] * effects(i, col);
                            den += weights[i];
                        }
                        out << period.str() << ','
                            << format_number(den > 0.0 ? num / den : kNaN) << ','
                            << format_number(ci[col].lo) << ',' << format_number(ci[col].hi)
                            << '\n';
                    }
                }
            }
        }
    }

    // cross-firm correlation audit on the cleaned outcomes, 5-year windows
    for (const Outcome outcome : cfg.outcomes) {
        std::map<Period, int> period_col;
        for (const auto& firm : inputs.cleaned.firms)
            for (const auto& o : firm.observations)
                if (o.period < treatment) period_col.try_emplace(o.period, 0);
        int idx = 0;
        for (auto& [p, col] : period_col) col = idx++;
        Eigen::MatrixXd matrix = Eigen::MatrixXd::Constant(
            static_cast<int>(inputs.cleaned.firms.size()), idx, kNaN);
        for (std::size_t i = 0; i < inputs.cleaned.firms.size(); ++i) {
            const auto& firm = inputs.cleaned.firms[i];
            const auto& values = outcome == Outcome::markup ? firm.markup : firm.profit_rate;
            for (std::size_t j = 0; j < firm.observations.size(); ++j) {
                const auto it = period_col.find(firm.observations[j].period);
                if (it != period_col.end()) matrix(static_cast<int>(i), it->second) = values[j];
            }
        }
        const int window = 5 * periods_per_year(cfg.frequency);
        const PcAudit audit = pc_correlation_audit(matrix, window);
        auto out = open_text(join(cfg.outdir, "pc_audit_" + to_string(outcome) + ".csv"));
        out << "mean_r2,mean_pairwise_corr,n_windows,windows_skipped\n"
            << format_number(audit.mean_r2) << ',' << format_number(audit.mean_pairwise_corr)
            << ',' << audit.n_windows << ',' << audit.windows_skipped << '\n';
    }
}

void cmd_diagnose(const RunConfig& cfg) {
    const Inputs inputs = load_inputs(cfg);
    const Period treatment = cfg.treatment_period();

    // normality of differenced outcomes, with multiple-testing corrections
    for (const Outcome outcome : cfg.outcomes) {
        std::vector<std::pair<std::string, TestResult>> tests;
        int too_short = 0;
        for (const auto& firm : inputs.cleaned.firms) {
            const ContiguousRun run =
                longest_pretreatment_run(firm, outcome, treatment, cfg.frequency);
            if (run.values.size() < 9) {
                ++too_short;
                continue;
            }
            std::vector<double> diff;
            for (std::size_t i = 1; i < run.values.size(); ++i)
                diff.push_back(run.values[i] - run.values[i - 1]);
            try {
                tests.push_back({firm.firm_id, jarque_bera(diff)});
            } catch (const DegenerateSeriesError&) {
                ++too_short;
            }
        }
        auto out = open_text(join(cfg.outdir, "jb_" + to_string(outcome) + ".csv"));
        out << "firm_id,n,statistic,p_value\n";
        std::vector<double> pvals;
        for (const auto& [firm, r] : tests) {
            out << firm << ',' << r.n << ',' << format_number(r.statistic) << ','
                << format_number(r.p_value) << '\n';
            pvals.push_back(r.p_value);
        }
        auto summary = open_text(join(cfg.outdir, "jb_summary_" + to_string(outcome) + ".csv"));
        summary << "method,share_not_rejected,n_firms,n_too_short\n";
        for (const auto& [name, method] :
             std::vector<std::pair<std::string, PAdjustMethod>>{
                 {"bonferroni", PAdjustMethod::bonferroni},
                 {"holm", PAdjustMethod::holm},
                 {"hochberg", PAdjustMethod::hochberg},
                 {"hommel", PAdjustMethod::hommel},
                 {"benjamini_hochberg", PAdjustMethod::benjamini_hochberg}}) {
            double share = 0.0;
            if (!pvals.empty()) {
                const auto adjusted = adjust_pvalues(pvals, method);
                int not_rejected = 0;
                for (double a : adjusted)
                    if (a > 0.05) ++not_rejected;
                share = static_cast<double>(not_rejected) / adjusted.size();
            }
            summary << name << ',' << format_number(share) << ',' << pvals.size() << ','
                    << too_short << '\n';
        }
    }

    // pre-treatment coverage summary per fitted tag (Bayesian route)
    auto cov_out = open_text(join(cfg.outdir, "coverage_summary.csv"));
    cov_out << "tag,average,percentile_75,n_firms\n";
    for (const auto& estimator : cfg.estimators) {
        if (estimator != "bsts") continue;
        std::vector<double> factors{1.0};
        for (double f : cfg.sensitivity)
            if (f != 1.0) factors.push_back(f);
        for (const Outcome outcome : cfg.outcomes) {
            for (const double factor : factors) {
                const std::string tag = tag_of(estimator, outcome, factor);
                const std::string path = join(cfg.outdir, "coverage_" + tag + ".csv");
                require_artifact(path, "fit");
                const auto rows = read_coverage_csv(path);
                std::map<std::string, std::vector<const CoverageRow*>> by_firm;
                for (const auto& r : rows) by_firm[r.firm_id].push_back(&r);
                std::vector<double> fractions;
                for (const auto& [firm, frs] : by_firm) {
                    std::vector<double> obs, lo, hi;
                    for (const auto* r : frs) {
                        obs.push_back(r->observed);
                        lo.push_back(r->lo95);
                        hi.push_back(r->hi95);
                    }
                    fractions.push_back(coverage_fraction(obs, lo, hi));
                }
                if (fractions.empty()) continue;
                cov_out << tag << ',' << format_number(mean(fractions)) << ','
                        << format_number(quantile(fractions, 0.75)) << ',' << fractions.size()
                        << '\n';
            }
        }
    }

    // cycle-coefficient summary when the fit carried a cycle regressor
    for (const auto& estimator : cfg.estimators) {
        if (estimator != "bsts") continue;
        for (const Outcome outcome : cfg.outcomes) {
            const std::string tag = tag_of(estimator, outcome);
            const std::string path = join(cfg.outdir, "forecasts_" + tag + ".csv");
            if (!file_exists(path)) continue;
            const auto records = read_forecasts_csv(path);
            int with_alpha = 0, significant = 0, positive = 0, negative = 0;
            double alpha_sum = 0.0;
            for (const auto& r : records) {
                if (!r.alpha_interval95) continue;
                ++with_alpha;
                alpha_sum += r.alpha_mean;
                if (r.alpha_interval95->first > 0.0 || r.alpha_interval95->second < 0.0) {
                    ++significant;
                    (r.alpha_mean > 0.0 ? positive : negative)++;
                }
            }
            if (with_alpha == 0) continue;
            auto out = open_text(join(cfg.outdir, "cycle_summary_" + tag + ".csv"));
            out << "n_firms,mean_alpha,share_significant,share_positive,share_negative\n";
            out << with_alpha << ',' << format_number(alpha_sum / with_alpha) << ','
                << format_number(static_cast<double>(significant) / with_alpha) << ','
                << format_number(static_cast<double>(positive) / with_alpha) << ','
                << format_number(static_cast<double>(negative) / with_alpha) << '\n';
        }
    }
}

namespace {

struct FirmYearEffects {
    // firm -> year -> mean effect over that year's treated periods
    std::map<std::string, std::map<int, std::pair<double, int>>> sums;

    void add(const EffectEstimate& e) {
        auto& [sum, n] = sums[e.firm_id][e.period.year];
        sum += e.effect;
        ++n;
    }
};

std::vector<FirmEffectRow> average_rows(const FirmYearEffects& fx, const std::set<int>& years,
                                        const std::map<std::string, double>& outcome_level) {
    std::vector<FirmEffectRow> rows;
    for (const auto& [firm, by_year] : fx.sums) {
        double sum = 0.0;
        int n = 0;
        for (const auto& [year, acc] : by_year) {
            if (!years.contains(year)) continue;
            sum += acc.first / acc.second;
            ++n;
        }
        if (n == 0) continue;
        FirmEffectRow row;
        row.firm_id = firm;
        row.average_effect = sum / n;
        const auto it = outcome_level.find(firm);
        row.average_outcome = it != outcome_level.end() ? it->second : kNaN;
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string stars(double coef, double se) {
    if (se <= 0.0) return "";
    const double t = std::abs(coef / se);
    if (t >= 2.575829) return "***";  // 1%
    if (t >= 1.959964) return "**";   // 5%
    if (t >= 1.644854) return "*";    // 10%
    return "";
}

}  // namespace

void cmd_heterogeneity(const RunConfig& cfg) {
    const Inputs inputs = load_inputs(cfg);
    const Period treatment = cfg.treatment_period();
    const auto covariates =
        derive_covariates(inputs.cleaned, cfg.covariate_window_start, cfg.covariate_window_end,
                          treatment);
    std::map<std::string, const FirmCovariates*> cov_by_firm;
    for (const auto& c : covariates) cov_by_firm[c.firm_id] = &c;

    for (const auto& estimator : cfg.estimators) {
        for (const Outcome outcome : cfg.outcomes) {
            const std::string tag = tag_of(estimator, outcome);
            const std::string effects_path = join(cfg.outdir, "effects_" + tag + ".csv");
            require_artifact(effects_path, "effects");
            const auto effect_rows = read_effects_csv(effects_path);
            if (effect_rows.empty()) continue;

            FirmYearEffects fx;
            std::set<int> years;
            for (const auto& e : effect_rows) {
                fx.add(e);
                years.insert(e.period.year);
            }

            // observed outcome level in the treated years, for the "Mean" row
            std::map<std::string, double> outcome_level;
            std::map<std::string, std::pair<double, int>> level_acc;
            for (const auto& e : effect_rows) {
                auto& [sum, n] = level_acc[e.firm_id];
                sum += e.observed;
                ++n;
            }
            for (const auto& [firm, acc] : level_acc)
                outcome_level[firm] = acc.first / acc.second;

            auto out = open_text(join(cfg.outdir, "heterogeneity_" + tag + ".csv"));
            out << "sample,industry_fe,name,coef,robust_se,stars\n";
            auto stats_out =
                open_text(join(cfg.outdir, "heterogeneity_stats_" + tag + ".csv"));
            stats_out << "sample,industry_fe,n,r2,within_r2,mean_outcome,mean_effect,dropped\n";

            std::vector<std::pair<std::string, std::set<int>>> samples;
            samples.push_back({"all", years});
            for (int y : years) samples.push_back({std::to_string(y), {y}});

            for (const auto& [label, year_set] : samples) {
                const auto rows = average_rows(fx, year_set, outcome_level);
                for (const bool fe : {false, true}) {
                    HeterogeneityReport report;
                    try {
                        report = heterogeneity_regression(rows, covariates, fe);
                    } catch (const SampleSizeError&) {
                        continue;
                    }
                    for (std::size_t i = 0; i < report.names.size(); ++i)
                        out << label << ',' << (fe ? 1 : 0) << ',' << report.names[i] << ','
                            << format_number(report.coef[i]) << ','
                            << format_number(report.robust_se[i]) << ','
                            << stars(report.coef[i], report.robust_se[i]) << '\n';
                    stats_out << label << ',' << (fe ? 1 : 0) << ',' << report.n << ','
                              << format_number(report.r2) << ','
                              << (fe ? format_number(report.within_r2) : "") << ','
                              << format_number(report.mean_outcome) << ','
                              << format_number(report.mean_effect) << ',';
                    for (std::size_t i = 0; i < report.dropped.size(); ++i)
                        stats_out << (i ? ";" : "") << report.dropped[i];
                    stats_out << '\n';
                }
            }

            // binscatters of the all-years average effect
            const auto all_rows = average_rows(fx, years, outcome_level);
            auto bins_out = open_text(join(cfg.outdir, "binscatter_" + tag + ".csv"));
            bins_out << "covariate,bin,covariate_mean,effect_mean,lo,hi,n\n";
            const std::vector<std::pair<std::string, std::function<double(const FirmCovariates&)>>>
                axes = {{"log_cogs", [](const FirmCovariates& c) { return c.log_cogs; }},
                        {"log_sales", [](const FirmCovariates& c) { return c.log_sales; }},
                        {"log_emp", [](const FirmCovariates& c) { return c.log_emp; }},
                        {"tenure", [](const FirmCovariates& c) { return c.tenure; }},
                        {"market_share", [](const FirmCovariates& c) { return c.market_share; }}};
            for (const auto& [name, axis] : axes) {
                std::vector<double> xs, es;
                for (const auto& row : all_rows) {
                    const auto it = cov_by_firm.find(row.firm_id);
                    if (it == cov_by_firm.end() || it->second->missing) continue;
                    xs.push_back(axis(*it->second));
                    es.push_back(row.average_effect);
                }
                if (xs.size() < 2) continue;
                const BinscatterResult bins = binscatter(xs, es, 5);
                for (std::size_t b = 0; b < bins.bins.size(); ++b)
                    bins_out << name << ',' << b << ','
                             << format_number(bins.bins[b].covariate_mean) << ','
                             << format_number(bins.bins[b].effect_mean) << ','
                             << format_number(bins.bins[b].lo) << ','
                             << format_number(bins.bins[b].hi) << ',' << bins.bins[b].n << '\n';
            }

            // industry breakdown of per-year effects
            std::vector<IndustryEffectInput> industry_inputs;
            for (const auto& [firm, by_year] : fx.sums) {
                const auto it = cov_by_firm.find(firm);
                if (it == cov_by_firm.end()) continue;
                const FirmSeries* series = inputs.cleaned.find(firm);
                if (series == nullptr) continue;
                const double weight =
                    firm_weight(*series, cfg.weighting, treatment);
                for (const auto& [year, acc] : by_year) {
                    IndustryEffectInput in;
                    in.firm_id = firm;
                    in.naics2 = it->second->naics2 > 0 ? it->second->naics2
                                                       : series->observations.front().naics2;
                    in.year = year;
                    in.effect = acc.first / acc.second;
                    in.weight = weight;
                    industry_inputs.push_back(std::move(in));
                }
            }
            if (!industry_inputs.empty()) {
                const IndustryBreakdown breakdown = industry_breakdown(industry_inputs);
                auto ind_out = open_text(join(cfg.outdir, "industry_" + tag + ".csv"));
                ind_out << "naics2,year,weighted_mean_effect,n_firms,fleet_p25,fleet_p75\n";
                for (const auto& row : breakdown.rows)
                    ind_out << row.naics2 << ',' << row.year << ','
                            << format_number(row.weighted_mean_effect) << ',' << row.n_firms << ','
                            << format_number(breakdown.fleet_p25) << ','
                            << format_number(breakdown.fleet_p75) << '\n';
            }
        }
    }
}

namespace {

/// Table 4 protocol: refit with data up to the holdout cutoff, forecast the
/// following pre-treatment periods, and score against the realized values.
void write_quality_tables(const RunConfig& cfg, const Inputs& inputs) {
    const Frequency f = cfg.frequency;
    const Period cutoff{cfg.holdout_cutoff_year, f == Frequency::quarterly ? 4 : 0};
    const int horizons = cfg.holdout_horizons * periods_per_year(f);

    for (const auto& estimator : cfg.estimators) {
        for (const Outcome outcome : cfg.outcomes) {
            const auto firm_inputs = build_firm_inputs(inputs.cleaned, outcome, cutoff, horizons,
                                                       cfg.weighting, {});
            RunConfig holdout_cfg = cfg;
            holdout_cfg.sensitivity.clear();
            const FleetSummary summary = run_one_fleet(holdout_cfg, firm_inputs, estimator, 1.0);

            // score per calendar year of the holdout window
            std::map<int, std::vector<std::array<double, 2>>> by_year;  // actual, forecast
            std::map<int, std::vector<int>> firm_of_row;
            std::map<std::string, int> firm_index;
            for (const auto& r : summary.results) {
                if (!r.fitted) continue;
                const int fi =
                    firm_index.try_emplace(r.firm_id, static_cast<int>(firm_index.size()))
                        .first->second;
                for (std::size_t h = 0; h < r.horizon_periods.size(); ++h) {
                    if (std::isnan(r.observed[h])) continue;
                    const int year = r.horizon_periods[h].year;
                    by_year[year].push_back({r.observed[h], r.forecast.point[h]});
                    firm_of_row[year].push_back(fi);
                }
            }
            const std::string tag = tag_of(estimator, outcome);
            auto out = open_text(join(cfg.outdir, "quality_" + tag + ".csv"));
            out << "variable,year,me,rmse,mae,maes,mape,median_mape,n_firms,n_pairs\n";
            for (const auto& [year, pairs] : by_year) {
                std::vector<double> actual, forecast;
                for (const auto& [a, p] : pairs) {
                    actual.push_back(a);
                    forecast.push_back(p);
                }
                const QualityReport q = forecast_quality(actual, forecast, firm_of_row[year]);
                out << to_string(outcome) << ',' << year << ',' << format_number(q.me) << ','
                    << format_number(q.rmse) << ',' << format_number(q.mae) << ','
                    << format_number(q.maes) << ',' << format_number(q.mape) << ','
                    << format_number(q.median_mape) << ',' << q.n_firms << ','
                    << pairs.size() << '\n';
            }
        }
    }
}

void write_volatility_series(const RunConfig& cfg, const Inputs& inputs) {
    const int window = 5 * periods_per_year(cfg.frequency);
    for (const Outcome outcome : cfg.outcomes) {
        std::map<AggregateStatistic, std::map<Period, std::pair<double, int>>> series;
        for (const auto stat : {AggregateStatistic::mean, AggregateStatistic::q1,
                                AggregateStatistic::q2, AggregateStatistic::q3})
            series[stat] = observed_aggregate_history(
                inputs.cleaned, outcome, stat,
                stat == AggregateStatistic::mean ? cfg.weighting : "none");

        // common period axis
        std::vector<Period> periods;
        for (const auto& [p, v] : series[AggregateStatistic::mean]) periods.push_back(p);

        std::map<AggregateStatistic, std::vector<std::optional<double>>> cv;
        for (auto& [stat, by_period] : series) {
            std::vector<double> values;
            for (const auto& p : periods) values.push_back(by_period.at(p).first);
            cv[stat] = rolling_cv(values, window);
        }
        auto out = open_text(join(cfg.outdir, "volatility_" + to_string(outcome) + ".csv"));
        out << "period,cv_weighted_mean,cv_q1,cv_q2,cv_q3\n";
        for (std::size_t i = window - 1; i < periods.size(); ++i) {
            out << periods[i].str();
            for (const auto stat : {AggregateStatistic::mean, AggregateStatistic::q1,
                                    AggregateStatistic::q2, AggregateStatistic::q3}) {
                const auto& v = cv[stat][i - (window - 1)];
                out << ',' << (v ? format_number(*v) : "");
            }
            out << '\n';
        }
    }
}

}  // namespace

void cmd_report(const RunConfig& cfg) {
    const Inputs inputs = load_inputs(cfg);

    cmd_effects(cfg);
    cmd_heterogeneity(cfg);
    cmd_diagnose(cfg);

    write_quality_tables(cfg, inputs);
    write_volatility_series(cfg, inputs);

    const auto rates = entry_exit_rates(inputs.cleaned);
    auto out = open_text(join(cfg.outdir, "entry_exit.csv"));
    out << "period,firm_count,entries,exits,entry_rate,exit_rate\n";
    for (const auto& r : rates)
        out << r.period.str() << ',' << r.firm_count << ',' << r.entries << ',' << r.exits << ','
            << format_number(r.entry_rate) << ',' << format_number(r.exit_rate) << '\n';
}

void run_command(const std::string& command, const RunConfig& cfg) {
    if (command == "synth") cmd_synth(cfg);
    else if (command == "ingest") cmd_ingest(cfg);
    else if (command == "fit") cmd_fit(cfg);
    else if (command == "diagnose") cmd_diagnose(cfg);
    else if (command == "effects") cmd_effects(cfg);
    else if (command == "heterogeneity") cmd_heterogeneity(cfg);
    else if (command == "report") cmd_report(cfg);
    else throw ConfigError("unknown command: " + command);
}

void run_full(const RunConfig& cfg) {
    cmd_ingest(cfg);
    cmd_fit(cfg);
    cmd_report(cfg);
}

}  // namespace ccast::pipeline
