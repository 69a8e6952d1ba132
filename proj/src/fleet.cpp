#include "countercast/fleet.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>

#include "countercast/errors.hpp"
#include "countercast/stats.hpp"

namespace ccast {

namespace {

void check_guard(const FirmInput& firm) {
    if (!firm.defect.empty()) throw DataError(firm.defect);
    for (const Period& p : firm.pre_periods)
        if (p > firm.fit_cutoff)
            throw IntegrityError("data-access guard: firm " + firm.firm_id + " carries period " +
                                 p.str() + " past the fit cutoff " + firm.fit_cutoff.str());
    if (firm.pre_periods.size() != firm.pre_values.size() ||
        firm.treated_periods.size() != firm.treated_observed.size())
        throw AlignmentError("firm " + firm.firm_id + " inputs misaligned");
}

void summarize(FleetSummary& summary) {
    for (const auto& r : summary.results)
        r.fitted ? ++summary.n_fitted : ++summary.n_skipped;
}

}  // namespace

FleetSummary fit_fleet_bsts(const std::vector<FirmInput>& firms, const BstsFleetOptions& options) {
    options.spec.validate();
    options.priors.validate();

    FleetSummary summary;
    summary.results.resize(firms.size());
    const auto n = static_cast<int>(firms.size());
    std::atomic<int> done{0};

    parallel_for(n, options.mode, options.workers, [&](int i) {
        const FirmInput& firm = firms[i];
        FirmFitResult& result = summary.results[i];
        result.firm_id = firm.firm_id;
        result.weight = firm.weight;
        result.horizon_periods = firm.treated_periods;
        result.observed = firm.treated_observed;
        try {
            check_guard(firm);
            ModelSpec spec = options.spec;
            spec.horizon = static_cast<int>(firm.treated_periods.size());
            if (spec.horizon == 0) throw SampleSizeError("no treated periods to forecast");
            spec.seed = substream_seed(options.spec.seed, firm.firm_id);
            spec.has_cycle = !firm.cycle.empty();

            const auto standardized = standardize(firm.pre_values);
            const PosteriorDraws draws =
                gibbs_run(standardized.values, standardized.transform, spec, options.priors,
                          firm.cycle);

            result.forecast = forecast_distribution(draws);
            result.predictive = draws.predictive;
            result.pre_periods = firm.pre_periods;
            result.pre_observed = firm.pre_values;
            const auto T = static_cast<int>(firm.pre_values.size());
            result.band_lo95.resize(T);
            result.band_hi95.resize(T);
            for (int t = 0; t < T; ++t) {
                const Eigen::VectorXd col = draws.onestep.col(t);
                std::vector<double> sorted(col.data(), col.data() + col.size());
                std::sort(sorted.begin(), sorted.end());
                result.band_lo95[t] = quantile_sorted(sorted, 0.025);
                result.band_hi95[t] = quantile_sorted(sorted, 0.975);
            }
            result.var_obs = mean(draws.obs_var);
            result.var_trend = mean(draws.trend_var);
            if (!draws.seasonal_var.empty()) result.var_seasonal = mean(draws.seasonal_var);
            if (!draws.cycle_coef.empty()) {
                result.alpha_mean = mean(draws.cycle_coef);
                const IntervalSet ai = interval_set(draws.cycle_coef);
                result.alpha_interval95 = {ai.lo95, ai.hi95};
            }
            if (draws.ess_warning) result.flags = "ess_warning";
            if (options.keep_audit_draws) {
                result.audit_columns = {"obs_var", "trend_var"};
                int cols = 2;
                if (!draws.seasonal_var.empty()) {
                    result.audit_columns.push_back("seasonal_var");
                    ++cols;
                }
                if (!draws.cycle_coef.empty()) {
                    result.audit_columns.push_back("cycle_coef");
                    ++cols;
                }
                result.audit_draws.resize(draws.retained(), cols);
                for (int g = 0; g < draws.retained(); ++g) {
                    int c = 0;
                    result.audit_draws(g, c++) = draws.obs_var[g];
                    result.audit_draws(g, c++) = draws.trend_var[g];
                    if (!draws.seasonal_var.empty())
                        result.audit_draws(g, c++) = draws.seasonal_var[g];
                    if (!draws.cycle_coef.empty())
                        result.audit_draws(g, c++) = draws.cycle_coef[g];
                }
            }
            result.fitted = true;
        } catch (const Error& e) {
            result.skip_reason = e.what();
        }
        const int completed = done.fetch_add(1) + 1;
        if (options.progress && (completed % 100 == 0 || completed == n))
            options.progress(completed, n);
    });
    summarize(summary);
    return summary;
}

FleetSummary fit_fleet_llp_firm(const std::vector<FirmInput>& firms, const LlpSpec& spec,
                                ParallelMode mode, int workers) {
    FleetSummary summary;
    summary.results.resize(firms.size());
    const auto n = static_cast<int>(firms.size());
    parallel_for(n, mode, workers, [&](int i) {
        const FirmInput& firm = firms[i];
        FirmFitResult& result = summary.results[i];
        result.firm_id = firm.firm_id;
        result.weight = firm.weight;
        result.horizon_periods = firm.treated_periods;
        result.observed = firm.treated_observed;
        try {
            check_guard(firm);
            LlpSpec firm_spec = spec;
            firm_spec.horizon = static_cast<int>(firm.treated_periods.size());
            if (firm_spec.horizon == 0) throw SampleSizeError("no treated periods to forecast");
            const LlpFirmFit fit = fit_firm_llp(firm.pre_values, firm_spec);
            result.chosen_lag = fit.chosen_lag;
            result.forecast.point = fit.forecasts;
            result.fitted = true;
        } catch (const Error& e) {
            result.skip_reason = e.what();
        }
    });
    summarize(summary);
    return summary;
}

FleetSummary fit_fleet_llp_panel(const std::vector<FirmInput>& firms, const LlpSpec& spec) {
    FleetSummary summary;
    summary.results.resize(firms.size());

    int horizon = 0;
    std::vector<PanelSeries> panel;
    for (std::size_t i = 0; i < firms.size(); ++i) {
        const FirmInput& firm = firms[i];
        auto& result = summary.results[i];
        result.firm_id = firm.firm_id;
        result.weight = firm.weight;
        result.horizon_periods = firm.treated_periods;
        result.observed = firm.treated_observed;
        try {
            check_guard(firm);
        } catch (const Error& e) {
            result.skip_reason = e.what();
            continue;
        }
        horizon = std::max(horizon, static_cast<int>(firm.treated_periods.size()));
        panel.push_back({firm.firm_id, firm.pre_values});
    }
    LlpSpec pooled_spec = spec;
    pooled_spec.horizon = horizon;
    const PanelLlpFit fit = fit_panel_llp(panel, pooled_spec);

    for (std::size_t i = 0; i < firms.size(); ++i) {
        auto& result = summary.results[i];
        if (!result.skip_reason.empty()) continue;
        const auto it = fit.forecasts.find(result.firm_id);
        if (it == fit.forecasts.end()) {
            result.skip_reason = "no lag window for panel forecast";
            continue;
        }
        result.chosen_lag = fit.chosen_lag;
        const auto H = result.horizon_periods.size();
        result.forecast.point.assign(it->second.begin(), it->second.begin() + H);
        for (const auto& id : fit.pooled_only)
            if (id == result.firm_id) result.flags = "pooled_only";
        result.fitted = true;
    }
    summarize(summary);
    return summary;
}

}  // namespace ccast
