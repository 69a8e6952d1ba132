#include "countercast/effects.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "countercast/diagnostics.hpp"
#include "countercast/errors.hpp"
#include "countercast/parallel.hpp"
#include "countercast/rng.hpp"
#include "countercast/stats.hpp"

namespace ccast {

namespace {

int sign_of(double v) { return v > 0.0 ? 1 : v < 0.0 ? -1 : 0; }

}  // namespace

double posterior_p_value(std::span<const double> draws, double observed) {
    if (draws.empty()) throw DomainError("posterior p-value from empty draws");
    const auto n = static_cast<double>(draws.size());
    double at_least = 0.0, at_most = 0.0;
    for (double d : draws) {
        if (d >= observed) ++at_least;
        if (d <= observed) ++at_most;
    }
    const double tail = std::min(at_least, at_most) / n;
    const double floor = 2.0 / (n + 1.0);
    return std::min(1.0, std::max(2.0 * tail, floor));
}

std::vector<EffectEstimate> effect_estimates(const std::string& firm_id,
                                             std::span<const Period> periods,
                                             std::span<const double> observed,
                                             const ForecastDistribution& forecast,
                                             const Eigen::MatrixXd& predictive) {
    const auto H = periods.size();
    if (observed.size() != H || forecast.point.size() != H ||
        static_cast<std::size_t>(predictive.cols()) != H)
        throw AlignmentError("effect horizons not aligned for firm " + firm_id);

    std::vector<EffectEstimate> out;
    out.reserve(H);
    for (std::size_t h = 0; h < H; ++h) {
        EffectEstimate e;
        e.firm_id = firm_id;
        e.period = periods[h];
        e.horizon = static_cast<int>(h) + 1;
        e.observed = observed[h];
        e.counterfactual_mean = forecast.point[h];
        e.effect = e.observed - e.counterfactual_mean;
        e.interval = forecast.interval[h];
        const Eigen::VectorXd col = predictive.col(static_cast<int>(h));
        e.posterior_p = posterior_p_value({col.data(), static_cast<std::size_t>(col.size())},
                                          e.observed);
        e.significant = e.observed < e.interval->lo95 || e.observed > e.interval->hi95;
        e.sign = sign_of(e.effect);
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<EffectEstimate> effect_estimates_point(const std::string& firm_id,
                                                   std::span<const Period> periods,
                                                   std::span<const double> observed,
                                                   std::span<const double> forecasts) {
    const auto H = periods.size();
    if (observed.size() != H || forecasts.size() != H)
        throw AlignmentError("effect horizons not aligned for firm " + firm_id);
    std::vector<EffectEstimate> out;
    out.reserve(H);
    for (std::size_t h = 0; h < H; ++h) {
        EffectEstimate e;
        e.firm_id = firm_id;
        e.period = periods[h];
        e.horizon = static_cast<int>(h) + 1;
        e.observed = observed[h];
        e.counterfactual_mean = forecasts[h];
        e.effect = e.observed - e.counterfactual_mean;
        e.sign = sign_of(e.effect);
        out.push_back(std::move(e));
    }
    return out;
}

std::string to_string(AggregateStatistic s) {
    switch (s) {
        case AggregateStatistic::mean: return "mean";
        case AggregateStatistic::q1: return "q1";
        case AggregateStatistic::q2: return "q2";
        case AggregateStatistic::q3: return "q3";
    }
    return "mean";
}

namespace {

double apply_statistic(AggregateStatistic stat, std::span<const double> values,
                       std::span<const double> weights) {
    switch (stat) {
        case AggregateStatistic::mean: {
            double num = 0.0, den = 0.0;
            for (std::size_t i = 0; i < values.size(); ++i) {
                num += weights[i] * values[i];
                den += weights[i];
            }
            if (den <= 0.0) throw DomainError("aggregate weights sum to zero");
            return num / den;
        }
        case AggregateStatistic::q1: return quantile(values, 0.25);
        case AggregateStatistic::q2: return quantile(values, 0.50);
        case AggregateStatistic::q3: return quantile(values, 0.75);
    }
    throw DomainError("unhandled statistic");
}

}  // namespace

AggregateSeries aggregate_fleet(const std::vector<FleetFirmDraws>& firms,
                                AggregateStatistic statistic, int n_sims, std::uint64_t seed,
                                ParallelMode mode) {
    if (firms.empty()) throw DataError("aggregate_fleet with no firms");
    if (n_sims < 1) throw ConfigError("n_sims must be >= 1");

    AggregateSeries out;

    // per-firm map simulation -> predictive draw row
    std::vector<std::vector<int>> sim_row(firms.size());
    for (std::size_t i = 0; i < firms.size(); ++i) {
        const auto available = static_cast<int>(firms[i].predictive.rows());
        if (available == 0) throw DataError("firm " + firms[i].firm_id + " has no draws");
        sim_row[i].resize(n_sims);
        if (available >= n_sims) {
            for (int s = 0; s < n_sims; ++s) sim_row[i][s] = s;
        } else {
            out.resample_warning = true;
            Rng rng(substream_seed(seed, firms[i].firm_id));
            for (int s = 0; s < n_sims; ++s)
                sim_row[i][s] = static_cast<int>(rng.uniform() * available) % available;
        }
    }

    // collect the union of treated periods
    std::map<Period, std::vector<std::pair<std::size_t, std::size_t>>> members;  // firm, column
    for (std::size_t i = 0; i < firms.size(); ++i) {
        if (firms[i].observed.size() != firms[i].periods.size() ||
            static_cast<std::size_t>(firms[i].predictive.cols()) != firms[i].periods.size())
            throw AlignmentError("firm " + firms[i].firm_id + " draws not aligned with periods");
        for (std::size_t c = 0; c < firms[i].periods.size(); ++c)
            members[firms[i].periods[c]].push_back({i, c});
    }

    for (const auto& [period, present] : members) {
        AggregateRow row;
        row.period = period;
        row.n_firms = static_cast<int>(present.size());

        std::vector<double> values(present.size()), weights(present.size());
        for (std::size_t j = 0; j < present.size(); ++j) {
            values[j] = firms[present[j].first].observed[present[j].second];
            weights[j] = firms[present[j].first].weight;
        }
        row.observed = apply_statistic(statistic, values, weights);

        std::vector<double> sims(n_sims);
        parallel_for(n_sims, mode, 0, [&](int s) {
            std::vector<double> sim_values(present.size());
            for (std::size_t j = 0; j < present.size(); ++j) {
                const auto [fi, col] = present[j];
                sim_values[j] = firms[fi].predictive(sim_row[fi][s], static_cast<int>(col));
            }
            sims[s] = apply_statistic(statistic, sim_values, weights);
        });
        row.point = mean(sims);
        row.band = interval_set(sims);
        out.rows.push_back(row);
    }
    return out;
}

std::vector<SignificantFractions> significant_fraction_series(
    std::span<const EffectEstimate> effects) {
    std::map<Period, SignificantFractions> by_period;
    std::map<Period, std::array<int, 3>> counts;  // significant, positive, negative
    for (const auto& e : effects) {
        auto& f = by_period[e.period];
        f.period = e.period;
        ++f.n_firms;
        if (e.significant.value_or(false)) {
            auto& c = counts[e.period];
            ++c[0];
            if (e.sign > 0)
                ++c[1];
            else
                ++c[2];
        }
    }
    std::vector<SignificantFractions> out;
    out.reserve(by_period.size());
    for (auto& [period, f] : by_period) {
        const auto& c = counts[period];
        f.frac_significant = static_cast<double>(c[0]) / f.n_firms;
        f.frac_positive = static_cast<double>(c[1]) / f.n_firms;
        f.frac_negative = static_cast<double>(c[2]) / f.n_firms;
        out.push_back(f);
    }
    return out;
}

FdrCounts fdr_significant_count(std::span<const double> p, double q) {
    FdrCounts out;
    if (p.empty()) return out;
    const auto adjusted = adjust_pvalues(p, PAdjustMethod::benjamini_hochberg);
    for (double a : adjusted)
        if (a <= q) ++out.n_rejected_bh;
    for (double v : p)
        if (v <= 0.05) ++out.n_rejected_naive;
    return out;
}

PcAudit pc_correlation_audit(const Eigen::MatrixXd& outcomes_by_firm, int window) {
    const auto n_firms = static_cast<int>(outcomes_by_firm.rows());
    const auto n_periods = static_cast<int>(outcomes_by_firm.cols());
    if (window < 2) throw DomainError("pc audit window must be >= 2");

    PcAudit out;
    double r2_sum = 0.0;
    int r2_n = 0;
    double corr_sum = 0.0;
    int corr_n = 0;

    for (int start = 0; start + window <= n_periods; start += window) {
        // firms with complete data in the block
        std::vector<int> complete;
        for (int f = 0; f < n_firms; ++f) {
            bool ok = true;
            for (int t = start; t < start + window; ++t)
                if (!std::isfinite(outcomes_by_firm(f, t))) ok = false;
            if (ok) complete.push_back(f);
        }
        if (complete.size() < 2) {
            ++out.windows_skipped;
            continue;
        }
        ++out.n_windows;

        // periods x firms, column-centered
        Eigen::MatrixXd block(window, complete.size());
        for (std::size_t j = 0; j < complete.size(); ++j)
            for (int t = 0; t < window; ++t) block(t, j) = outcomes_by_firm(complete[j], start + t);
        const Eigen::RowVectorXd col_means = block.colwise().mean();
        block.rowwise() -= col_means;

        Eigen::BDCSVD<Eigen::MatrixXd> svd(block, Eigen::ComputeThinU);
        const Eigen::VectorXd pc = svd.matrixU().col(0) * svd.singularValues()(0);
        const std::span<const double> pc_view(pc.data(), static_cast<std::size_t>(pc.size()));

        for (std::size_t j = 0; j < complete.size(); ++j) {
            const Eigen::VectorXd firm_col = block.col(static_cast<int>(j));
            const std::span<const double> firm_view(firm_col.data(),
                                                    static_cast<std::size_t>(firm_col.size()));
            double r2;
            try {
                const double c = correlation(firm_view, pc_view);
                r2 = c * c;
            } catch (const DegenerateSeriesError&) {
                continue;  // constant firm within the window
            }
            r2_sum += r2;
            ++r2_n;
        }
        for (std::size_t a = 0; a < complete.size(); ++a) {
            const Eigen::VectorXd col_a = block.col(static_cast<int>(a));
            for (std::size_t b = a + 1; b < complete.size(); ++b) {
                const Eigen::VectorXd col_b = block.col(static_cast<int>(b));
                try {
                    corr_sum += correlation({col_a.data(), static_cast<std::size_t>(col_a.size())},
                                            {col_b.data(), static_cast<std::size_t>(col_b.size())});
                    ++corr_n;
                } catch (const DegenerateSeriesError&) {
                }
            }
        }
    }
    if (r2_n > 0) out.mean_r2 = r2_sum / r2_n;
    if (corr_n > 0) out.mean_pairwise_corr = corr_sum / corr_n;
    return out;
}

ScaledEffects scaled_effects(std::span<const EffectEstimate> effects,
                             const std::vector<std::pair<std::string, double>>& baselines) {
    std::map<std::string, double> base;
    for (const auto& [id, b] : baselines) base[id] = b;

    ScaledEffects out;
    std::map<std::string, bool> excluded_seen;
    for (const auto& e : effects) {
        const auto it = base.find(e.firm_id);
        if (it == base.end() || it->second == 0.0) {
            if (!excluded_seen[e.firm_id]) {
                out.excluded.push_back(e.firm_id);
                excluded_seen[e.firm_id] = true;
            }
            continue;
        }
        EffectEstimate s = e;
        s.effect = e.effect / it->second;
        s.observed = e.observed / it->second;
        s.counterfactual_mean = e.counterfactual_mean / it->second;
        s.interval.reset();  // bands do not survive the rescale of the effect alone
        out.scaled.push_back(std::move(s));
    }
    return out;
}

}  // namespace ccast
