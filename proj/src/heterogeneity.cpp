#include "countercast/heterogeneity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include <Eigen/Dense>

#include "countercast/errors.hpp"
#include "countercast/ols.hpp"
#include "countercast/stats.hpp"

namespace ccast {

HeterogeneityReport heterogeneity_regression(std::span<const FirmEffectRow> effects,
                                             std::span<const FirmCovariates> covariates,
                                             bool industry_fe) {
    std::map<std::string, const FirmCovariates*> cov_by_firm;
    for (const auto& c : covariates)
        if (!c.missing) cov_by_firm[c.firm_id] = &c;

    struct Row {
        double effect, outcome;
        const FirmCovariates* cov;
    };
    std::vector<Row> rows;
    for (const auto& e : effects) {
        const auto it = cov_by_firm.find(e.firm_id);
        if (it == cov_by_firm.end()) continue;
        rows.push_back({e.average_effect, e.average_outcome, it->second});
    }
    const auto n = static_cast<int>(rows.size());
    if (n < 10) throw SampleSizeError("heterogeneity regression needs >= 10 complete firms");

    static const std::vector<std::string> covariate_names = {
        "log_cogs", "log_sales", "log_emp", "tenure", "market_share"};
    const int p = static_cast<int>(covariate_names.size());

    Eigen::MatrixXd X(n, p);
    Eigen::VectorXd y(n);
    std::vector<int> group(n);
    for (int i = 0; i < n; ++i) {
        const auto& c = *rows[i].cov;
        X(i, 0) = c.log_cogs;
        X(i, 1) = c.log_sales;
        X(i, 2) = c.log_emp;
        X(i, 3) = c.tenure;
        X(i, 4) = c.market_share;
        y(i) = rows[i].effect;
        group[i] = c.naics2;
    }

    HeterogeneityReport report;
    report.industry_fe = industry_fe;
    report.n = n;
    {
        std::vector<double> eff(n), outc(n);
        for (int i = 0; i < n; ++i) {
            eff[i] = rows[i].effect;
            outc[i] = rows[i].outcome;
        }
        report.mean_effect = mean(eff);
        report.mean_outcome = mean(outc);
    }

    Eigen::MatrixXd Xw = X;
    Eigen::VectorXd yw = y;
    int absorbed = 0;
    if (industry_fe) {
        within_demean(Xw, yw, group);
        absorbed = static_cast<int>(std::set<int>(group.begin(), group.end()).size());
    } else {
        Eigen::MatrixXd with_const(n, p + 1);
        with_const.col(0).setOnes();
        with_const.rightCols(p) = Xw;
        Xw = with_const;
    }

    std::vector<std::string> names;
    if (!industry_fe) names.push_back("intercept");
    names.insert(names.end(), covariate_names.begin(), covariate_names.end());

    // drop perfectly collinear columns, keeping track of names
    std::vector<int> keep(Xw.cols());
    std::iota(keep.begin(), keep.end(), 0);
    for (const int col : collinear_columns(Xw)) {
        report.dropped.push_back(names[col]);
        keep.erase(std::remove(keep.begin(), keep.end(), col), keep.end());
    }
    if (!report.dropped.empty()) {
        Eigen::MatrixXd reduced(n, static_cast<int>(keep.size()));
        std::vector<std::string> kept_names;
        for (std::size_t j = 0; j < keep.size(); ++j) {
            reduced.col(static_cast<int>(j)) = Xw.col(keep[j]);
            kept_names.push_back(names[keep[j]]);
        }
        Xw = reduced;
        names = kept_names;
    }

    const OlsFit fit = ols(Xw, yw, absorbed);
    report.names = names;
    report.coef.assign(fit.beta.data(), fit.beta.data() + fit.beta.size());
    report.robust_se.assign(fit.se_hc1.data(), fit.se_hc1.data() + fit.se_hc1.size());

    if (industry_fe) {
        const double wtss = yw.squaredNorm();  // demeaned outcome variation
        report.within_r2 =
            wtss > 1e-12 * std::max(1.0, y.squaredNorm()) ? 1.0 - fit.ssr / wtss : 0.0;
        // total R^2 counts the industry means as explained variation
        const double tss = (y.array() - y.mean()).matrix().squaredNorm();
        report.r2 = tss > 1e-12 * std::max(1.0, y.squaredNorm()) ? 1.0 - fit.ssr / tss : 0.0;
    } else {
        report.r2 = fit.r2;
    }
    return report;
}

BinscatterResult binscatter(std::span<const double> covariate, std::span<const double> effects,
                            int n_bins) {
    if (covariate.size() != effects.size()) throw AlignmentError("binscatter inputs differ");
    if (n_bins < 1) throw DomainError("binscatter needs at least 1 bin");
    const auto n = covariate.size();
    std::set<double> distinct(covariate.begin(), covariate.end());
    BinscatterResult result;
    int bins = n_bins;
    if (static_cast<int>(distinct.size()) < n_bins) {
        bins = static_cast<int>(distinct.size());
        result.reduced = true;
    }
    if (bins < 1) throw DomainError("binscatter with empty input");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return covariate[a] < covariate[b]; });

    result.bins.resize(bins);
    for (int b = 0; b < bins; ++b) {
        const auto lo = n * b / bins;
        const auto hi = n * (b + 1) / bins;
        std::vector<double> cov_vals, eff_vals;
        for (auto i = lo; i < hi; ++i) {
            cov_vals.push_back(covariate[order[i]]);
            eff_vals.push_back(effects[order[i]]);
        }
        auto& bin = result.bins[b];
        bin.n = static_cast<int>(eff_vals.size());
        bin.covariate_mean = mean(cov_vals);
        bin.effect_mean = mean(eff_vals);
        const double sd = eff_vals.size() >= 2 ? sample_sd(eff_vals) : 0.0;
        const double half = 1.96 * sd / std::sqrt(static_cast<double>(bin.n));
        bin.lo = bin.effect_mean - half;
        bin.hi = bin.effect_mean + half;
    }
    return result;
}

IndustryBreakdown industry_breakdown(std::span<const IndustryEffectInput> effects) {
    if (effects.empty()) throw DataError("industry breakdown with no effects");
    std::map<std::pair<int, int>, IndustryEffectRow> cells;  // (naics2, year)
    std::map<std::pair<int, int>, double> weighted_sum;
    for (const auto& e : effects) {
        if (e.naics2 <= 0) throw IntegrityError("firm " + e.firm_id + " lacks an industry code");
        auto& cell = cells[{e.naics2, e.year}];
        cell.naics2 = e.naics2;
        cell.year = e.year;
        cell.weight_total += e.weight;
        ++cell.n_firms;
        weighted_sum[{e.naics2, e.year}] += e.weight * e.effect;
    }

    IndustryBreakdown out;
    for (auto& [key, cell] : cells) {
        cell.weighted_mean_effect =
            cell.weight_total > 0.0 ? weighted_sum[key] / cell.weight_total : 0.0;
        out.rows.push_back(cell);
    }

    // order industries ascending by their effect in the first year
    const int first_year = std::min_element(effects.begin(), effects.end(),
                                            [](const auto& a, const auto& b) {
                                                return a.year < b.year;
                                            })
                               ->year;
    std::map<int, double> first_year_effect;
    for (const auto& row : out.rows)
        if (row.year == first_year) first_year_effect[row.naics2] = row.weighted_mean_effect;
    std::stable_sort(out.rows.begin(), out.rows.end(),
                     [&](const IndustryEffectRow& a, const IndustryEffectRow& b) {
                         const double ea = first_year_effect.count(a.naics2)
                                               ? first_year_effect.at(a.naics2)
                                               : std::numeric_limits<double>::infinity();
                         const double eb = first_year_effect.count(b.naics2)
                                               ? first_year_effect.at(b.naics2)
                                               : std::numeric_limits<double>::infinity();
                         if (ea != eb) return ea < eb;
                         if (a.naics2 != b.naics2) return a.naics2 < b.naics2;
                         return a.year < b.year;
                     });

    std::vector<double> all_effects;
    all_effects.reserve(effects.size());
    for (const auto& e : effects) all_effects.push_back(e.effect);
    out.fleet_p25 = quantile(all_effects, 0.25);
    out.fleet_p75 = quantile(all_effects, 0.75);
    return out;
}

}  // namespace ccast
