#include "countercast/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "countercast/errors.hpp"
#include "countercast/stats.hpp"

namespace ccast {

double jarque_bera_statistic(int n, double skewness, double kurtosis) {
    const double excess = kurtosis - 3.0;
    return n / 6.0 * (skewness * skewness + excess * excess / 4.0);
}

TestResult jarque_bera(std::span<const double> x) {
    const auto n = static_cast<int>(x.size());
    if (n < 8) throw SampleSizeError("jarque-bera needs at least 8 observations");
    const double s = skewness_biased(x);
    const double k = kurtosis_biased(x);
    TestResult r;
    r.n = n;
    r.statistic = jarque_bera_statistic(n, s, k);
    r.p_value = chi2_2df_upper_tail(r.statistic);
    return r;
}

PAdjustMethod p_adjust_from_string(std::string_view s) {
    if (s == "bonferroni") return PAdjustMethod::bonferroni;
    if (s == "holm") return PAdjustMethod::holm;
    if (s == "hochberg") return PAdjustMethod::hochberg;
    if (s == "hommel") return PAdjustMethod::hommel;
    if (s == "benjamini_hochberg" || s == "bh") return PAdjustMethod::benjamini_hochberg;
    throw ConfigError("unknown p-adjustment method: " + std::string(s));
}

namespace {

std::vector<std::size_t> order_ascending(std::span<const double> p) {
    std::vector<std::size_t> idx(p.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    return idx;
}

std::vector<double> hommel_adjust(std::span<const double> p) {
    const auto n = static_cast<int>(p.size());
    const auto order = order_ascending(p);
    std::vector<double> ps(n);
    for (int i = 0; i < n; ++i) ps[i] = p[order[i]];

    double q_min = ps[0] * n;
    for (int i = 1; i < n; ++i) q_min = std::min(q_min, n * ps[i] / (i + 1));
    std::vector<double> q(n, q_min), pa(n, q_min);
    for (int m = n - 1; m >= 2; --m) {
        const int n1 = n - m + 1;
        // q1 = min over the m-1 largest p of m*p[i] / (1-based rank within that tail + 1)
        double q1 = m * ps[n1] / 2.0;
        for (int i = n1 + 1; i < n; ++i) q1 = std::min(q1, m * ps[i] / (i - n + m + 1));
        for (int i = 0; i < n1; ++i) q[i] = std::min(m * ps[i], q1);
        for (int i = n1; i < n; ++i) q[i] = q[n1 - 1];
        for (int i = 0; i < n; ++i) pa[i] = std::max(pa[i], q[i]);
    }
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) out[order[i]] = std::min(1.0, std::max(pa[i], ps[i]));
    return out;
}

}  // namespace

std::vector<double> adjust_pvalues(std::span<const double> p, PAdjustMethod method) {
    const auto n = static_cast<int>(p.size());
    for (double v : p)
        if (!(v >= 0.0 && v <= 1.0)) throw DomainError("p-value outside [0,1]");
    if (n == 0) return {};
    std::vector<double> out(n);

    switch (method) {
        case PAdjustMethod::bonferroni:
            for (int i = 0; i < n; ++i) out[i] = std::min(1.0, p[i] * n);
            return out;
        case PAdjustMethod::holm: {
            const auto order = order_ascending(p);
            double running = 0.0;
            for (int i = 0; i < n; ++i) {
                running = std::max(running, std::min(1.0, (n - i) * p[order[i]]));
                out[order[i]] = running;
            }
            return out;
        }
        case PAdjustMethod::hochberg: {
            const auto order = order_ascending(p);
            double running = 1.0;
            for (int i = n - 1; i >= 0; --i) {
                running = std::min(running, std::min(1.0, (n - i) * p[order[i]]));
                out[order[i]] = running;
            }
            return out;
        }
        case PAdjustMethod::hommel:
            if (n == 1) return {p[0]};
            return hommel_adjust(p);
        case PAdjustMethod::benjamini_hochberg: {
            const auto order = order_ascending(p);
            double running = 1.0;
            for (int i = n - 1; i >= 0; --i) {
                running = std::min(running, std::min(1.0, p[order[i]] * n / (i + 1)));
                out[order[i]] = running;
            }
            return out;
        }
    }
    throw ConfigError("unhandled p-adjustment method");
}

double coverage_fraction(std::span<const double> observed, std::span<const double> lo,
                         std::span<const double> hi) {
    if (observed.size() != lo.size() || observed.size() != hi.size())
        throw AlignmentError("coverage_fraction inputs differ in length");
    if (observed.empty()) throw DomainError("coverage_fraction of empty series");
    int outside = 0;
    for (std::size_t i = 0; i < observed.size(); ++i)
        if (observed[i] < lo[i] || observed[i] > hi[i]) ++outside;
    return static_cast<double>(outside) / static_cast<double>(observed.size());
}

QualityReport forecast_quality(std::span<const double> actuals,
                               std::span<const double> forecasts,
                               std::span<const int> firm_of_row) {
    const auto n = actuals.size();
    if (n == 0) throw DataError("forecast_quality on empty input");
    if (forecasts.size() != n || firm_of_row.size() != n)
        throw AlignmentError("forecast_quality inputs differ in length");

    QualityReport r;
    double se = 0.0, ae = 0.0, err = 0.0, pe = 0.0;
    int n_pe = 0;
    std::map<int, std::pair<double, int>> firm_pe;  // firm -> (sum |pct err|, count)
    for (std::size_t i = 0; i < n; ++i) {
        const double e = actuals[i] - forecasts[i];
        err += e;
        se += e * e;
        ae += std::abs(e);
        if (actuals[i] != 0.0) {
            const double ape = std::abs(e) / std::abs(actuals[i]);
            pe += ape;
            ++n_pe;
            auto& [sum, cnt] = firm_pe[firm_of_row[i]];
            sum += ape;
            ++cnt;
        } else {
            ++r.mape_excluded;
            firm_pe.try_emplace(firm_of_row[i], 0.0, 0);
        }
    }
    const auto dn = static_cast<double>(n);
    r.me = err / dn;
    r.rmse = std::sqrt(se / dn);
    r.mae = ae / dn;
    r.mape = n_pe > 0 ? pe / n_pe : 0.0;
    const double sd = n >= 2 ? sample_sd(actuals) : 0.0;
    r.maes = sd > 0.0 ? r.mae / sd : 0.0;

    std::vector<double> per_firm;
    for (const auto& [firm, acc] : firm_pe)
        if (acc.second > 0) per_firm.push_back(acc.first / acc.second);
    r.n_firms = static_cast<int>(firm_pe.size());
    r.median_mape = per_firm.empty() ? 0.0 : median(per_firm);
    return r;
}

}  // namespace ccast
