#include "countercast/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "countercast/errors.hpp"
#include "countercast/rng.hpp"

namespace ccast {

Period DgpSpec::treatment_start() const {
    const int start = year_start(start_year, frequency).index(frequency);
    return Period::from_index(start + n_periods - treated_periods, frequency);
}

namespace {

struct OutcomePath {
    std::vector<double> value;  // y(0): no treatment
    std::vector<double> trend;
};

OutcomePath simulate_outcome(const DgpSpec& spec, int n, double base, double noise_scale,
                             Rng& rng) {
    OutcomePath path;
    path.value.resize(n);
    path.trend.resize(n);
    double level = base;
    double g[3] = {0.0, 0.0, 0.0};  // gamma_{t-1}, gamma_{t-2}, gamma_{t-3}
    const double init_sd = spec.seasonal_init_sd * noise_scale;
    if (spec.seasonal && init_sd > 0.0)
        for (double& v : g) v = rng.normal(0.0, init_sd);
    const double sd_obs = std::sqrt(spec.obs_var) * noise_scale;
    const double sd_trend = std::sqrt(spec.trend_var) * noise_scale;
    const double sd_seasonal = std::sqrt(spec.seasonal_var) * noise_scale;
    for (int t = 0; t < n; ++t) {
        if (t > 0) level += rng.normal(0.0, sd_trend);
        double seasonal = 0.0;
        if (spec.seasonal) {
            seasonal = t == 0 ? (init_sd > 0.0 ? rng.normal(0.0, init_sd) : 0.0)
                              : -(g[0] + g[1] + g[2]) + rng.normal(0.0, sd_seasonal);
            g[2] = g[1];
            g[1] = g[0];
            g[0] = seasonal;
        }
        path.trend[t] = level;
        path.value[t] = level + seasonal + rng.normal(0.0, sd_obs);
    }
    return path;
}

}  // namespace

SyntheticPanel generate_panel(const DgpSpec& spec) {
    if (spec.n_firms < 1 || spec.n_periods < 2 || spec.treated_periods < 0 ||
        spec.treated_periods >= spec.n_periods)
        throw ConfigError("invalid synthetic panel spec");

    SyntheticPanel out;
    out.panel.frequency = spec.frequency;
    out.treatment_start = spec.treatment_start();
    const int start_index = year_start(spec.start_year, spec.frequency).index(spec.frequency);
    const int treat_index = out.treatment_start.index(spec.frequency);
    const double per_year = periods_per_year(spec.frequency);

    int id_width = 1;
    for (int v = spec.n_firms; v >= 10; v /= 10) ++id_width;

    for (int f = 0; f < spec.n_firms; ++f) {
        std::string firm_id = std::to_string(f);
        firm_id.insert(0, id_width - firm_id.size(), '0');
        firm_id.insert(0, "F");
        Rng rng(substream_seed(spec.seed, firm_id));

        int offset = 0;
        if (spec.entry_spread > 0)
            offset = static_cast<int>(rng.uniform() * (spec.entry_spread + 1)) % (spec.entry_spread + 1);
        const int n = spec.n_periods - offset;
        const int entry_index = start_index + offset;
        const double tenure = (treat_index - entry_index) / per_year;

        const double firm_scale = std::exp(rng.normal(0.0, spec.firm_scale_sd));
        const double employment = std::exp(rng.normal(0.0, spec.firm_scale_sd));
        const OutcomePath markup = simulate_outcome(spec, n, spec.markup_base, 1.0, rng);
        const OutcomePath profit =
            simulate_outcome(spec, n, spec.profit_base, spec.profit_scale, rng);

        FirmTruth truth;
        truth.firm_id = firm_id;
        truth.markup_trend = markup.trend;
        truth.profit_trend = profit.trend;

        FirmSeries series;
        series.firm_id = firm_id;
        for (int t = 0; t < n; ++t) {
            const Period period = Period::from_index(entry_index + t, spec.frequency);
            const bool treated = entry_index + t >= treat_index;

            // profit cannot exceed the gross margin share the books allow
            const auto books_cap = [](double markup_rate) { return 1.0 - 1.0 / markup_rate; };

            double mu = markup.value[t];
            double pi = profit.value[t];
            if (mu <= 0.0) throw ConfigError("synthetic markup path crossed zero; adjust bases");
            if (treated) {
                const double mu0 = mu;
                const double pi0 = std::min(pi, books_cap(mu0));
                double shift = 0.0;
                if (spec.effect_kind != EffectKind::none) {
                    const double base_value = spec.effect_outcome == Outcome::markup ? mu : pi;
                    shift = spec.effect_kind == EffectKind::multiplicative
                                ? spec.effect_size * base_value
                                : spec.effect_size + spec.effect_tenure_link * tenure;
                    if (spec.effect_noise_sd > 0.0) shift += rng.normal(0.0, spec.effect_noise_sd);
                }
                if (spec.effect_outcome == Outcome::markup)
                    mu += shift;
                else
                    pi += shift;
                if (mu <= 0.0) throw ConfigError("treated markup crossed zero; adjust effect");
                pi = std::min(pi, books_cap(mu));
                truth.markup_counterfactual.push_back(mu0);
                truth.profit_counterfactual.push_back(pi0);
                truth.markup_effect.push_back(mu - mu0);
                truth.profit_effect.push_back(pi - pi0);
            } else {
                pi = std::min(pi, books_cap(mu));
            }

            truth.periods.push_back(period);
            truth.markup_observed.push_back(mu);
            truth.profit_observed.push_back(pi);

            FirmObservation obs;
            obs.firm_id = firm_id;
            obs.period = period;
            obs.naics2 = 10 + f % spec.n_industries;
            obs.cogs = spec.cogs_base * firm_scale;
            obs.sales = mu * obs.cogs;  // theta = 1
            obs.xsga = std::max(0.0, obs.sales * (1.0 - pi) - obs.cogs);
            obs.ppegt = 2.0 * obs.cogs;
            obs.employment = employment;
            series.observations.push_back(std::move(obs));
        }
        out.panel.firms.push_back(std::move(series));
        out.truth.push_back(std::move(truth));
    }
    // firms are generated in id order, which is already sorted
    return out;
}

std::vector<double> simulate_local_level(int n, double level0, double obs_var, double trend_var,
                                         Rng& rng) {
    std::vector<double> y(n);
    double level = level0;
    const double sd_obs = std::sqrt(obs_var);
    const double sd_trend = std::sqrt(trend_var);
    for (int t = 0; t < n; ++t) {
        if (t > 0) level += rng.normal(0.0, sd_trend);
        y[t] = level + rng.normal(0.0, sd_obs);
    }
    return y;
}

SmootherResult kalman_oracle(std::span<const double> y, double obs_var, double trend_var,
                             double init_mean, double init_var) {
    const auto n = static_cast<int>(y.size());
    if (n == 0) throw DomainError("kalman oracle on empty series");
    std::vector<double> att(n), ptt(n);
    double a = init_mean, p = init_var;
    for (int t = 0; t < n; ++t) {
        const double f = p + obs_var;
        if (f > 0.0) {
            const double k = p / f;
            a += k * (y[t] - a);
            p -= k * p;
        }
        att[t] = a;
        ptt[t] = p;
        p += trend_var;
    }
    SmootherResult out;
    out.mean.resize(n);
    out.var.resize(n);
    out.mean[n - 1] = att[n - 1];
    out.var[n - 1] = ptt[n - 1];
    for (int t = n - 2; t >= 0; --t) {
        const double pnext = ptt[t] + trend_var;  // P_{t+1|t}
        const double c = pnext > 0.0 ? ptt[t] / pnext : 0.0;
        out.mean[t] = att[t] + c * (out.mean[t + 1] - att[t]);
        out.var[t] = ptt[t] + c * c * (out.var[t + 1] - pnext);
    }
    return out;
}

std::vector<std::size_t> stepup_oracle(std::span<const double> p, double q) {
    const auto m = p.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    std::size_t k = 0;
    for (std::size_t i = m; i >= 1; --i) {
        if (p[order[i - 1]] <= static_cast<double>(i) * q / static_cast<double>(m)) {
            k = i;
            break;
        }
    }
    std::vector<std::size_t> rejected(order.begin(), order.begin() + k);
    std::sort(rejected.begin(), rejected.end());
    return rejected;
}

}  // namespace ccast
