#include "countercast/llp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "countercast/errors.hpp"
#include "countercast/ols.hpp"
#include "countercast/parallel.hpp"
#include "countercast/rng.hpp"
#include "countercast/stats.hpp"

namespace ccast {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Regression rows for one horizon: y[t+h-1] on (1, y[t-2], ..., y[t-p-1])
/// in 0-based indexing, using every t where both sides exist. `first_t` lets
/// the caller pin a common sample across candidate lags.
struct Design {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
};

Design build_design(std::span<const double> y, int lag, int horizon, int first_t) {
    // t indexes the information date, 1-based like the series position:
    // the row pairs y_{t+h} with (1, y_{t-1}, ..., y_{t-lag}).
    const auto n = static_cast<int>(y.size());
    const int lo = std::max(first_t, lag + 1);
    const int hi = n - horizon;  // t+h <= n
    const int rows = hi - lo + 1;
    if (rows < 1) throw SampleSizeError("llp: no usable regression rows");
    Design d;
    d.X.resize(rows, lag + 1);
    d.y.resize(rows);
    for (int t = lo; t <= hi; ++t) {
        const int r = t - lo;
        d.X(r, 0) = 1.0;
        for (int j = 1; j <= lag; ++j) d.X(r, j) = y[t - j - 1];
        d.y(r) = y[t + horizon - 1];
    }
    return d;
}

// regressors at the information date T: (1, y_{T-1}, ..., y_{T-p})
Eigen::VectorXd forecast_regressors(std::span<const double> y, int lag) {
    const auto n = static_cast<int>(y.size());
    Eigen::VectorXd x(lag + 1);
    x(0) = 1.0;
    for (int j = 1; j <= lag; ++j) x(j) = y[n - 1 - j];
    return x;
}

struct LsFit {
    Eigen::VectorXd beta;
    double ssr = 0.0;
    int n = 0;
};

/// Least squares for projection regressions. Deterministic series make the
/// lag design rank deficient while still fitting exactly (constant or linear
/// paths); those are accepted because every least-squares solution yields
/// the same forecast. Rank deficiency with nonzero residuals is a genuine
/// collinearity failure.
LsFit least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    LsFit fit;
    fit.n = static_cast<int>(X.rows());
    fit.beta = qr.solve(y);
    fit.ssr = (y - X * fit.beta).squaredNorm();
    if (qr.rank() < X.cols() && fit.ssr > 1e-10 * std::max(1.0, y.squaredNorm()))
        throw CollinearityError("llp: rank-deficient design matrix");
    return fit;
}

}  // namespace

double aic(int n, double ssr, int k) {
    return n * std::log(ssr / n) + 2.0 * (k + 1);
}

int select_lag_aic(std::span<const double> y, int max_lag) {
    if (max_lag < 1) throw DomainError("max_lag must be >= 1");
    const auto n = static_cast<int>(y.size());
    // common largest sample: every candidate starts where the deepest lag exists
    const int first_t = max_lag + 1;
    if (n - 1 - first_t + 1 < max_lag + 2)
        throw SampleSizeError("llp: series too short for lag selection");

    int best_lag = 1;
    double best_aic = std::numeric_limits<double>::infinity();
    double scale = 1.0;
    for (double v : y) scale += v * v;
    for (int lag = 1; lag <= max_lag; ++lag) {
        const Design d = build_design(y, lag, 1, first_t);
        const LsFit fit = least_squares(d.X, d.y);
        // exact fits leave only rounding noise in the ssr; flooring at a
        // relative epsilon makes them tie so the smaller lag wins
        const double ssr = std::max(fit.ssr, 1e-16 * scale);
        const double a = aic(fit.n, ssr, lag + 1);
        if (a < best_aic - 1e-12) {
            best_aic = a;
            best_lag = lag;
        }
    }
    return best_lag;
}

LlpFirmFit fit_firm_llp(std::span<const double> y, const LlpSpec& spec) {
    const int lag = select_lag_aic(y, spec.max_lag);
    LlpFirmFit out;
    out.chosen_lag = lag;
    out.by_horizon.reserve(spec.horizon);
    out.forecasts.reserve(spec.horizon);
    const Eigen::VectorXd x_T = forecast_regressors(y, lag);
    for (int h = 1; h <= spec.horizon; ++h) {
        const Design d = build_design(y, lag, h, lag + 1);
        if (d.X.rows() < lag + 2) throw SampleSizeError("llp: too few rows at horizon " +
                                                        std::to_string(h));
        const LsFit fit = least_squares(d.X, d.y);
        HorizonFit hf;
        hf.beta = fit.beta;
        hf.n = fit.n;
        hf.resid_var = fit.ssr / fit.n;
        out.forecasts.push_back(x_T.dot(fit.beta));
        out.by_horizon.push_back(std::move(hf));
    }
    return out;
}

PanelLlpFit fit_panel_llp(const std::vector<PanelSeries>& panel, const LlpSpec& spec) {
    if (panel.size() < 2) throw SampleSizeError("panel llp needs at least 2 firms");

    // pooled AIC on the demeaned one-step regression over the common sample
    const int first_t = spec.max_lag + 1;
    int best_lag = 1;
    double best_aic = std::numeric_limits<double>::infinity();
    for (int lag = 1; lag <= spec.max_lag; ++lag) {
        std::vector<Eigen::MatrixXd> xs;
        std::vector<Eigen::VectorXd> ys;
        std::vector<int> group;
        int rows = 0;
        for (std::size_t i = 0; i < panel.size(); ++i) {
            const auto& s = panel[i].values;
            if (static_cast<int>(s.size()) < first_t + 1) continue;
            Design d = build_design(s, lag, 1, first_t);
            rows += static_cast<int>(d.X.rows());
            for (int r = 0; r < d.X.rows(); ++r) group.push_back(static_cast<int>(i));
            xs.push_back(std::move(d.X));
            ys.push_back(std::move(d.y));
        }
        if (rows < lag + 2) continue;
        Eigen::MatrixXd X(rows, lag + 1);
        Eigen::VectorXd Y(rows);
        int at = 0;
        for (std::size_t b = 0; b < xs.size(); ++b) {
            X.middleRows(at, xs[b].rows()) = xs[b];
            Y.segment(at, ys[b].size()) = ys[b];
            at += static_cast<int>(xs[b].rows());
        }
        within_demean(X, Y, group);
        const Eigen::MatrixXd lags_only = X.rightCols(lag);  // constant demeans to zero
        const LsFit fit = least_squares(lags_only, Y);
        const double a = aic(fit.n, std::max(fit.ssr, 1e-300), lag + 1);
        if (a < best_aic - 1e-12) {
            best_aic = a;
            best_lag = lag;
        }
    }
    if (!std::isfinite(best_aic)) throw SampleSizeError("panel llp: no firm has enough data");

    PanelLlpFit out;
    out.chosen_lag = best_lag;
    const int lag = best_lag;

    for (const auto& s : panel) {
        out.firm_effect[s.firm_id].assign(spec.horizon, kNaN);
        out.forecasts[s.firm_id].assign(spec.horizon, kNaN);
    }

    for (int h = 1; h <= spec.horizon; ++h) {
        // assemble pooled rows for this horizon
        std::vector<Eigen::MatrixXd> xs;
        std::vector<Eigen::VectorXd> ys;
        std::vector<int> group;
        std::vector<std::string> ids;
        int rows = 0;
        for (std::size_t i = 0; i < panel.size(); ++i) {
            const auto& s = panel[i].values;
            try {
                Design d = build_design(s, lag, h, lag + 1);
                rows += static_cast<int>(d.X.rows());
                for (int r = 0; r < d.X.rows(); ++r) group.push_back(static_cast<int>(ids.size()));
                ids.push_back(panel[i].firm_id);
                xs.push_back(std::move(d.X));
                ys.push_back(std::move(d.y));
            } catch (const SampleSizeError&) {
                continue;  // firm contributes nothing at this horizon
            }
        }
        if (rows < lag + 1) throw SampleSizeError("panel llp: empty pooled sample at horizon " +
                                                  std::to_string(h));
        Eigen::MatrixXd X(rows, lag + 1);
        Eigen::VectorXd Y(rows);
        int at = 0;
        for (std::size_t b = 0; b < xs.size(); ++b) {
            X.middleRows(at, xs[b].rows()) = xs[b];
            Y.segment(at, ys[b].size()) = ys[b];
            at += static_cast<int>(xs[b].rows());
        }
        Eigen::MatrixXd Xd = X;
        Eigen::VectorXd Yd = Y;
        within_demean(Xd, Yd, group);
        const Eigen::MatrixXd lags_only = Xd.rightCols(lag);
        const LsFit fit = least_squares(lags_only, Yd);

        Eigen::VectorXd beta = Eigen::VectorXd::Zero(lag + 1);
        beta.tail(lag) = fit.beta;
        out.beta.push_back(beta);
        out.resid_var.push_back(fit.ssr / fit.n);

        // firm effect = firm mean of (y - x'beta) on the undemeaned rows
        at = 0;
        for (std::size_t b = 0; b < xs.size(); ++b) {
            const auto nb = static_cast<int>(xs[b].rows());
            const double u = (Y.segment(at, nb) - X.middleRows(at, nb) * beta).mean();
            out.firm_effect[ids[b]][h - 1] = u;
            at += nb;
        }
    }

    // forecasts: common slopes plus own effect and own lag window
    for (const auto& s : panel) {
        const auto n = static_cast<int>(s.values.size());
        if (n < lag + 1) {
            out.skipped.push_back(s.firm_id);
            out.firm_effect.erase(s.firm_id);
            out.forecasts.erase(s.firm_id);
            continue;
        }
        const Eigen::VectorXd x_T = forecast_regressors(s.values, lag);
        bool any_pooled_only = false;
        for (int h = 1; h <= spec.horizon; ++h) {
            double u = out.firm_effect.at(s.firm_id)[h - 1];
            if (std::isnan(u)) {
                u = 0.0;  // firm absent from estimation at this horizon
                any_pooled_only = true;
            }
            out.forecasts.at(s.firm_id)[h - 1] = x_T.dot(out.beta[h - 1]) + u;
        }
        if (any_pooled_only) out.pooled_only.push_back(s.firm_id);
    }
    return out;
}

std::vector<BootstrapInterval> bootstrap_aggregate_ci(const Eigen::MatrixXd& effects,
                                                      std::span<const double> weights,
                                                      int n_bootstrap, std::uint64_t seed,
                                                      ParallelMode mode) {
    const auto n_firms = static_cast<int>(effects.rows());
    const auto H = static_cast<int>(effects.cols());
    if (n_firms < 2) throw SampleSizeError("bootstrap needs at least 2 firms");
    if (static_cast<int>(weights.size()) != n_firms)
        throw AlignmentError("bootstrap weights not aligned with effects");

    // replicates draw from pre-split substreams, so results are independent
    // of scheduling and of n_bootstrap truncation
    Eigen::MatrixXd averages(n_bootstrap, H);
    parallel_for(n_bootstrap, mode, 0, [&](int b) {
        Rng rng(substream_seed(seed, static_cast<std::uint64_t>(b)));
        std::vector<int> pick(n_firms);
        for (int i = 0; i < n_firms; ++i)
            pick[i] = static_cast<int>(rng.uniform() * n_firms) % n_firms;
        for (int h = 0; h < H; ++h) {
            double num = 0.0, den = 0.0;
            for (int idx : pick) {
                const double e = effects(idx, h);
                if (std::isnan(e)) continue;
                num += weights[idx] * e;
                den += weights[idx];
            }
            averages(b, h) = den > 0.0 ? num / den : kNaN;
        }
    });

    std::vector<BootstrapInterval> out(H);
    for (int h = 0; h < H; ++h) {
        std::vector<double> column;
        column.reserve(n_bootstrap);
        for (int b = 0; b < n_bootstrap; ++b)
            if (!std::isnan(averages(b, h))) column.push_back(averages(b, h));
        std::sort(column.begin(), column.end());
        out[h].lo = quantile_sorted(column, 0.025);
        out[h].hi = quantile_sorted(column, 0.975);
    }
    return out;
}

}  // namespace ccast
