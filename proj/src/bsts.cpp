#include "countercast/bsts.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "countercast/errors.hpp"
#include "countercast/stats.hpp"

namespace ccast {

namespace {

// state dimension is 1 (local level) or 4 (level + three lagged seasonals)
using MatS = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 4, 4>;
using VecS = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 4, 1>;

MatS transition_matrix(bool seasonal) {
    const int m = seasonal ? 4 : 1;
    MatS T = MatS::Zero(m, m);
    T(0, 0) = 1.0;
    if (seasonal) {
        T(1, 1) = T(1, 2) = T(1, 3) = -1.0;
        T(2, 1) = 1.0;
        T(3, 2) = 1.0;
    }
    return T;
}

double observe(const VecS& state, bool seasonal) {
    return seasonal ? state(0) + state(1) : state(0);
}

/// Draw from N(mean, cov) where cov may be semidefinite after a backward
/// conditioning step; negative eigenvalues from rounding are clamped.
VecS sample_gaussian(const VecS& mean, const MatS& cov, Rng& rng) {
    const int m = static_cast<int>(mean.size());
    if (m == 1) {
        const double sd = std::sqrt(std::max(cov(0, 0), 0.0));
        VecS out(1);
        out(0) = rng.normal(mean(0), sd);
        return out;
    }
    Eigen::SelfAdjointEigenSolver<MatS> eig(cov);
    VecS z(m);
    for (int i = 0; i < m; ++i) z(i) = rng.normal();
    VecS scaled(m);
    for (int i = 0; i < m; ++i) scaled(i) = std::sqrt(std::max(eig.eigenvalues()(i), 0.0)) * z(i);
    return mean + eig.eigenvectors() * scaled;
}

}  // namespace

void ModelSpec::validate() const {
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    if (n_iterations < 1) throw ConfigError("n_iterations must be >= 1");
    if (n_burn < 0 || n_burn >= n_iterations) throw ConfigError("require 0 <= n_burn < n_iterations");
    if (n_predictive_draws < 1) throw ConfigError("n_predictive_draws must be >= 1");
}

void PriorConfig::validate() const {
    for (const auto& p : {obs, trend, seasonal})
        if (p.v <= 0.0 || p.s <= 0.0) throw ConfigError("inverse-Gamma hyperparameters must be positive");
    if (init_trend_sd <= 0.0 || init_seasonal_sd <= 0.0)
        throw ConfigError("initial-state prior sds must be positive");
}

PriorConfig scale_hyperparameters(const PriorConfig& priors, double factor) {
    if (factor <= 0.0) throw ConfigError("hyperparameter scale factor must be positive");
    PriorConfig out = priors;
    out.obs = {priors.obs.v * factor, priors.obs.s * factor};
    out.trend = {priors.trend.v * factor, priors.trend.s * factor};
    out.seasonal = {priors.seasonal.v * factor, priors.seasonal.s * factor};
    out.init_trend_sd = priors.init_trend_sd * factor;
    out.init_seasonal_sd = priors.init_seasonal_sd * factor;
    return out;
}

StandardizedSeries standardize(std::span<const double> y) {
    if (y.size() < 3) throw SampleSizeError("standardize needs at least 3 observations");
    Standardization t;
    t.mean = mean(y);
    t.sd = sample_sd(y);
    if (t.sd <= 0.0) throw DegenerateSeriesError("constant series cannot be standardized");
    StandardizedSeries out;
    out.transform = t;
    out.values.reserve(y.size());
    for (double v : y) out.values.push_back(t.apply(v));
    return out;
}

GammaPosterior inverse_gamma_posterior(const InverseGammaPrior& prior, double sse, int n) {
    return {(prior.v + n) / 2.0, (prior.s + sse) / 2.0};
}

double draw_variance(const InverseGammaPrior& prior, double sse, int n, Rng& rng) {
    const auto post = inverse_gamma_posterior(prior, sse, n);
    return rng.inverse_gamma(post.shape, post.rate);
}

VarianceDraw sample_variances(std::span<const double> y, const Eigen::MatrixXd& states,
                              bool has_seasonal, const PriorConfig& priors, Rng& rng) {
    const auto T = static_cast<int>(y.size());
    if (states.rows() != T) throw AlignmentError("state path not conformable with series");

    double sse_obs = 0.0;
    for (int t = 0; t < T; ++t) {
        const double fitted = has_seasonal ? states(t, 0) + states(t, 1) : states(t, 0);
        const double e = y[t] - fitted;
        sse_obs += e * e;
    }
    double sse_trend = 0.0;
    for (int t = 1; t < T; ++t) {
        const double e = states(t, 0) - states(t - 1, 0);
        sse_trend += e * e;
    }

    VarianceDraw out;
    out.obs = draw_variance(priors.obs, sse_obs, T, rng);
    out.trend = draw_variance(priors.trend, sse_trend, T - 1, rng);
    if (has_seasonal) {
        double sse_seasonal = 0.0;
        for (int t = 1; t < T; ++t) {
            const double e = states(t, 1) + states(t - 1, 1) + states(t - 1, 2) + states(t - 1, 3);
            sse_seasonal += e * e;
        }
        out.seasonal = draw_variance(priors.seasonal, sse_seasonal, T - 1, rng);
    }
    return out;
}

Eigen::MatrixXd ffbs_states(std::span<const double> y, const VarianceDraw& variances,
                            bool has_seasonal, const PriorConfig& priors, double init_trend_mean,
                            Rng& rng, OneStepPrediction* onestep) {
    if (variances.obs <= 0.0 || variances.trend < 0.0 || variances.seasonal < 0.0)
        throw DomainError("ffbs requires positive observation variance");
    const auto T_len = static_cast<int>(y.size());
    const int m = has_seasonal ? 4 : 1;
    const MatS trans = transition_matrix(has_seasonal);
    MatS noise = MatS::Zero(m, m);
    noise(0, 0) = variances.trend;
    if (has_seasonal) noise(1, 1) = variances.seasonal;

    VecS a = VecS::Zero(m);
    a(0) = init_trend_mean;
    MatS P = MatS::Zero(m, m);
    P(0, 0) = priors.init_trend_sd * priors.init_trend_sd;
    for (int i = 1; i < m; ++i) P(i, i) = priors.init_seasonal_sd * priors.init_seasonal_sd;

    if (onestep) {
        onestep->mean.assign(T_len, 0.0);
        onestep->var.assign(T_len, 0.0);
    }

    std::vector<VecS> filt_mean(T_len);
    std::vector<MatS> filt_cov(T_len);
    for (int t = 0; t < T_len; ++t) {
        const double pred_mean = observe(a, has_seasonal);
        double pred_var = P(0, 0) + variances.obs;
        if (has_seasonal) pred_var += P(1, 1) + 2.0 * P(0, 1);
        if (onestep) {
            onestep->mean[t] = pred_mean;
            onestep->var[t] = pred_var;
        }
        VecS gain = P.col(0);
        if (has_seasonal) gain += P.col(1);
        gain /= pred_var;
        a += gain * (y[t] - pred_mean);
        // Joseph-form update keeps P symmetric positive semidefinite
        MatS izp = MatS::Identity(m, m);
        izp.col(0) -= gain;
        if (has_seasonal) izp.col(1) -= gain;
        P = izp * P * izp.transpose() + variances.obs * gain * gain.transpose();
        if (!a.allFinite() || !P.allFinite())
            throw NumericalError("non-finite filter state at t=" + std::to_string(t));
        filt_mean[t] = a;
        filt_cov[t] = P;
        a = trans * a;
        P = trans * P * trans.transpose() + noise;
    }

    Eigen::MatrixXd states(T_len, m);
    VecS draw = sample_gaussian(filt_mean[T_len - 1], filt_cov[T_len - 1], rng);
    states.row(T_len - 1) = draw.transpose();
    for (int t = T_len - 2; t >= 0; --t) {
        const MatS S = trans * filt_cov[t] * trans.transpose() + noise;
        const MatS cross = trans * filt_cov[t];  // S actually uses cross'
        const Eigen::LDLT<MatS> ldlt(S);
        const MatS gain = ldlt.solve(cross).transpose();  // P T' S^{-1}
        const VecS resid = draw - trans * filt_mean[t];
        const VecS cond_mean = filt_mean[t] + gain * resid;
        MatS cond_cov = filt_cov[t] - gain * S * gain.transpose();
        cond_cov = 0.5 * (cond_cov + cond_cov.transpose()).eval();
        draw = sample_gaussian(cond_mean, cond_cov, rng);
        if (!draw.allFinite())
            throw NumericalError("non-finite backward sample at t=" + std::to_string(t));
        states.row(t) = draw.transpose();
    }
    return states;
}

namespace {

/// Effective sample size via the initial positive autocorrelation sequence.
double effective_sample_size(std::span<const double> chain) {
    const auto n = static_cast<int>(chain.size());
    if (n < 4) return n;
    const double m = mean(chain);
    double var = 0.0;
    for (double v : chain) var += (v - m) * (v - m);
    if (var <= 0.0) return n;
    double rho_sum = 0.0;
    for (int lag = 1; lag < n / 2; ++lag) {
        double acov = 0.0;
        for (int t = lag; t < n; ++t) acov += (chain[t] - m) * (chain[t - lag] - m);
        const double rho = acov / var;
        if (rho < 0.05) break;
        rho_sum += rho;
    }
    return n / (1.0 + 2.0 * rho_sum);
}

}  // namespace

PosteriorDraws gibbs_run(std::span<const double> y_std, const Standardization& transform,
                         const ModelSpec& spec, const PriorConfig& priors,
                         std::span<const double> cycle) {
    spec.validate();
    priors.validate();
    const auto T_len = static_cast<int>(y_std.size());
    const int min_len = spec.has_seasonal ? 8 : 3;
    if (T_len < min_len)
        throw SampleSizeError("series too short for the model: " + std::to_string(T_len));
    if (spec.has_cycle &&
        cycle.size() != y_std.size() && cycle.size() != y_std.size() + spec.horizon)
        throw AlignmentError("cycle series must align with y (optionally plus horizon)");

    Rng rng(spec.seed);
    const int retained = spec.n_iterations - spec.n_burn;
    const int m = spec.has_seasonal ? 4 : 1;

    PosteriorDraws out;
    out.transform = transform;
    out.effective_horizon = spec.horizon;
    out.obs_var.reserve(retained);
    out.trend_var.reserve(retained);
    out.trend_path.resize(retained, T_len);
    if (spec.has_seasonal) {
        out.seasonal_var.reserve(retained);
        out.seasonal_path.resize(retained, T_len);
    }
    if (spec.has_cycle) out.cycle_coef.reserve(retained);
    out.onestep.resize(retained, T_len);

    Eigen::MatrixXd last_states(retained, m);  // state vector at time T per retained draw

    VarianceDraw variances{1.0, 0.01, 0.01};
    double alpha = 0.0;
    std::vector<double> y_adj(y_std.begin(), y_std.end());
    OneStepPrediction onestep;

    for (int iter = 0; iter < spec.n_iterations; ++iter) {
        if (spec.has_cycle)
            for (int t = 0; t < T_len; ++t) y_adj[t] = y_std[t] - alpha * cycle[t];

        Eigen::MatrixXd states;
        try {
            states = ffbs_states(y_adj, variances, spec.has_seasonal, priors, y_adj[0], rng,
                                 &onestep);
        } catch (const NumericalError& e) {
            throw NumericalError(std::string(e.what()) + " (gibbs iteration " +
                                 std::to_string(iter) + ")");
        }

        if (spec.has_cycle) {
            // conjugate draw for the cycle coefficient, prior N(0, 1)
            double cc = 0.0, cr = 0.0;
            for (int t = 0; t < T_len; ++t) {
                const double fitted = spec.has_seasonal ? states(t, 0) + states(t, 1) : states(t, 0);
                cc += cycle[t] * cycle[t];
                cr += cycle[t] * (y_std[t] - fitted);
            }
            const double precision = 1.0 + cc / variances.obs;
            const double post_mean = (cr / variances.obs) / precision;
            alpha = rng.normal(post_mean, std::sqrt(1.0 / precision));
            for (int t = 0; t < T_len; ++t) y_adj[t] = y_std[t] - alpha * cycle[t];
        }

        variances = sample_variances(y_adj, states, spec.has_seasonal, priors, rng);

        const int keep = iter - spec.n_burn;
        if (keep < 0) continue;
        out.obs_var.push_back(variances.obs);
        out.trend_var.push_back(variances.trend);
        out.trend_path.row(keep) = states.col(0).transpose();
        if (spec.has_seasonal) {
            out.seasonal_var.push_back(variances.seasonal);
            out.seasonal_path.row(keep) = states.col(1).transpose();
        }
        if (spec.has_cycle) out.cycle_coef.push_back(alpha);
        last_states.row(keep) = states.row(T_len - 1);
        for (int t = 0; t < T_len; ++t) {
            const double cyc = spec.has_cycle ? alpha * cycle[t] : 0.0;
            const double sim = rng.normal(onestep.mean[t] + cyc, std::sqrt(onestep.var[t]));
            out.onestep(keep, t) = transform.invert(sim);
        }
    }

    // posterior predictive paths: iterate the state equations forward,
    // pairing predictive draw j with an evenly thinned retained draw
    out.predictive.resize(spec.n_predictive_draws, spec.horizon);
    const MatS trans = transition_matrix(spec.has_seasonal);
    const bool cycle_future = spec.has_cycle && cycle.size() == y_std.size() + spec.horizon;
    for (int j = 0; j < spec.n_predictive_draws; ++j) {
        const int g = static_cast<int>((static_cast<long long>(j) * retained) /
                                       spec.n_predictive_draws);
        VecS state = last_states.row(g).transpose();
        const double sd_trend = std::sqrt(out.trend_var[g]);
        const double sd_obs = std::sqrt(out.obs_var[g]);
        const double sd_seasonal = spec.has_seasonal ? std::sqrt(out.seasonal_var[g]) : 0.0;
        for (int h = 0; h < spec.horizon; ++h) {
            state = trans * state;
            state(0) += rng.normal(0.0, sd_trend);
            if (spec.has_seasonal) state(1) += rng.normal(0.0, sd_seasonal);
            double value = observe(state, spec.has_seasonal) + rng.normal(0.0, sd_obs);
            if (spec.has_cycle && cycle_future) value += out.cycle_coef[g] * cycle[T_len + h];
            out.predictive(j, h) = transform.invert(value);
        }
    }
    if (!out.predictive.allFinite()) throw NumericalError("non-finite predictive path");

    out.ess_warning = effective_sample_size(out.obs_var) < 100.0 ||
                      effective_sample_size(out.trend_var) < 100.0 ||
                      (spec.has_seasonal && effective_sample_size(out.seasonal_var) < 100.0);
    return out;
}

PosteriorDraws fit_bsts(std::span<const double> y_raw, const ModelSpec& spec,
                        const PriorConfig& priors, std::span<const double> cycle) {
    const auto std_series = standardize(y_raw);
    return gibbs_run(std_series.values, std_series.transform, spec, priors, cycle);
}

IntervalSet interval_set(std::span<const double> draws) {
    std::vector<double> sorted(draws.begin(), draws.end());
    std::sort(sorted.begin(), sorted.end());
    IntervalSet s;
    s.lo50 = quantile_sorted(sorted, 0.25);
    s.hi50 = quantile_sorted(sorted, 0.75);
    s.lo80 = quantile_sorted(sorted, 0.10);
    s.hi80 = quantile_sorted(sorted, 0.90);
    s.lo90 = quantile_sorted(sorted, 0.05);
    s.hi90 = quantile_sorted(sorted, 0.95);
    s.lo95 = quantile_sorted(sorted, 0.025);
    s.hi95 = quantile_sorted(sorted, 0.975);
    return s;
}

ForecastDistribution forecast_distribution(const PosteriorDraws& draws) {
    if (draws.predictive.size() == 0) throw DomainError("no predictive draws");
    ForecastDistribution out;
    const auto H = static_cast<int>(draws.predictive.cols());
    out.point.reserve(H);
    out.interval.reserve(H);
    for (int h = 0; h < H; ++h) {
        const Eigen::VectorXd col = draws.predictive.col(h);
        const std::span<const double> view(col.data(), static_cast<std::size_t>(col.size()));
        out.point.push_back(mean(view));
        out.interval.push_back(interval_set(view));
    }
    return out;
}

ModelSpec cycle_regression_spec(std::span<const double> y, std::span<const double> cycle,
                                const ModelSpec& base) {
    if (cycle.size() != y.size() && cycle.size() != y.size() + base.horizon)
        throw AlignmentError("cycle series not aligned with outcome periods");
    ModelSpec spec = base;
    spec.has_cycle = true;
    return spec;
}

}  // namespace ccast
