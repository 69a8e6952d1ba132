#include "countercast/run_config.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>

#include "countercast/errors.hpp"

namespace ccast {

namespace {

std::string trim(std::string s) {
    const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
    while (!s.empty() && is_space(s.back())) s.pop_back();
    std::size_t i = 0;
    while (i < s.size() && is_space(s[i])) ++i;
    return s.substr(i);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("bad numeric value for " + key + ": " + v);
    }
}

long long to_int(const std::string& key, const std::string& v) {
    long long i = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), i);
    if (ec != std::errc{} || p != v.data() + v.size())
        throw ConfigError("bad integer value for " + key + ": " + v);
    return i;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("bad boolean value for " + key + ": " + v);
}

}  // namespace

bool RunConfig::seasonal() const {
    if (seasonal_override) return seasonal_value;
    return frequency == Frequency::quarterly;
}

Period RunConfig::treatment_period() const {
    if (!treatment_start.empty()) return Period::parse(treatment_start);
    return year_start(2020, frequency);
}

CleaningConfig RunConfig::cleaning_config(const DeflatorSeries& deflator) const {
    CleaningConfig cfg = CleaningConfig::defaults(frequency);
    cfg.ratio_trim_lo = ratio_trim_lo;
    cfg.ratio_trim_hi = ratio_trim_hi;
    cfg.share_trim_lo = share_trim_lo;
    cfg.share_trim_hi = share_trim_hi;
    if (min_pre_periods >= 0) cfg.min_pre_periods = min_pre_periods;
    if (share_numerator == "cogs")
        cfg.share_numerator = CostShareNumerator::cogs;
    else if (share_numerator == "ppegt")
        cfg.share_numerator = CostShareNumerator::ppegt;
    else if (share_numerator == "xsga")
        cfg.share_numerator = CostShareNumerator::xsga;
    else
        throw ConfigError("unknown cost-share numerator: " + share_numerator);
    cfg.treatment_start = treatment_period();
    cfg.deflator = deflator;
    cfg.deflator.base_year = deflator_base_year;
    return cfg;
}

LlpSpec RunConfig::llp_spec() const {
    LlpSpec spec = llp;
    if (spec.max_lag <= 0) spec.max_lag = frequency == Frequency::quarterly ? 8 : 3;
    spec.seed = seed;
    return spec;
}

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    if (key == "input.panel") cfg.panel_path = v;
    else if (key == "input.elasticities") cfg.elasticity_path = v;
    else if (key == "input.deflator") cfg.deflator_path = v;
    else if (key == "input.cycle") cfg.cycle_path = v;
    else if (key == "input.frequency") cfg.frequency = frequency_from_string(v);
    else if (key == "run.outcomes") {
        cfg.outcomes.clear();
        for (const auto& o : split_list(v)) cfg.outcomes.push_back(outcome_from_string(o));
    } else if (key == "run.estimators") {
        cfg.estimators = split_list(v);
        for (const auto& e : cfg.estimators)
            if (e != "bsts" && e != "llp_firm" && e != "llp_panel")
                throw ConfigError("unknown estimator: " + e);
    } else if (key == "run.outdir") cfg.outdir = v;
    else if (key == "run.seed") cfg.seed = static_cast<std::uint64_t>(to_int(key, v));
    else if (key == "run.workers") cfg.workers = static_cast<int>(to_int(key, v));
    else if (key == "run.parallel") cfg.parallel = parallel_mode_from_string(v);
    else if (key == "run.sensitivity") {
        cfg.sensitivity.clear();
        for (const auto& f : split_list(v)) cfg.sensitivity.push_back(to_double(key, f));
    } else if (key == "run.weighting") {
        if (v != "sales" && v != "cogs" && v != "none")
            throw ConfigError("unknown weighting: " + v);
        cfg.weighting = v;
    } else if (key == "run.max_skip_fraction") cfg.max_skip_fraction = to_double(key, v);
    else if (key == "run.dump_draws") cfg.dump_draws = to_bool(key, v);
    else if (key == "run.holdout_cutoff") cfg.holdout_cutoff_year = static_cast<int>(to_int(key, v));
    else if (key == "run.holdout_horizons") cfg.holdout_horizons = static_cast<int>(to_int(key, v));
    else if (key == "run.covariate_window_start")
        cfg.covariate_window_start = static_cast<int>(to_int(key, v));
    else if (key == "run.covariate_window_end")
        cfg.covariate_window_end = static_cast<int>(to_int(key, v));
    else if (key == "run.hp_lambda") cfg.hp_lambda = to_double(key, v);
    else if (key == "model.iterations") cfg.model.n_iterations = static_cast<int>(to_int(key, v));
    else if (key == "model.burn") cfg.model.n_burn = static_cast<int>(to_int(key, v));
    else if (key == "model.predictive_draws")
        cfg.model.n_predictive_draws = static_cast<int>(to_int(key, v));
    else if (key == "model.horizon") cfg.model.horizon = static_cast<int>(to_int(key, v));
    else if (key == "model.seasonal") {
        cfg.seasonal_override = true;
        cfg.seasonal_value = to_bool(key, v);
    } else if (key == "priors.obs.v") cfg.priors.obs.v = to_double(key, v);
    else if (key == "priors.obs.s") cfg.priors.obs.s = to_double(key, v);
    else if (key == "priors.trend.v") cfg.priors.trend.v = to_double(key, v);
    else if (key == "priors.trend.s") cfg.priors.trend.s = to_double(key, v);
    else if (key == "priors.seasonal.v") cfg.priors.seasonal.v = to_double(key, v);
    else if (key == "priors.seasonal.s") cfg.priors.seasonal.s = to_double(key, v);
    else if (key == "priors.init_trend.sd") cfg.priors.init_trend_sd = to_double(key, v);
    else if (key == "priors.init_seasonal.sd") cfg.priors.init_seasonal_sd = to_double(key, v);
    else if (key == "llp.max_lag") cfg.llp.max_lag = static_cast<int>(to_int(key, v));
    else if (key == "llp.bootstrap") cfg.llp.n_bootstrap = static_cast<int>(to_int(key, v));
    else if (key == "cleaning.ratio_trim_lo") cfg.ratio_trim_lo = to_double(key, v);
    else if (key == "cleaning.ratio_trim_hi") cfg.ratio_trim_hi = to_double(key, v);
    else if (key == "cleaning.share_trim_lo") cfg.share_trim_lo = to_double(key, v);
    else if (key == "cleaning.share_trim_hi") cfg.share_trim_hi = to_double(key, v);
    else if (key == "cleaning.min_pre_periods")
        cfg.min_pre_periods = static_cast<int>(to_int(key, v));
    else if (key == "cleaning.share_numerator") cfg.share_numerator = v;
    else if (key == "cleaning.treatment_start") cfg.treatment_start = v;
    else if (key == "cleaning.deflator_base") cfg.deflator_base_year = static_cast<int>(to_int(key, v));
    else if (key == "synth.firms") cfg.synth.n_firms = static_cast<int>(to_int(key, v));
    else if (key == "synth.periods") cfg.synth.n_periods = static_cast<int>(to_int(key, v));
    else if (key == "synth.treated_periods")
        cfg.synth.treated_periods = static_cast<int>(to_int(key, v));
    else if (key == "synth.obs_var") cfg.synth.obs_var = to_double(key, v);
    else if (key == "synth.trend_var") cfg.synth.trend_var = to_double(key, v);
    else if (key == "synth.seasonal_var") cfg.synth.seasonal_var = to_double(key, v);
    else if (key == "synth.seasonal") cfg.synth.seasonal = to_bool(key, v);
    else if (key == "synth.seasonal_init_sd") cfg.synth.seasonal_init_sd = to_double(key, v);
    else if (key == "synth.effect_kind") {
        if (v == "none") cfg.synth.effect_kind = EffectKind::none;
        else if (v == "additive") cfg.synth.effect_kind = EffectKind::additive;
        else if (v == "multiplicative") cfg.synth.effect_kind = EffectKind::multiplicative;
        else throw ConfigError("unknown effect kind: " + v);
    } else if (key == "synth.effect_outcome") cfg.synth.effect_outcome = outcome_from_string(v);
    else if (key == "synth.effect_size") cfg.synth.effect_size = to_double(key, v);
    else if (key == "synth.effect_tenure_link") cfg.synth.effect_tenure_link = to_double(key, v);
    else if (key == "synth.effect_noise_sd") cfg.synth.effect_noise_sd = to_double(key, v);
    else if (key == "synth.profit_scale") cfg.synth.profit_scale = to_double(key, v);
    else if (key == "synth.firm_scale_sd") cfg.synth.firm_scale_sd = to_double(key, v);
    else if (key == "synth.entry_spread") cfg.synth.entry_spread = static_cast<int>(to_int(key, v));
    else if (key == "synth.start_year") cfg.synth.start_year = static_cast<int>(to_int(key, v));
    else if (key == "synth.markup_base") cfg.synth.markup_base = to_double(key, v);
    else if (key == "synth.profit_base") cfg.synth.profit_base = to_double(key, v);
    else if (key == "synth.industries") cfg.synth.n_industries = static_cast<int>(to_int(key, v));
    else throw ConfigError("unknown configuration key: " + key);
}

RunConfig parse_run_config(std::istream& in) {
    RunConfig cfg;
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto comment = line.find('#');
        if (comment != std::string::npos) line.resize(comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section.empty()) throw ConfigError("key " + key + " outside any [section]");
        apply_override(cfg, section + "." + key, value);
    }
    cfg.synth.frequency = cfg.frequency;
    cfg.synth.seed = cfg.seed;
    cfg.model.seed = cfg.seed;
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    return parse_run_config(in);
}

}  // namespace ccast
