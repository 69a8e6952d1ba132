#include <doctest.h>

#include <cmath>
#include <vector>

#include "countercast/errors.hpp"
#include "countercast/fleet.hpp"
#include "countercast/synth.hpp"

using namespace ccast;

namespace {

std::vector<FirmInput> fleet_inputs(int n_firms, std::uint64_t seed = 101,
                                    int n_periods = 24) {
    DgpSpec spec;
    spec.n_firms = n_firms;
    spec.n_periods = n_periods;
    spec.treated_periods = 2;
    spec.seed = seed;
    const auto synthetic = generate_panel(spec);

    std::vector<FirmInput> inputs;
    for (const auto& t : synthetic.truth) {
        FirmInput in;
        in.firm_id = t.firm_id;
        const auto n = t.periods.size();
        for (std::size_t i = 0; i + 2 < n; ++i) {
            in.pre_periods.push_back(t.periods[i]);
            in.pre_values.push_back(t.markup_observed[i]);
        }
        in.fit_cutoff = in.pre_periods.back();
        for (std::size_t i = n - 2; i < n; ++i) {
            in.treated_periods.push_back(t.periods[i]);
            in.treated_observed.push_back(t.markup_observed[i]);
        }
        inputs.push_back(std::move(in));
    }
    return inputs;
}

BstsFleetOptions quick_options(ParallelMode mode) {
    BstsFleetOptions options;
    options.spec.n_iterations = 400;
    options.spec.n_burn = 100;
    options.spec.n_predictive_draws = 300;
    options.spec.seed = 99;
    options.mode = mode;
    return options;
}

}  // namespace

TEST_CASE("serial and openmp fleets produce bit-identical results") {
    const auto inputs = fleet_inputs(12);
    const FleetSummary serial = fit_fleet_bsts(inputs, quick_options(ParallelMode::serial));
    const FleetSummary parallel = fit_fleet_bsts(inputs, quick_options(ParallelMode::openmp));
    REQUIRE(serial.results.size() == parallel.results.size());
    for (std::size_t i = 0; i < serial.results.size(); ++i) {
        const auto& a = serial.results[i];
        const auto& b = parallel.results[i];
        CHECK(a.fitted == b.fitted);
        CHECK(a.forecast.point == b.forecast.point);
        CHECK(a.predictive == b.predictive);
        CHECK(a.band_lo95 == b.band_lo95);
        CHECK(a.var_obs == b.var_obs);
    }
}

TEST_CASE("firm conservation: fitted plus skipped equals input count") {
    auto inputs = fleet_inputs(10);
    inputs[3].pre_values.assign(inputs[3].pre_values.size(), 1.5);  // constant series
    inputs[7].defect = "gap before the fit cutoff";
    const FleetSummary summary = fit_fleet_bsts(inputs, quick_options(ParallelMode::openmp));
    CHECK(summary.n_fitted + summary.n_skipped == 10);
    CHECK(summary.n_skipped == 2);
    CHECK_FALSE(summary.results[3].fitted);
    CHECK(summary.results[3].skip_reason.find("constant") != std::string::npos);
    CHECK_FALSE(summary.results[7].fitted);
    CHECK(summary.results[7].skip_reason == "gap before the fit cutoff");
}

TEST_CASE("per-firm substreams: removing a firm leaves the others unchanged") {
    const auto inputs = fleet_inputs(8);
    std::vector<FirmInput> subset(inputs.begin() + 1, inputs.end());
    const FleetSummary full = fit_fleet_bsts(inputs, quick_options(ParallelMode::serial));
    const FleetSummary partial = fit_fleet_bsts(subset, quick_options(ParallelMode::serial));
    for (std::size_t i = 0; i < subset.size(); ++i) {
        CHECK(full.results[i + 1].forecast.point == partial.results[i].forecast.point);
        CHECK(full.results[i + 1].predictive == partial.results[i].predictive);
    }
}

TEST_CASE("the data-access guard rejects periods past the cutoff") {
    auto inputs = fleet_inputs(3);
    inputs[1].fit_cutoff = inputs[1].pre_periods[inputs[1].pre_periods.size() - 3];
    const FleetSummary summary = fit_fleet_bsts(inputs, quick_options(ParallelMode::serial));
    CHECK_FALSE(summary.results[1].fitted);
    CHECK(summary.results[1].skip_reason.find("data-access guard") != std::string::npos);
    CHECK(summary.results[0].fitted);
    CHECK(summary.results[2].fitted);
}

TEST_CASE("bsts fleet records one-step bands and interval forecasts") {
    const auto inputs = fleet_inputs(4);
    const FleetSummary summary = fit_fleet_bsts(inputs, quick_options(ParallelMode::openmp));
    for (const auto& r : summary.results) {
        REQUIRE(r.fitted);
        CHECK(r.band_lo95.size() == r.pre_periods.size());
        CHECK(r.forecast.point.size() == 2);
        CHECK(r.forecast.interval.size() == 2);
        CHECK(r.predictive.rows() == 300);
        for (std::size_t t = 0; t < r.band_lo95.size(); ++t)
            CHECK(r.band_lo95[t] < r.band_hi95[t]);
    }
}

TEST_CASE("llp fleets run both variants with conservation") {
    const auto inputs = fleet_inputs(9, 202, 30);
    LlpSpec spec;
    spec.max_lag = 3;
    const FleetSummary firm = fit_fleet_llp_firm(inputs, spec, ParallelMode::openmp);
    CHECK(firm.n_fitted == 9);
    for (const auto& r : firm.results) {
        CHECK(r.chosen_lag >= 1);
        CHECK(r.forecast.point.size() == 2);
        CHECK(r.forecast.interval.empty());  // no per-firm bands on this route
    }

    const FleetSummary serial = fit_fleet_llp_firm(inputs, spec, ParallelMode::serial);
    for (std::size_t i = 0; i < serial.results.size(); ++i)
        CHECK(serial.results[i].forecast.point == firm.results[i].forecast.point);

    const FleetSummary panel = fit_fleet_llp_panel(inputs, spec);
    CHECK(panel.n_fitted + panel.n_skipped == 9);
    for (const auto& r : panel.results)
        if (r.fitted) CHECK(r.chosen_lag == panel.results[0].chosen_lag);
}
