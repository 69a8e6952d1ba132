#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "countercast/errors.hpp"
#include "countercast/panel.hpp"
#include "countercast/rng.hpp"
#include "countercast/stats.hpp"

using namespace ccast;

namespace {

const char* kHeader = "firm_id,period,sales,cogs,xsga,ppegt,emp,naics2\n";

PanelDataset load_from(const std::string& body, Frequency f = Frequency::yearly) {
    std::istringstream in(kHeader + body);
    return load_panel(in, f).panel;
}

DeflatorSeries flat_deflator(int from_year, int to_year, Frequency f = Frequency::yearly) {
    DeflatorSeries d;
    d.base_year = 2010;
    for (int y = std::min(from_year, 2010); y <= std::max(to_year, 2010); ++y) {
        if (f == Frequency::quarterly)
            for (int q = 1; q <= 4; ++q) d.index[{y, q}] = 100.0;
        else
            d.index[{y, 0}] = 100.0;
    }
    return d;
}

CleaningConfig lenient_config(Frequency f = Frequency::yearly) {
    CleaningConfig cfg = CleaningConfig::defaults(f);
    cfg.ratio_trim_lo = 0.0;
    cfg.ratio_trim_hi = 100.0;
    cfg.share_trim_lo = 0.0;
    cfg.share_trim_hi = 100.0;
    cfg.min_pre_periods = 1;
    cfg.deflator = flat_deflator(2000, 2021, f);
    return cfg;
}

}  // namespace

TEST_CASE("load_panel groups rows into ordered firm series") {
    const auto panel = load_from(
        "A,2019,100,60,20,50,1,10\n"
        "A,2020,110,66,22,50,1,10\n");
    CHECK(panel.firms.size() == 1);
    CHECK(panel.firms[0].observations.size() == 2);
    CHECK(panel.firms[0].entry_period() == Period{2019, 0});
    CHECK(panel.firms[0].exit_period() == Period{2020, 0});

    const auto three = load_from(
        "B,2020,1,1,0,1,1,10\n"
        "A,2019,1,1,0,1,1,10\n"
        "C,2019,1,1,0,1,1,10\n"
        "A,2020,1,1,0,1,1,10\n"
        "C,2020,1,1,0,1,1,10\n"
        "B,2019,1,1,0,1,1,10\n");
    CHECK(three.firms.size() == 3);
    for (const auto& f : three.firms) CHECK(f.observations.size() == 2);
    CHECK(three.firms[0].firm_id == "A");  // sorted by firm
    CHECK(three.firms[2].firm_id == "C");
}

TEST_CASE("load_panel rejects duplicates and missing columns") {
    CHECK_THROWS_AS(load_from("A,2020,1,1,0,1,1,10\nA,2020,2,2,0,2,2,10\n"), IntegrityError);

    std::istringstream bad_header("firm_id,period,sales\nA,2020,1\n");
    CHECK_THROWS_AS(load_panel(bad_header, Frequency::yearly), SchemaError);

    // frequency mismatch is structural
    CHECK_THROWS_AS(load_from("A,2020Q1,1,1,0,1,1,10\n"), IntegrityError);
}

TEST_CASE("load_panel drops unparseable rows and counts them") {
    std::istringstream in(std::string(kHeader) +
                          "A,2019,100,60,20,50,1,10\n"
                          "A,2020,not_a_number,60,20,50,1,10\n"
                          "A,20xx,100,60,20,50,1,10\n");
    const auto result = load_panel(in, Frequency::yearly);
    CHECK(result.rows_dropped_unparseable == 2);
    CHECK(result.panel.n_observations() == 1);
}

TEST_CASE("markup and profit rate formulas") {
    IndustryElasticityTable theta;
    theta.set_default(1.0);
    FirmObservation obs;
    obs.naics2 = 10;
    obs.period = {2020, 0};
    obs.sales = 200;
    obs.cogs = 100;
    CHECK(compute_markup(obs, theta) == doctest::Approx(2.0));

    obs.sales = obs.cogs = 150;
    CHECK(compute_markup(obs, theta) == doctest::Approx(1.0));

    IndustryElasticityTable t85;
    t85.set_default(0.85);
    obs.sales = 159894;
    obs.cogs = 94946;
    CHECK(compute_markup(obs, t85) == doctest::Approx(0.85 * 159894.0 / 94946.0));
    CHECK(compute_markup(obs, t85) == doctest::Approx(1.4315).epsilon(1e-3));

    obs.cogs = 0;
    CHECK_THROWS_AS(compute_markup(obs, theta), DomainError);

    FirmObservation pr;
    pr.sales = 100;
    pr.cogs = 60;
    pr.xsga = 20;
    CHECK(compute_profit_rate(pr) == doctest::Approx(0.20));
    pr.cogs = 100;
    pr.xsga = 0;
    CHECK(compute_profit_rate(pr) == doctest::Approx(0.0));
    pr.cogs = 90;
    pr.xsga = 30;
    CHECK(compute_profit_rate(pr) == doctest::Approx(-0.20));
    pr.sales = 0;
    CHECK_THROWS_AS(compute_profit_rate(pr), DomainError);
}

TEST_CASE("markup homogeneity properties") {
    Rng rng(8);
    for (int rep = 0; rep < 50; ++rep) {
        FirmObservation obs;
        obs.naics2 = 10;
        obs.period = {2019, 0};
        obs.sales = 10.0 + 500.0 * rng.uniform();
        obs.cogs = 5.0 + 300.0 * rng.uniform();
        obs.xsga = 100.0 * rng.uniform();
        const double theta_value = 0.5 + rng.uniform();
        const double scale = 0.5 + 4.0 * rng.uniform();

        IndustryElasticityTable t1, t2;
        t1.set_default(theta_value);
        t2.set_default(scale * theta_value);
        // degree 1 in theta
        CHECK(compute_markup(obs, t2) ==
              doctest::Approx(scale * compute_markup(obs, t1)).epsilon(1e-12));
        // degree 0 under common scaling of sales and cogs
        FirmObservation scaled = obs;
        scaled.sales *= scale;
        scaled.cogs *= scale;
        CHECK(compute_markup(scaled, t1) == doctest::Approx(compute_markup(obs, t1)).epsilon(1e-12));
        // profit rate invariant under common scaling of all three
        scaled.xsga *= scale;
        CHECK(compute_profit_rate(scaled) == doctest::Approx(compute_profit_rate(obs)).epsilon(1e-12));
    }
}

TEST_CASE("elasticity lookup precedence and failure") {
    std::istringstream in(
        "naics2,period,theta\n"
        "*,*,0.9\n"
        "10,*,0.8\n"
        "10,2020,0.7\n");
    const auto table = IndustryElasticityTable::load(in);
    CHECK(table.lookup(10, {2020, 0}) == doctest::Approx(0.7));
    CHECK(table.lookup(10, {2019, 0}) == doctest::Approx(0.8));
    CHECK(table.lookup(55, {2019, 0}) == doctest::Approx(0.9));

    std::istringstream no_default("naics2,period,theta\n10,2020,0.7\n");
    const auto strict = IndustryElasticityTable::load(no_default);
    CHECK_THROWS_AS(strict.lookup(11, {2020, 0}), CoverageError);

    std::istringstream nonpositive("naics2,period,theta\n10,2020,0\n");
    CHECK_THROWS_AS(IndustryElasticityTable::load(nonpositive), IntegrityError);
}

TEST_CASE("cleaning step 1 removes non-positive rows") {
    const auto panel = load_from(
        "A,2019,-5,60,20,50,1,10\n"
        "B,2019,100,60,20,50,1,10\n"
        "B,2020,100,60,20,50,1,10\n");
    const auto result = clean_panel(panel, lenient_config());
    CHECK(result.log.removed_nonpositive == 1);
    CHECK(result.panel.firms.size() == 1);
    CHECK(result.panel.firms[0].firm_id == "B");
}

TEST_CASE("identical ratios across firms survive the trim (ties kept)") {
    std::string body;
    for (int i = 0; i < 20; ++i) {
        const std::string id = "F" + std::to_string(i);
        body += id + ",2019,100,60,20,50,1,10\n";
        body += id + ",2020,100,60,20,50,1,10\n";
    }
    const auto panel = load_from(body);
    CleaningConfig cfg = lenient_config();
    cfg.ratio_trim_lo = 1.0;
    cfg.ratio_trim_hi = 99.0;
    cfg.share_trim_lo = 1.0;
    cfg.share_trim_hi = 99.0;
    const auto result = clean_panel(panel, cfg);
    CHECK(result.log.removed_ratio_trim == 0);
    CHECK(result.log.removed_share_trim == 0);
    CHECK(result.panel.firms.size() == 20);
}

TEST_CASE("planted ratio outliers are trimmed; brute-force threshold agrees") {
    // 200 firms in one period; two planted extreme COGS/sales ratios sit
    // strictly above the interpolated 99th percentile
    std::string body;
    std::vector<double> ratios;
    Rng rng(4);
    for (int i = 0; i < 200; ++i) {
        std::string id = std::to_string(i);
        id.insert(0, 3 - id.size(), '0');
        id.insert(0, "F");
        double cogs = 40.0 + 20.0 * rng.uniform();
        if (i == 7) cogs = 500.0;  // planted high outliers
        if (i == 42) cogs = 450.0;
        ratios.push_back(cogs / 100.0);
        body += id + ",2018,100,50,20,50,1,10\n";
        body += id + ",2019,100," + std::to_string(cogs) + ",20,50,1,10\n";
        body += id + ",2020,100,50,20,50,1,10\n";
    }
    const auto panel = load_from(body);
    CleaningConfig cfg = lenient_config();
    cfg.ratio_trim_lo = 0.0;  // only the upper trim binds here
    cfg.ratio_trim_hi = 99.0;
    const auto result = clean_panel(panel, cfg);

    // brute-force oracle: linear-interpolation percentile over the 2019 ratios
    const double hi = quantile(ratios, 0.99);
    int expected = 0;
    for (double r : ratios)
        if (r > hi) ++expected;
    CHECK(expected == 2);
    CHECK(result.log.removed_ratio_trim == 2);
    // the trimmed firms lose 2019 but keep 2018 and 2020
    REQUIRE(result.panel.find("F007") != nullptr);
    CHECK(result.panel.find("F007")->observations.size() == 2);
    REQUIRE(result.panel.find("F042") != nullptr);
    CHECK(result.panel.find("F042")->observations.size() == 2);
}

TEST_CASE("deflation divides currency by the period factor") {
    const auto panel = load_from("A,2019,200,100,50,80,1,10\nA,2020,200,100,50,80,1,10\n");
    CleaningConfig cfg = lenient_config();
    cfg.deflator.index[{2019, 0}] = 200.0;  // factor 2 vs base 100
    const auto result = clean_panel(panel, cfg);
    const auto& obs = result.panel.firms[0].observations;
    CHECK(obs[0].sales == doctest::Approx(100.0));
    CHECK(obs[0].cogs == doctest::Approx(50.0));
    CHECK(obs[1].sales == doctest::Approx(200.0));

    CleaningConfig gap = lenient_config();
    gap.deflator.index.erase({2020, 0});
    CHECK_THROWS_AS(clean_panel(panel, gap), CoverageError);
}

TEST_CASE("step 6 drops short or exiting firms") {
    const auto panel = load_from(
        "A,2018,100,60,20,50,1,10\n"
        "A,2019,100,60,20,50,1,10\n"
        "A,2020,100,60,20,50,1,10\n"
        "B,2019,100,60,20,50,1,10\n"   // exits before treatment
        "C,2019,100,60,20,50,1,10\n"   // too short pre-treatment
        "C,2020,100,60,20,50,1,10\n");
    CleaningConfig cfg = lenient_config();
    cfg.min_pre_periods = 2;
    const auto result = clean_panel(panel, cfg);
    CHECK(result.panel.firms.size() == 1);
    CHECK(result.panel.firms[0].firm_id == "A");
    CHECK(result.log.firms_removed_short == 2);
}

TEST_CASE("cleaning with fixed thresholds is idempotent") {
    std::string body;
    Rng rng(12);
    for (int i = 0; i < 60; ++i) {
        const std::string id = "F" + std::to_string(100 + i);
        for (int year = 2017; year <= 2020; ++year) {
            const double cogs = 30.0 + 40.0 * rng.uniform();
            const double xsga = 5.0 + 30.0 * rng.uniform();
            body += id + "," + std::to_string(year) + ",100," + std::to_string(cogs) + "," +
                    std::to_string(xsga) + ",50,1,10\n";
        }
    }
    const auto panel = load_from(body);
    CleaningConfig cfg = CleaningConfig::defaults(Frequency::yearly);
    cfg.deflator = flat_deflator(2017, 2020);
    cfg.min_pre_periods = 1;

    const auto first = clean_panel(panel, cfg);
    const auto second = clean_panel(first.panel, cfg, first.log.thresholds);
    CHECK(second.log.removed_ratio_trim == 0);
    CHECK(second.log.removed_share_trim == 0);
    CHECK(second.log.removed_nonpositive == 0);
    CHECK(second.panel.n_observations() == first.panel.n_observations());
    // same rows, deflation already applied once so values must not shrink again
    CHECK(second.panel.firms[0].observations[0].sales ==
          doctest::Approx(first.panel.firms[0].observations[0].sales));
}

TEST_CASE("empty result raises the explicit empty error") {
    const auto panel = load_from("A,2019,-1,1,1,1,1,10\n");
    CHECK_THROWS_AS(clean_panel(panel, lenient_config()), DataError);
}

TEST_CASE("entry and exit rates") {
    const auto panel = load_from(
        "A,2018,1,1,0,1,1,10\n"
        "A,2019,1,1,0,1,1,10\n"
        "A,2020,1,1,0,1,1,10\n");
    const auto rates = entry_exit_rates(panel);
    CHECK(rates.size() == 3);
    CHECK(rates[0].entry_rate == doctest::Approx(1.0));
    CHECK(rates[0].exit_rate == doctest::Approx(0.0));
    CHECK(rates[1].entry_rate == doctest::Approx(0.0));
    CHECK(rates[2].exit_rate == doctest::Approx(1.0));

    // disjoint spans: brute-force enumeration
    const auto two = load_from(
        "A,2018,1,1,0,1,1,10\n"
        "A,2019,1,1,0,1,1,10\n"
        "B,2020,1,1,0,1,1,10\n"
        "B,2021,1,1,0,1,1,10\n");
    const auto r2 = entry_exit_rates(two);
    CHECK(r2.size() == 4);
    CHECK(r2[0].entry_rate == doctest::Approx(1.0));  // 2018: A enters
    CHECK(r2[1].exit_rate == doctest::Approx(1.0));   // 2019: A exits
    CHECK(r2[2].entry_rate == doctest::Approx(1.0));  // 2020: B enters
    CHECK(r2[3].exit_rate == doctest::Approx(1.0));

    // conservation: entries and exits both sum to the number of firms
    int entries = 0, exits = 0;
    for (const auto& r : r2) {
        entries += r.entries;
        exits += r.exits;
    }
    CHECK(entries == 2);
    CHECK(exits == 2);

    CHECK_THROWS_AS(entry_exit_rates(PanelDataset{}), DataError);
}

TEST_CASE("rolling coefficient of variation") {
    const std::vector<double> constant(8, 3.0);
    for (const auto& v : rolling_cv(constant, 5)) {
        REQUIRE(v.has_value());
        CHECK(*v == doctest::Approx(0.0));
    }

    const std::vector<double> spike{1, 1, 1, 1, 1, 11};
    const auto cv = rolling_cv(spike, 5);
    REQUIRE(cv.size() == 2);
    CHECK(*cv[0] == doctest::Approx(0.0));
    CHECK(*cv[1] == doctest::Approx(std::sqrt(20.0) / 3.0).epsilon(1e-9));

    CHECK(rolling_cv(std::vector<double>{1, 2, 3, 4}, 5).empty());

    const std::vector<double> zero_mean{1, -1, 1, -1, 0, 5};
    const auto zm = rolling_cv(zero_mean, 5);
    CHECK_FALSE(zm[0].has_value());  // window (1,-1,1,-1,0) has mean 0
    CHECK(zm[1].has_value());
}

TEST_CASE("derived covariates: market share, tenure, window flags") {
    const auto panel = load_from(
        "A,2015,30,10,1,5,2,10\n"
        "A,2016,30,10,1,5,2,10\n"
        "B,2015,70,20,1,5,4,10\n"
        "B,2016,70,20,1,5,4,10\n"
        "C,2016,50,20,1,5,3,20\n"   // single-firm industry
        "D,2020,10,5,1,5,1,20\n");  // outside the window
    const auto covs = derive_covariates(panel, 2015, 2016, {2020, 0});
    REQUIRE(covs.size() == 4);
    CHECK(covs[0].firm_id == "A");
    CHECK(covs[0].market_share == doctest::Approx(0.3));
    CHECK(covs[1].market_share == doctest::Approx(0.7));
    CHECK(covs[2].market_share == doctest::Approx(1.0));
    CHECK(covs[3].missing);

    CHECK(covs[0].tenure == doctest::Approx(5.0));  // entered 2015, treated 2020
    CHECK(covs[2].tenure == doctest::Approx(4.0));

    CHECK(covs[0].log_sales == doctest::Approx(std::log(30.0)));
    CHECK(covs[0].log_emp == doctest::Approx(std::log(2.0)));

    // shares sum to one within each industry-period
    CHECK(covs[0].market_share + covs[1].market_share == doctest::Approx(1.0).epsilon(1e-9));

    CHECK_THROWS_AS(derive_covariates(panel, 2015, 2020, {2020, 0}), DomainError);
}

TEST_CASE("tenure counts years for quarterly panels") {
    const auto panel = load_from(
        "A,2010Q1,10,5,1,5,1,10\n"
        "A,2010Q2,10,5,1,5,1,10\n"
        "A,2015Q4,10,5,1,5,1,10\n",
        Frequency::quarterly);
    const auto covs = derive_covariates(panel, 2009, 2015, {2020, 1});
    CHECK(covs[0].tenure == doctest::Approx(10.0));
}

TEST_CASE("longest contiguous pre-treatment run") {
    auto panel = load_from(
        "A,2010,1,1,0,1,1,10\n"
        "A,2011,2,1,0,1,1,10\n"
        "A,2013,3,1,0,1,1,10\n"
        "A,2014,4,1,0,1,1,10\n"
        "A,2015,5,1,0,1,1,10\n"
        "A,2020,9,1,0,1,1,10\n");
    IndustryElasticityTable theta;
    theta.set_default(1.0);
    compute_outcomes(panel, theta);
    const auto run = longest_pretreatment_run(panel.firms[0], Outcome::markup, {2020, 0},
                                              Frequency::yearly);
    REQUIRE(run.periods.size() == 3);
    CHECK(run.periods.front() == Period{2013, 0});
    CHECK(run.periods.back() == Period{2015, 0});
    CHECK(run.values[0] == doctest::Approx(3.0));

    // ties: prefer the most recent run
    auto tie = load_from(
        "B,2010,1,1,0,1,1,10\n"
        "B,2011,1,1,0,1,1,10\n"
        "B,2014,1,1,0,1,1,10\n"
        "B,2015,1,1,0,1,1,10\n");
    compute_outcomes(tie, theta);
    const auto tie_run =
        longest_pretreatment_run(tie.firms[0], Outcome::markup, {2020, 0}, Frequency::yearly);
    CHECK(tie_run.periods.front() == Period{2014, 0});
}
