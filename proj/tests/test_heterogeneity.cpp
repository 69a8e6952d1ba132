#include <doctest.h>

#include <array>
#include <cmath>
#include <map>
#include <vector>

#include "countercast/errors.hpp"
#include "countercast/heterogeneity.hpp"
#include "countercast/ols.hpp"
#include "countercast/rng.hpp"

using namespace ccast;

namespace {

std::vector<FirmCovariates> random_covariates(int n, std::uint64_t seed, int industries = 4) {
    std::vector<FirmCovariates> covs(n);
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        covs[i].firm_id = "F" + std::to_string(i);
        covs[i].naics2 = 10 + i % industries;
        covs[i].log_cogs = rng.normal(4.0, 1.0);
        covs[i].log_sales = covs[i].log_cogs + rng.normal(0.5, 0.3);
        covs[i].log_emp = rng.normal(0.0, 1.0);
        covs[i].tenure = 2.0 + 28.0 * rng.uniform();
        covs[i].market_share = rng.uniform() * 0.2;
    }
    return covs;
}

}  // namespace

TEST_CASE("constant outcome: intercept only, zero slopes, zero r2") {
    const auto covs = random_covariates(60, 7);
    std::vector<FirmEffectRow> rows;
    for (const auto& c : covs) rows.push_back({c.firm_id, 0.42, 1.5});
    const auto report = heterogeneity_regression(rows, covs, false);
    REQUIRE(report.names[0] == "intercept");
    CHECK(report.coef[0] == doctest::Approx(0.42).epsilon(1e-9));
    for (std::size_t i = 1; i < report.coef.size(); ++i)
        CHECK(report.coef[i] == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(report.r2 == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(report.mean_effect == doctest::Approx(0.42));
    CHECK(report.mean_outcome == doctest::Approx(1.5));
    CHECK(report.n == 60);
}

TEST_CASE("industry-only variation vanishes under fixed effects") {
    const auto covs = random_covariates(80, 11);
    std::vector<FirmEffectRow> rows;
    for (const auto& c : covs) rows.push_back({c.firm_id, 0.1 * c.naics2, 1.0});
    const auto report = heterogeneity_regression(rows, covs, true);
    CHECK(report.industry_fe);
    for (std::size_t i = 0; i < report.coef.size(); ++i)
        CHECK(report.coef[i] == doctest::Approx(0.0).epsilon(1e-8));
    CHECK(report.within_r2 == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(report.r2 == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("planted tenure gradient is recovered within two robust SEs") {
    const int n = 2000;
    const auto covs = random_covariates(n, 13, 6);
    Rng rng(17);
    std::vector<FirmEffectRow> rows;
    for (const auto& c : covs)
        rows.push_back({c.firm_id, 0.003 * c.tenure + rng.normal(0.0, 0.05), 1.6});

    for (const bool fe : {false, true}) {
        const auto report = heterogeneity_regression(rows, covs, fe);
        std::size_t tenure_idx = 0;
        for (std::size_t i = 0; i < report.names.size(); ++i)
            if (report.names[i] == "tenure") tenure_idx = i;
        CHECK(std::abs(report.coef[tenure_idx] - 0.003) <
              2.0 * report.robust_se[tenure_idx]);
        CHECK(report.robust_se[tenure_idx] > 0.0);
    }
}

TEST_CASE("frisch-waugh: fixed effects equal within-demeaned slopes") {
    const auto covs = random_covariates(120, 19);
    Rng rng(23);
    std::vector<FirmEffectRow> rows;
    for (const auto& c : covs)
        rows.push_back({c.firm_id,
                        0.05 * c.naics2 + 0.01 * c.tenure - 0.2 * c.market_share +
                            rng.normal(0.0, 0.1),
                        1.0});

    const auto fe_report = heterogeneity_regression(rows, covs, true);

    // manual within-demeaning, then a no-FE regression without intercept
    std::vector<FirmCovariates> demeaned = covs;
    std::vector<FirmEffectRow> rows_demeaned = rows;
    std::map<int, std::array<double, 6>> sums;
    std::map<int, int> counts;
    for (std::size_t i = 0; i < covs.size(); ++i) {
        auto& s = sums[covs[i].naics2];
        s[0] += covs[i].log_cogs;
        s[1] += covs[i].log_sales;
        s[2] += covs[i].log_emp;
        s[3] += covs[i].tenure;
        s[4] += covs[i].market_share;
        s[5] += rows[i].average_effect;
        ++counts[covs[i].naics2];
    }
    for (std::size_t i = 0; i < covs.size(); ++i) {
        const auto& s = sums[covs[i].naics2];
        const double c = counts[covs[i].naics2];
        demeaned[i].log_cogs -= s[0] / c;
        demeaned[i].log_sales -= s[1] / c;
        demeaned[i].log_emp -= s[2] / c;
        demeaned[i].tenure -= s[3] / c;
        demeaned[i].market_share -= s[4] / c;
        demeaned[i].naics2 = 1;  // single pseudo-industry
        rows_demeaned[i].average_effect -= s[5] / c;
    }
    const auto manual = heterogeneity_regression(rows_demeaned, demeaned, true);
    for (std::size_t i = 0; i < fe_report.coef.size(); ++i)
        CHECK(fe_report.coef[i] == doctest::Approx(manual.coef[i]).epsilon(1e-8));
}

TEST_CASE("hc1 equals classical standard errors under constant |residual|") {
    // intercept plus balanced dummy; residuals alternate +-c within groups
    const int n = 40;
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = i < n / 2 ? 0.0 : 1.0;
        const double e = (i % 2 == 0 ? 0.7 : -0.7);
        y(i) = 2.0 + 3.0 * X(i, 1) + e;
    }
    const OlsFit fit = ols(X, y);
    for (int k = 0; k < 2; ++k)
        CHECK(fit.se_hc1(k) == doctest::Approx(fit.se_classical(k)).epsilon(1e-8));
}

TEST_CASE("collinear covariates are dropped by name") {
    auto covs = random_covariates(50, 29);
    for (auto& c : covs) c.log_emp = 0.0;  // constant column collides with the intercept
    std::vector<FirmEffectRow> rows;
    Rng rng(31);
    for (const auto& c : covs) rows.push_back({c.firm_id, rng.normal(), 1.0});
    const auto report = heterogeneity_regression(rows, covs, false);
    REQUIRE(report.dropped.size() == 1);
    CHECK(report.dropped[0] == "log_emp");
    for (const auto& name : report.names) CHECK(name != "log_emp");
}

TEST_CASE("too few complete firms raises a sample-size error") {
    auto covs = random_covariates(12, 37);
    for (std::size_t i = 4; i < covs.size(); ++i) covs[i].missing = true;
    std::vector<FirmEffectRow> rows;
    for (const auto& c : covs) rows.push_back({c.firm_id, 0.0, 1.0});
    CHECK_THROWS_AS(heterogeneity_regression(rows, covs, false), SampleSizeError);
}

TEST_CASE("binscatter: flat effects, monotone effects, equal bins") {
    std::vector<double> cov(100), eff_flat(100, 0.5), eff_id(100);
    for (int i = 0; i < 100; ++i) {
        cov[i] = i;
        eff_id[i] = i;
    }
    const auto flat = binscatter(cov, eff_flat, 5);
    REQUIRE(flat.bins.size() == 5);
    for (const auto& b : flat.bins) {
        CHECK(b.effect_mean == doctest::Approx(0.5));
        CHECK(b.lo == doctest::Approx(0.5));
        CHECK(b.hi == doctest::Approx(0.5));
        CHECK(b.n == 20);
    }
    const auto rising = binscatter(cov, eff_id, 5);
    for (std::size_t b = 1; b < rising.bins.size(); ++b) {
        CHECK(rising.bins[b].effect_mean > rising.bins[b - 1].effect_mean);
        CHECK(rising.bins[b].covariate_mean > rising.bins[b - 1].covariate_mean);
    }

    // heavy ties reduce the bin count with a warning flag
    const std::vector<double> tied(30, 1.0);
    const std::vector<double> tied_effects(30, 0.5);
    const auto reduced = binscatter(tied, tied_effects, 5);
    CHECK(reduced.reduced);
    CHECK(reduced.bins.size() == 1);
}

TEST_CASE("industry breakdown ordering and reconstruction") {
    std::vector<IndustryEffectInput> inputs;
    // industry 20 has effect +1, industry 10 has effect -1, equal weights
    for (int i = 0; i < 4; ++i) {
        IndustryEffectInput in;
        in.firm_id = "F" + std::to_string(i);
        in.naics2 = i < 2 ? 10 : 20;
        in.year = 2020;
        in.effect = i < 2 ? -1.0 : 1.0;
        in.weight = 1.0;
        inputs.push_back(in);
    }
    const auto breakdown = industry_breakdown(inputs);
    REQUIRE(breakdown.rows.size() == 2);
    CHECK(breakdown.rows[0].naics2 == 10);  // ascending by 2020 effect
    CHECK(breakdown.rows[0].weighted_mean_effect == doctest::Approx(-1.0));
    CHECK(breakdown.rows[1].weighted_mean_effect == doctest::Approx(1.0));

    // single industry equals the fleet weighted mean
    std::vector<IndustryEffectInput> one;
    Rng rng(43);
    double num = 0.0, den = 0.0;
    for (int i = 0; i < 20; ++i) {
        IndustryEffectInput in;
        in.firm_id = "G" + std::to_string(i);
        in.naics2 = 10;
        in.year = 2020;
        in.effect = rng.normal();
        in.weight = 1.0 + rng.uniform();
        num += in.weight * in.effect;
        den += in.weight;
        one.push_back(in);
    }
    const auto single = industry_breakdown(one);
    CHECK(single.rows[0].weighted_mean_effect == doctest::Approx(num / den).epsilon(1e-12));

    // weighted industry means aggregate back to the fleet weighted mean
    double agg = 0.0, wsum = 0.0;
    for (const auto& row : breakdown.rows) {
        agg += row.weighted_mean_effect * row.weight_total;
        wsum += row.weight_total;
    }
    CHECK(agg / wsum == doctest::Approx(0.0).epsilon(1e-10));  // (-1-1+1+1)/4

    IndustryEffectInput bad;
    bad.firm_id = "X";
    bad.naics2 = 0;
    CHECK_THROWS_AS(industry_breakdown(std::vector<IndustryEffectInput>{bad}), IntegrityError);
}

TEST_CASE("planted industry shock shows up in the breakdown") {
    Rng rng(47);
    std::vector<IndustryEffectInput> inputs;
    for (int i = 0; i < 150; ++i) {
        IndustryEffectInput in;
        in.firm_id = "F" + std::to_string(i);
        in.naics2 = 10 + i % 3;
        in.year = 2020;
        in.effect = (in.naics2 == 11 ? -0.5 : 0.0) + rng.normal(0.0, 0.3);
        in.weight = 1.0;
        inputs.push_back(in);
    }
    const auto breakdown = industry_breakdown(inputs);
    CHECK(breakdown.rows[0].naics2 == 11);  // most negative first
    CHECK(std::abs(breakdown.rows[0].weighted_mean_effect + 0.5) < 0.1);
}
