#include <doctest.h>

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "countercast/errors.hpp"
#include "countercast/hp_filter.hpp"

using namespace ccast;

TEST_CASE("linear series has zero cycle") {
    std::vector<double> y(30);
    for (int t = 0; t < 30; ++t) y[t] = 2.0 + 0.5 * t;
    const auto hp = hp_filter(y, 1600.0);
    for (double c : hp.cycle) CHECK(std::abs(c) < 1e-8);
}

TEST_CASE("constant series equals its trend") {
    const std::vector<double> y(10, 4.2);
    const auto hp = hp_filter(y, 100.0);
    for (std::size_t t = 0; t < y.size(); ++t) {
        CHECK(hp.trend[t] == doctest::Approx(4.2).epsilon(1e-10));
        CHECK(hp.cycle[t] == doctest::Approx(0.0).epsilon(1e-10));
    }
}

TEST_CASE("matches a dense solve of the normal equations") {
    const std::vector<double> y{1, 2, 4, 8, 16, 32};
    const double lambda = 1600.0;
    const auto hp = hp_filter(y, lambda);

    // dense oracle: (I + lambda D'D) tau = y
    const int n = 6;
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n - 2, n);
    for (int i = 0; i < n - 2; ++i) {
        D(i, i) = 1.0;
        D(i, i + 1) = -2.0;
        D(i, i + 2) = 1.0;
    }
    const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) + lambda * D.transpose() * D;
    Eigen::VectorXd rhs(n);
    for (int i = 0; i < n; ++i) rhs(i) = y[i];
    const Eigen::VectorXd tau = A.fullPivLu().solve(rhs);
    for (int i = 0; i < n; ++i) {
        CHECK(hp.trend[i] == doctest::Approx(tau(i)).epsilon(1e-10));
        CHECK(hp.cycle[i] == doctest::Approx(y[i] - tau(i)).epsilon(1e-10));
    }
}

TEST_CASE("domain and length checks") {
    const std::vector<double> y{1, 2, 3, 4, 5};
    CHECK_THROWS_AS(hp_filter(y, 0.0), DomainError);
    CHECK_THROWS_AS(hp_filter(y, -5.0), DomainError);
    CHECK_THROWS_AS(hp_filter(std::vector<double>{1, 2, 3}, 100.0), SampleSizeError);
}

TEST_CASE("default smoothing weights by frequency") {
    CHECK(hp_default_lambda(Frequency::quarterly) == 1600.0);
    CHECK(hp_default_lambda(Frequency::yearly) == 100.0);
}
