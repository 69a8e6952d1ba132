#pragma once

#include <span>
#include <vector>

#include "countercast/period.hpp"

namespace ccast {

struct HpDecomposition {
    std::vector<double> trend;
    std::vector<double> cycle;
};

/// Hodrick-Prescott decomposition: trend minimizes
/// sum (y - tau)^2 + lambda * sum (second differences of tau)^2,
/// solved exactly via the pentadiagonal normal equations; cycle = y - trend.
/// Requires length >= 4 and lambda > 0.
HpDecomposition hp_filter(std::span<const double> y, double lambda);

/// 1600 for quarterly input, 100 for yearly.
double hp_default_lambda(Frequency f);

}  // namespace ccast
