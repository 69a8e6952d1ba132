#include "countercast/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "countercast/errors.hpp"

namespace ccast {

double mean(std::span<const double> x) {
    if (x.empty()) throw DomainError("mean of empty sample");
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

double sample_var(std::span<const double> x) {
    if (x.size() < 2) throw DomainError("sample variance needs n >= 2");
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return ss / static_cast<double>(x.size() - 1);
}

double sample_sd(std::span<const double> x) { return std::sqrt(sample_var(x)); }

double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw DomainError("quantile of empty sample");
    if (q < 0.0 || q > 1.0) throw DomainError("quantile level outside [0,1]");
    const std::size_t n = sorted.size();
    if (n == 1) return sorted[0];
    const double h = static_cast<double>(n - 1) * q;
    const auto lo = static_cast<std::size_t>(h);
    if (lo + 1 >= n) return sorted[n - 1];
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double quantile(std::span<const double> x, double q) {
    std::vector<double> copy(x.begin(), x.end());
    std::sort(copy.begin(), copy.end());
    return quantile_sorted(copy, q);
}

double median(std::span<const double> x) { return quantile(x, 0.5); }

namespace {

struct CentralMoments {
    double m2, m3, m4;
};

CentralMoments central_moments(std::span<const double> x) {
    const double m = mean(x);
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : x) {
        const double d = v - m;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    const auto n = static_cast<double>(x.size());
    return {m2 / n, m3 / n, m4 / n};
}

}  // namespace

double skewness_biased(std::span<const double> x) {
    const auto [m2, m3, m4] = central_moments(x);
    if (m2 <= 0.0) throw DegenerateSeriesError("skewness of constant sample");
    return m3 / std::pow(m2, 1.5);
}

double kurtosis_biased(std::span<const double> x) {
    const auto [m2, m3, m4] = central_moments(x);
    if (m2 <= 0.0) throw DegenerateSeriesError("kurtosis of constant sample");
    return m4 / (m2 * m2);
}

double chi2_2df_upper_tail(double x) {
    if (x <= 0.0) return 1.0;
    return std::exp(-0.5 * x);
}

double correlation(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw AlignmentError("correlation inputs differ in length");
    const double mx = mean(x), my = mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) throw DegenerateSeriesError("correlation with constant series");
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace ccast
