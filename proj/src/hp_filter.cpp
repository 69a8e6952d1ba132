#include "countercast/hp_filter.hpp"

#include <Eigen/Sparse>

#include "countercast/errors.hpp"

namespace ccast {

HpDecomposition hp_filter(std::span<const double> y, double lambda) {
    if (lambda <= 0.0) throw DomainError("HP filter smoothing weight must be positive");
    const auto n = static_cast<int>(y.size());
    if (n < 4) throw SampleSizeError("HP filter needs at least 4 observations");

    // A = I + lambda * D'D with D the (n-2) x n second-difference operator
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(5 * n);
    auto add = [&](int i, int j, double v) { entries.emplace_back(i, j, v); };
    for (int i = 0; i < n; ++i) {
        double diag;
        if (i == 0 || i == n - 1)
            diag = 1.0 + lambda;
        else if (i == 1 || i == n - 2)
            diag = 1.0 + 5.0 * lambda;
        else
            diag = 1.0 + 6.0 * lambda;
        add(i, i, diag);
    }
    for (int i = 0; i + 1 < n; ++i) {
        const double v = (i == 0 || i == n - 2) ? -2.0 * lambda : -4.0 * lambda;
        add(i, i + 1, v);
        add(i + 1, i, v);
    }
    for (int i = 0; i + 2 < n; ++i) {
        add(i, i + 2, lambda);
        add(i + 2, i, lambda);
    }

    Eigen::SparseMatrix<double> A(n, n);
    A.setFromTriplets(entries.begin(), entries.end());
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> solver;
    solver.compute(A);
    if (solver.info() != Eigen::Success) throw NumericalError("HP filter factorization failed");

    Eigen::VectorXd rhs(n);
    for (int i = 0; i < n; ++i) rhs(i) = y[i];
    const Eigen::VectorXd trend = solver.solve(rhs);

    HpDecomposition out;
    out.trend.assign(trend.data(), trend.data() + n);
    out.cycle.resize(n);
    for (int i = 0; i < n; ++i) out.cycle[i] = y[i] - out.trend[i];
    return out;
}

double hp_default_lambda(Frequency f) { return f == Frequency::quarterly ? 1600.0 : 100.0; }

}  // namespace ccast
