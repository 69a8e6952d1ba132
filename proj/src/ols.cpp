#include "countercast/ols.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "countercast/errors.hpp"

namespace ccast {

OlsFit ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int absorbed_dof) {
    const auto n = static_cast<int>(X.rows());
    const auto k = static_cast<int>(X.cols());
    if (n != y.size()) throw AlignmentError("ols: X and y row counts differ");
    if (n < k + absorbed_dof) throw SampleSizeError("ols: more parameters than observations");

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() < k) throw CollinearityError("ols: rank-deficient design matrix");

    OlsFit fit;
    fit.n = n;
    fit.k = k;
    fit.beta = qr.solve(y);
    fit.residuals = y - X * fit.beta;
    fit.ssr = fit.residuals.squaredNorm();

    const double dof = n - k - absorbed_dof;
    const Eigen::MatrixXd xtx_inv = (X.transpose() * X).ldlt().solve(Eigen::MatrixXd::Identity(k, k));
    const double sigma2 = dof > 0 ? fit.ssr / dof : 0.0;
    fit.se_classical = (sigma2 * xtx_inv.diagonal()).cwiseMax(0.0).cwiseSqrt();

    // HC1: (X'X)^-1 X' diag(e^2) X (X'X)^-1 scaled by n/(n-k)
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
    for (int i = 0; i < n; ++i) {
        const double e2 = fit.residuals(i) * fit.residuals(i);
        meat.noalias() += e2 * X.row(i).transpose() * X.row(i);
    }
    const double scale = dof > 0 ? static_cast<double>(n) / dof : 0.0;
    const Eigen::MatrixXd sandwich = scale * xtx_inv * meat * xtx_inv;
    fit.se_hc1 = sandwich.diagonal().cwiseMax(0.0).cwiseSqrt();

    const double y_mean = y.mean();
    const double tss = (y.array() - y_mean).matrix().squaredNorm();
    fit.r2 = tss > 0.0 ? 1.0 - fit.ssr / tss : 0.0;
    return fit;
}

std::vector<int> collinear_columns(const Eigen::MatrixXd& X) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    const auto rank = qr.rank();
    const auto k = static_cast<int>(X.cols());
    std::vector<int> drop;
    if (rank >= k) return drop;
    // columns permuted past the rank index are the dependent ones
    const auto& perm = qr.colsPermutation().indices();
    for (int i = rank; i < k; ++i) drop.push_back(perm(i));
    std::sort(drop.begin(), drop.end());
    return drop;
}

void within_demean(Eigen::MatrixXd& X, Eigen::VectorXd& y, const std::vector<int>& group) {
    const auto n = static_cast<int>(y.size());
    if (static_cast<int>(group.size()) != n) throw AlignmentError("within_demean: group size");
    std::map<int, std::pair<Eigen::VectorXd, double>> sums;  // group -> (X sums, y sum)
    std::map<int, int> counts;
    for (int i = 0; i < n; ++i) {
        auto [it, fresh] = sums.try_emplace(group[i], Eigen::VectorXd::Zero(X.cols()), 0.0);
        it->second.first += X.row(i).transpose();
        it->second.second += y(i);
        ++counts[group[i]];
    }
    for (int i = 0; i < n; ++i) {
        const auto& [xs, ys] = sums.at(group[i]);
        const double c = counts.at(group[i]);
        X.row(i) -= (xs / c).transpose();
        y(i) -= ys / c;
    }
}

}  // namespace ccast
