#pragma once

#include <vector>

#include <Eigen/Dense>

namespace ccast {

struct OlsFit {
    Eigen::VectorXd beta;
    Eigen::VectorXd se_classical;
    Eigen::VectorXd se_hc1;
    Eigen::VectorXd residuals;
    double ssr = 0.0;
    double r2 = 0.0;
    int n = 0;
    int k = 0;  // columns of X actually used
};

/// Ordinary least squares via QR. `absorbed_dof` counts parameters absorbed
/// out of the regression before the call (group means in a within
/// transformation); it enters the degrees-of-freedom corrections only.
/// Throws CollinearityError when X is rank deficient.
OlsFit ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int absorbed_dof = 0);

/// Rank-revealing pass: returns indices of columns to drop so the remainder
/// has full column rank (empty when X already does).
std::vector<int> collinear_columns(const Eigen::MatrixXd& X);

/// Demeans y and the columns of X within each group; used for fixed-effect
/// absorption. `group` holds a group id per row.
void within_demean(Eigen::MatrixXd& X, Eigen::VectorXd& y, const std::vector<int>& group);

}  // namespace ccast
