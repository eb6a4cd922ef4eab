#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace gpfvm::bench {

/// sqrt(mean((a - b)^2)).
inline double rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
    if (pred.size() != truth.size() || pred.size() == 0) throw std::invalid_argument("rmse: need equal, non-empty vectors");
    return std::sqrt((pred - truth).squaredNorm() / static_cast<double>(pred.size()));
}

/// Maximum absolute error.
inline double mae(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
    if (pred.size() != truth.size() || pred.size() == 0) throw std::invalid_argument("mae: need equal, non-empty vectors");
    return (pred - truth).cwiseAbs().maxCoeff();
}

/// Kendall tau-b rank correlation; ties in either sequence are accounted for.
inline double kendall_tau(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("kendall_tau: sequences differ in length");
    const std::size_t n = x.size();
    double concordant = 0, discordant = 0, ties_x = 0, ties_y = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = x[j] - x[i], dy = y[j] - y[i];
            if (dx == 0 && dy == 0) continue;
            if (dx == 0) {
                ties_x += 1;
            } else if (dy == 0) {
                ties_y += 1;
            } else if ((dx > 0) == (dy > 0)) {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    const double denom = std::sqrt((concordant + discordant + ties_x) * (concordant + discordant + ties_y));
    return denom > 0 ? (concordant - discordant) / denom : 0.0;
}

}  // namespace gpfvm::bench
