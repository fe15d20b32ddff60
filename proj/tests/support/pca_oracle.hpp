#pragma once

#include "gamenet/matrix.hpp"
#include "gamenet/rng.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace gamenet::testing {

/// RelMSE of the rank-r PCA reconstruction of x (columns centered on their means).
inline double pca_relmse(const Matrix& x, std::size_t r)
{
    const auto n = static_cast<Eigen::Index>(x.rows());
    const auto d = static_cast<Eigen::Index>(x.cols());
    Eigen::MatrixXd m(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            m(i, j) = x(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    const Eigen::RowVectorXd mean = m.colwise().mean();
    m.rowwise() -= mean;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.transpose() * m);
    const Eigen::MatrixXd v = es.eigenvectors().rightCols(static_cast<Eigen::Index>(r));
    const Eigen::MatrixXd resid = m - m * v * v.transpose();
    return resid.squaredNorm() / m.squaredNorm();
}

/// Rows of a rank-r linear model plus isotropic noise.
inline Matrix low_rank_data(Rng& rng, std::size_t n, std::size_t d, std::size_t r, double noise)
{
    Matrix basis(r, d);
    for (double& v : basis.values())
        v = rng.normal();
    Matrix x(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> z(r);
        for (double& v : z)
            v = rng.normal();
        for (std::size_t j = 0; j < d; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < r; ++k)
                s += z[k] * basis(k, j);
            x(i, j) = s + noise * rng.normal();
        }
    }
    return x;
}

} // namespace gamenet::testing
