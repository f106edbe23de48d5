#pragma once

#include "gocpd/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>

namespace gocpd {

inline constexpr double kInitialJitter = 1e-8;
inline constexpr double kMaxJitter = 1e-4;
inline constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

/// log|A| from a Cholesky factorization, reading the diagonal in place.
inline double log_determinant(const Eigen::LLT<Eigen::MatrixXd> &llt) {
    const auto &lower = llt.matrixLLT();
    double sum = 0.0;
    for (Eigen::Index i = 0; i < lower.rows(); ++i) {
        sum += std::log(lower(i, i));
    }
    return 2.0 * sum;
}

/// Cholesky factor of a symmetric matrix. The plain matrix is tried first;
/// on failure eps*I is added with eps = 1e-8, 2e-8, ... up to 1e-4.
struct JitteredCholesky {
    Eigen::LLT<Eigen::MatrixXd> llt;
    double jitter = 0.0;

    double log_determinant() const { return gocpd::log_determinant(llt); }
};

inline JitteredCholesky jittered_cholesky(const Eigen::MatrixXd &matrix) {
    JitteredCholesky out;
    out.llt.compute(matrix);
    if (out.llt.info() == Eigen::Success && out.llt.matrixLLT().diagonal().minCoeff() > 0.0) {
        return out;
    }
    const auto n = matrix.rows();
    for (double eps = kInitialJitter; eps <= kMaxJitter * (1.0 + 1e-12); eps *= 2.0) {
        out.llt.compute(matrix + eps * Eigen::MatrixXd::Identity(n, n));
        if (out.llt.info() == Eigen::Success && out.llt.matrixLLT().diagonal().minCoeff() > 0.0) {
            out.jitter = eps;
            return out;
        }
    }
    throw NonPositiveDefinite("matrix of size " + std::to_string(n) + " is not positive definite after jitter " +
                              std::to_string(kMaxJitter));
}

} // namespace gocpd
