#pragma once

#include "gocpd/errors.hpp"
#include "gocpd/linalg.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>

namespace gocpd {

/// Inverse and log-determinant of a symmetric positive-definite Toeplitz
/// matrix given by its first column, in O(n^2) (Durbin recursion followed by
/// Trench's algorithm).
struct ToeplitzInverse {
    Eigen::MatrixXd inverse;
    double log_determinant = 0.0;
    double jitter = 0.0;
};

namespace detail {

/// Returns nullopt when the matrix is not numerically positive definite.
inline std::optional<ToeplitzInverse> try_toeplitz_inverse(const Eigen::VectorXd &column) {
    const Eigen::Index n = column.size();
    const double c0 = column(0);
    if (!(c0 > 0.0) || !std::isfinite(c0)) {
        return std::nullopt;
    }
    ToeplitzInverse out;
    out.inverse.resize(n, n);
    if (n == 1) {
        out.inverse(0, 0) = 1.0 / c0;
        out.log_determinant = std::log(c0);
        return out;
    }

    // Normalized off-diagonal r(1..n-1); Durbin solves T_{n-1} y = -r.
    const Eigen::Index m = n - 1;
    const Eigen::VectorXd r = column.tail(m) / c0;
    Eigen::VectorXd y(m);
    Eigen::VectorXd z(m);
    double beta = 1.0;
    double alpha = -r(0);
    y(0) = alpha;
    double log_det = 0.0;
    for (Eigen::Index k = 1; k < m; ++k) {
        beta *= (1.0 - alpha * alpha);
        if (!(beta > 0.0)) {
            return std::nullopt;
        }
        log_det += std::log(beta);
        double dot = r(k);
        for (Eigen::Index i = 0; i < k; ++i) {
            dot += r(k - 1 - i) * y(i);
        }
        alpha = -dot / beta;
        if (!(std::abs(alpha) < 1.0)) {
            return std::nullopt;
        }
        for (Eigen::Index i = 0; i < k; ++i) {
            z(i) = y(i) + alpha * y(k - 1 - i);
        }
        y.head(k) = z.head(k);
        y(k) = alpha;
    }
    const double last = 1.0 + r.dot(y);
    if (!(last > 0.0) || !std::isfinite(last)) {
        return std::nullopt;
    }
    log_det += std::log(last);

    // Trench: first row from y, interior by the displacement recursion, rest
    // from symmetry and persymmetry.
    const double gamma = 1.0 / last;
    Eigen::VectorXd v(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        v(i) = gamma * y(m - 1 - i);
    }
    if (!v.allFinite()) {
        return std::nullopt;
    }
    Eigen::MatrixXd &b = out.inverse;
    b(0, 0) = gamma;
    for (Eigen::Index j = 1; j < n; ++j) {
        b(0, j) = v(m - j);
    }
    for (Eigen::Index i = 1; i <= m / 2; ++i) {
        for (Eigen::Index j = i; j < n - i; ++j) {
            b(i, j) = b(i - 1, j - 1) + (v(m - j) * v(m - i) - v(i - 1) * v(j - 1)) / gamma;
        }
    }
    for (Eigen::Index i = 0; i <= m / 2; ++i) {
        for (Eigen::Index j = i; j < n - i; ++j) {
            const double value = b(i, j);
            b(j, i) = value;
            b(n - 1 - j, n - 1 - i) = value;
            b(n - 1 - i, n - 1 - j) = value;
        }
    }
    b /= c0;
    out.log_determinant = static_cast<double>(n) * std::log(c0) + log_det;
    return out;
}

} // namespace detail

/// Same jitter schedule as jittered_cholesky: the plain matrix first, then
/// eps added to the diagonal for eps = 1e-8, 2e-8, ... up to 1e-4.
inline ToeplitzInverse toeplitz_inverse(const Eigen::VectorXd &column) {
    if (auto out = detail::try_toeplitz_inverse(column)) {
        return std::move(*out);
    }
    Eigen::VectorXd shifted = column;
    for (double eps = kInitialJitter; eps <= kMaxJitter * (1.0 + 1e-12); eps *= 2.0) {
        shifted(0) = column(0) + eps;
        if (auto out = detail::try_toeplitz_inverse(shifted)) {
            out->jitter = eps;
            return std::move(*out);
        }
    }
    throw NonPositiveDefinite("Toeplitz matrix of size " + std::to_string(column.size()) +
                              " is not positive definite after jitter " + std::to_string(kMaxJitter));
}

} // namespace gocpd
