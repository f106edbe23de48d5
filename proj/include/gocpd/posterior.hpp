#pragma once

#include <Eigen/Dense>

#include <cstddef>

namespace gocpd {

/// Predictive distribution of the observations at a set of query inputs.
///
/// `mean` has one column per channel. Channels are independent and share the
/// same `covariance` block, so the flattened (channel-major) covariance is
/// block diagonal.
struct PosteriorSummary {
    Eigen::MatrixXd mean;
    Eigen::MatrixXd covariance;

    std::size_t size() const noexcept { return static_cast<std::size_t>(mean.rows()); }
    std::size_t channel_count() const noexcept { return static_cast<std::size_t>(mean.cols()); }

    /// Mean stacked channel after channel: [mu(x_1..x_n, 0), mu(x_1..x_n, 1), ...].
    Eigen::VectorXd flat_mean() const { return mean.reshaped(); }

    Eigen::MatrixXd dense_covariance() const {
        const auto n = covariance.rows();
        const auto c = mean.cols();
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n * c, n * c);
        for (Eigen::Index k = 0; k < c; ++k) {
            out.block(k * n, k * n, n, n) = covariance;
        }
        return out;
    }
};

} // namespace gocpd
