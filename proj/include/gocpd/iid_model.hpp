#pragma once

#include "gocpd/linalg.hpp"
#include "gocpd/model.hpp"

#include <algorithm>
#include <cmath>

namespace gocpd {

/// y_t ~ N(mu_c, sigma^2) independently for every time step and channel c.
///
/// Fitting is closed form. With `fixed_variance` only the per-channel means are
/// learned and sigma stays at the prior's noise_std; otherwise sigma is the
/// pooled maximum-likelihood estimate, floored at FitOptions::min_noise_std.
class IidGaussianModel {
public:
    IidGaussianModel() : IidGaussianModel(ModelParams{}) {}

    explicit IidGaussianModel(ModelParams prior, FitOptions options = {}, bool fixed_variance = false)
        : prior_(std::move(prior)), params_(prior_), options_(options), fixed_variance_(fixed_variance) {
        prior_.validate();
    }

    const ModelParams &params() const noexcept { return params_; }
    const ModelParams &prior_params() const noexcept { return prior_; }
    const FitOptions &options() const noexcept { return options_; }
    bool fixed_variance() const noexcept { return fixed_variance_; }

    void set_params(const ModelParams &params) {
        params.validate();
        params_ = params;
    }

    void reset() { params_ = prior_; }

    void fit(const TimeSeriesWindow &window, bool /*warm_start*/) {
        if (window.size() < options_.min_fit_points) {
            throw TooFewPoints(window.size(), options_.min_fit_points);
        }
        const Eigen::MatrixXd &y = window.outputs();
        ModelParams next = params_.with_channels(window.channel_count());
        next.mean = y.colwise().mean().transpose();
        if (!fixed_variance_) {
            const double mse = (y.rowwise() - next.mean.transpose()).squaredNorm() / static_cast<double>(y.size());
            next.noise_std = std::clamp(std::sqrt(mse), options_.min_noise_std, options_.max_noise_std);
        }
        params_ = std::move(next);
    }

    double log_likelihood(const TimeSeriesWindow &window) const {
        check_channels(window);
        const double sigma = params_.noise_std;
        const double sq = (window.outputs().rowwise() - params_.mean.transpose()).squaredNorm() / (sigma * sigma);
        const auto count = static_cast<double>(window.outputs().size());
        return -0.5 * sq - count * (std::log(sigma) + 0.5 * kLogTwoPi);
    }

    /// Closed form of the distance to the (diagonal) predictive distribution.
    double mahalanobis(const TimeSeriesWindow &window) const {
        check_channels(window);
        return std::sqrt((window.outputs().rowwise() - params_.mean.transpose()).squaredNorm()) / params_.noise_std;
    }

    PosteriorSummary posterior(const Eigen::MatrixXd &query) const {
        const auto q = query.rows();
        PosteriorSummary out;
        out.mean = params_.mean.transpose().replicate(q, 1);
        out.covariance = params_.noise_std * params_.noise_std * Eigen::MatrixXd::Identity(q, q);
        return out;
    }

    /// Observations are independent, so conditioning on `train` changes nothing.
    PosteriorSummary posterior(const TimeSeriesWindow & /*train*/, const Eigen::MatrixXd &query) const {
        return posterior(query);
    }

private:
    void check_channels(const TimeSeriesWindow &window) const {
        if (window.channel_count() != params_.channel_count()) {
            throw InvalidArgument("model has " + std::to_string(params_.channel_count()) + " channels, window has " +
                                  std::to_string(window.channel_count()));
        }
    }

    ModelParams prior_;
    ModelParams params_;
    FitOptions options_;
    bool fixed_variance_ = false;
};

} // namespace gocpd
