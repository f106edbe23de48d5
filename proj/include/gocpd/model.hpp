#pragma once

#include "gocpd/errors.hpp"
#include "gocpd/params.hpp"
#include "gocpd/posterior.hpp"
#include "gocpd/window.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <concepts>
#include <cstddef>

namespace gocpd {

/// Limits on maximum-likelihood fitting.
struct FitOptions {
    std::size_t min_fit_points = 3;
    std::size_t max_iterations = 50;
    /// Stop once the gradient of the averaged log-likelihood (in log-parameter space) is below this norm.
    double gradient_tolerance = 1e-5;
    double min_noise_std = 1e-3;
    double max_noise_std = 1e3;
    double min_lengthscale = 1e-2;
    double max_lengthscale = 1e4;
    double min_output_scale = 1e-3;
    double max_output_scale = 1e3;
    /// Warm-started kernel fits also run from the prior and keep the better optimum.
    bool restart_from_prior = false;
};

enum class ModelRole { M0, M1, M2 };

/// Interface shared by all observation models so that search and detection
/// stay model-agnostic. `fit` mutates in place; every other member is const.
template <class M>
concept ObservationModel = std::copyable<M> &&
    requires(M model, const M &cmodel, const TimeSeriesWindow &window, const Eigen::MatrixXd &query,
             const ModelParams &params) {
        model.fit(window, true);
        model.set_params(params);
        model.reset();
        { cmodel.params() } -> std::convertible_to<const ModelParams &>;
        { cmodel.prior_params() } -> std::convertible_to<const ModelParams &>;
        { cmodel.options() } -> std::convertible_to<const FitOptions &>;
        { cmodel.log_likelihood(window) } -> std::convertible_to<double>;
        { cmodel.posterior(query) } -> std::same_as<PosteriorSummary>;
        { cmodel.posterior(window, query) } -> std::same_as<PosteriorSummary>;
    };

template <ObservationModel Model>
Model fit_mle(Model model, const TimeSeriesWindow &window, bool warm_start) {
    model.fit(window, warm_start);
    return model;
}

template <ObservationModel Model>
double log_likelihood(const Model &model, const TimeSeriesWindow &window) {
    return model.log_likelihood(window);
}

/// log p(D) / |D|, so segments of different length are comparable.
template <ObservationModel Model>
double avg_log_likelihood(const Model &model, const TimeSeriesWindow &window) {
    if (window.empty()) {
        throw TooFewPoints(0, 1);
    }
    return model.log_likelihood(window) / static_cast<double>(window.size());
}

template <ObservationModel Model>
PosteriorSummary posterior(const Model &model, const TimeSeriesWindow &train, const Eigen::MatrixXd &query) {
    return model.posterior(train, query);
}

/// sqrt(r' S^-1 r) for a residual block `residual` (rows = points, cols =
/// channels) whose channels share the covariance `covariance`.
inline double mahalanobis_distance(const Eigen::MatrixXd &residual, const Eigen::MatrixXd &covariance);

/// Distance between the observations of `window` and the model's predictive
/// distribution on window.inputs().
template <ObservationModel Model>
double mahalanobis(const Model &model, const TimeSeriesWindow &window) {
    if constexpr (requires { { model.mahalanobis(window) } -> std::convertible_to<double>; }) {
        return model.mahalanobis(window);
    } else {
        const PosteriorSummary post = model.posterior(window.inputs());
        if (post.channel_count() != window.channel_count()) {
            throw InvalidArgument("model and window disagree on the channel count");
        }
        return mahalanobis_distance(window.outputs() - post.mean, post.covariance);
    }
}

/// d^(2/n): removes the growth of the Mahalanobis distance with the window length n.
inline double modified_power(double distance, std::size_t length) {
    if (length == 0) {
        throw TooFewPoints(0, 1);
    }
    if (distance == 0.0) {
        return 0.0;
    }
    return std::pow(distance, 2.0 / static_cast<double>(length));
}

template <ObservationModel Model>
double modified_mahalanobis(const Model &model, const TimeSeriesWindow &window) {
    return modified_power(mahalanobis(model, window), window.size());
}

} // namespace gocpd

#include "gocpd/linalg.hpp"

namespace gocpd {

inline double mahalanobis_distance(const Eigen::MatrixXd &residual, const Eigen::MatrixXd &covariance) {
    const JitteredCholesky chol = jittered_cholesky(covariance);
    // ||L^-1 r||^2 summed over channels
    const Eigen::MatrixXd whitened = chol.llt.matrixL().solve(residual);
    return std::sqrt(whitened.squaredNorm());
}

} // namespace gocpd
