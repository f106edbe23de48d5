#pragma once

#include "gocpd/linalg.hpp"
#include "gocpd/model.hpp"
#include "gocpd/toeplitz.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace gocpd {

namespace detail {

inline Eigen::MatrixXd squared_distances(const Eigen::MatrixXd &a, const Eigen::MatrixXd &b) {
    Eigen::MatrixXd out(a.rows(), b.rows());
    if (a.cols() == 1) {
        for (Eigen::Index j = 0; j < b.rows(); ++j) {
            out.col(j) = (a.col(0).array() - b(j, 0)).square().matrix();
        }
        return out;
    }
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
        out.col(j) = (a.rowwise() - b.row(j)).rowwise().squaredNorm();
    }
    return out;
}

/// Grid step h when the inputs are one-dimensional and x_i = x_0 + i*h, so
/// that every stationary Gram matrix over them is Toeplitz.
inline std::optional<double> uniform_spacing(const Eigen::MatrixXd &inputs) {
    if (inputs.cols() != 1) {
        return std::nullopt;
    }
    const Eigen::Index n = inputs.rows();
    if (n < 2) {
        return 1.0;
    }
    const double x0 = inputs(0, 0);
    const double h = (inputs(n - 1, 0) - x0) / static_cast<double>(n - 1);
    if (!(h > 0.0)) {
        return std::nullopt;
    }
    const double tol = 1e-9 * std::max({1.0, std::abs(x0), std::abs(inputs(n - 1, 0))});
    for (Eigen::Index i = 1; i < n; ++i) {
        if (std::abs(inputs(i, 0) - (x0 + static_cast<double>(i) * h)) > tol) {
            return std::nullopt;
        }
    }
    return h;
}

/// Row offset at which `query` appears as a contiguous block of `train`.
inline std::optional<Eigen::Index> block_offset(const Eigen::MatrixXd &train, const Eigen::MatrixXd &query) {
    const Eigen::Index m = query.rows();
    if (m == 0 || m > train.rows() || query.cols() != train.cols()) {
        return std::nullopt;
    }
    for (Eigen::Index off = 0; off + m <= train.rows(); ++off) {
        if (train.row(off) == query.row(0) && train.middleRows(off, m) == query) {
            return off;
        }
    }
    return std::nullopt;
}

} // namespace detail

/// Gaussian-process regression with a constant mean per channel.
///
/// All channels share one kernel (RBF or Dirac delta) and one noise level and
/// are otherwise independent, so the joint covariance over the flattened
/// outputs is block diagonal. Hyperparameters are fitted by projected
/// quasi-Newton gradient ascent with backtracking on the averaged log marginal
/// likelihood in log-parameter space; the channel means are profiled out in
/// closed form (generalized least squares) at every step. A warm-started fit
/// can also be repeated from the prior, keeping the better of the two.
///
/// On evenly spaced one-dimensional inputs the Gram matrix is Toeplitz and is
/// inverted in O(n^2); other inputs use a dense Cholesky factorization.
class GaussianProcessModel {
public:
    GaussianProcessModel() : GaussianProcessModel(ModelParams{}) {}

    explicit GaussianProcessModel(ModelParams prior, FitOptions options = {})
        : prior_(std::move(prior)), params_(prior_), options_(options) {
        prior_.validate();
    }

    const ModelParams &params() const noexcept { return params_; }
    const ModelParams &prior_params() const noexcept { return prior_; }
    const FitOptions &options() const noexcept { return options_; }
    std::size_t last_fit_iterations() const noexcept { return last_iterations_; }
    const std::optional<TimeSeriesWindow> &training_window() const noexcept { return train_; }

    void set_params(const ModelParams &params) {
        params.validate();
        params_ = params;
        conditioning_.reset();
    }

    void reset() {
        params_ = prior_;
        train_.reset();
        conditioning_.reset();
        inverse_hessian_.setIdentity();
    }

    /// Kernel covariance between the rows of `a` and `b`, noise excluded.
    Eigen::MatrixXd kernel(const Eigen::MatrixXd &a, const Eigen::MatrixXd &b) const {
        return kernel_from_distances(detail::squared_distances(a, b), params_);
    }

    void fit(const TimeSeriesWindow &window, bool warm_start) {
        if (window.size() < options_.min_fit_points) {
            throw TooFewPoints(window.size(), options_.min_fit_points);
        }
        const ModelParams start = (warm_start ? params_ : prior_).with_channels(window.channel_count());
        const Geometry geo{detail::squared_distances(window.inputs(), window.inputs()),
                           detail::uniform_spacing(window.inputs())};
        const Eigen::MatrixXd &y = window.outputs();

        if (!warm_start) {
            inverse_hessian_.setIdentity();
        }
        Ascent best = ascend(start, geo, y, inverse_hessian_);
        if (warm_start && options_.restart_from_prior) {
            Eigen::Matrix3d fresh = Eigen::Matrix3d::Identity();
            Ascent cold = ascend(prior_.with_channels(window.channel_count()), geo, y, fresh);
            if (cold.last.value > best.last.value) {
                best = std::move(cold);
                inverse_hessian_ = fresh;
            }
        }

        params_ = from_theta(best.theta, start);
        params_.mean = best.last.mean;
        last_iterations_ = best.iterations;
        train_ = window;
        Eigen::MatrixXd alpha = best.last.factor.solve(centered(y, params_.mean));
        conditioning_ = Conditioning{std::move(best.last.factor), std::move(alpha)};
    }

    /// Exact Gaussian log marginal likelihood of window.outputs() under the current parameters.
    double log_likelihood(const TimeSeriesWindow &window) const {
        check_channels(window);
        const GramFactor factor = factorize(window.inputs(), params_);
        const Eigen::MatrixXd r = centered(window.outputs(), params_.mean);
        const auto n = static_cast<double>(window.size());
        const auto c = static_cast<double>(window.channel_count());
        return -0.5 * factor.quadratic(r) - 0.5 * c * factor.log_determinant() - 0.5 * n * c * kLogTwoPi;
    }

    /// Predictive distribution of observations at `query`, conditioned on the
    /// last fitted window; the prior predictive when the model is unfitted.
    PosteriorSummary posterior(const Eigen::MatrixXd &query) const {
        if (!train_) {
            PosteriorSummary out;
            out.mean = params_.mean.transpose().replicate(query.rows(), 1);
            out.covariance = noisy_gram(detail::squared_distances(query, query), params_);
            return out;
        }
        if (!conditioning_) {
            return posterior(*train_, query);
        }
        return predict(*train_, *conditioning_, query);
    }

    PosteriorSummary posterior(const TimeSeriesWindow &train, const Eigen::MatrixXd &query) const {
        check_channels(train);
        GramFactor factor = factorize(train.inputs(), params_);
        Eigen::MatrixXd alpha = factor.solve(centered(train.outputs(), params_.mean));
        return predict(train, Conditioning{std::move(factor), std::move(alpha)}, query);
    }

private:
    using Theta = Eigen::Vector3d; // log lengthscale, log output scale, log noise std

    // Largest change of any log-parameter in one iteration.
    static constexpr double kMaxLogStep = 1.0;

    /// Factorization of K = k(X, X) + sigma_n^2 I, Toeplitz or dense.
    struct GramFactor {
        std::optional<ToeplitzInverse> toeplitz;
        std::optional<JitteredCholesky> chol;

        double log_determinant() const { return toeplitz ? toeplitz->log_determinant : chol->log_determinant(); }

        Eigen::MatrixXd solve(const Eigen::MatrixXd &b) const {
            if (toeplitz) {
                return toeplitz->inverse * b;
            }
            return chol->llt.solve(b);
        }

        /// r' K^-1 r summed over columns.
        double quadratic(const Eigen::MatrixXd &r) const {
            if (toeplitz) {
                return (r.array() * solve(r).array()).sum();
            }
            return chol->llt.matrixL().solve(r).squaredNorm();
        }

        Eigen::MatrixXd inverse() const {
            if (toeplitz) {
                return toeplitz->inverse;
            }
            const auto n = chol->llt.rows();
            return chol->llt.solve(Eigen::MatrixXd::Identity(n, n));
        }

        /// Columns [first, first + count) of K^-1.
        Eigen::MatrixXd inverse_columns(Eigen::Index first, Eigen::Index count) const {
            if (toeplitz) {
                return toeplitz->inverse.middleCols(first, count);
            }
            const auto n = chol->llt.rows();
            return chol->llt.solve(Eigen::MatrixXd::Identity(n, n).middleCols(first, count));
        }
    };

    struct Geometry {
        Eigen::MatrixXd dist;
        std::optional<double> spacing;
    };

    struct Conditioning {
        GramFactor factor;
        Eigen::MatrixXd alpha;
    };

    struct Evaluation {
        double value = 0.0; // averaged log-likelihood
        GramFactor factor;
        Eigen::MatrixXd base;   // kernel part (noise excluded), dense path
        Eigen::VectorXd column; // kernel part at lags 0, h, 2h, ..., Toeplitz path
        double spacing = 1.0;
        Eigen::VectorXd mean;
        Eigen::MatrixXd residual;
        Eigen::Vector3d gradient = Eigen::Vector3d::Zero();
        double noise_variance = 0.0;
        double lengthscale = 1.0;
    };

    struct Ascent {
        Theta theta;
        Evaluation last;
        std::size_t iterations = 0;
    };

    static double kernel_value(double squared_distance, const ModelParams &p) {
        if (p.kernel == KernelKind::DiracDelta) {
            return squared_distance == 0.0 ? 1.0 : 0.0;
        }
        return p.output_scale * p.output_scale * std::exp(-0.5 * squared_distance / (p.lengthscale * p.lengthscale));
    }

    static Eigen::MatrixXd kernel_from_distances(const Eigen::MatrixXd &dist, const ModelParams &p) {
        if (p.kernel == KernelKind::DiracDelta) {
            return (dist.array() == 0.0).cast<double>().matrix();
        }
        const double sf2 = p.output_scale * p.output_scale;
        const double scale = -0.5 / (p.lengthscale * p.lengthscale);
        return (sf2 * (scale * dist.array()).exp()).matrix();
    }

    static Eigen::MatrixXd noisy_gram(const Eigen::MatrixXd &dist, const ModelParams &p) {
        Eigen::MatrixXd k = kernel_from_distances(dist, p);
        k.diagonal().array() += p.noise_std * p.noise_std;
        return k;
    }

    static Eigen::VectorXd kernel_column(Eigen::Index n, double spacing, const ModelParams &p) {
        Eigen::VectorXd col(n);
        for (Eigen::Index k = 0; k < n; ++k) {
            const double d = static_cast<double>(k) * spacing;
            col(k) = kernel_value(d * d, p);
        }
        return col;
    }

    static GramFactor factor_base(const Eigen::MatrixXd &base, const Eigen::VectorXd *column, double noise_variance) {
        GramFactor f;
        if (column != nullptr) {
            Eigen::VectorXd noisy = *column;
            noisy(0) += noise_variance;
            f.toeplitz = toeplitz_inverse(noisy);
        } else {
            Eigen::MatrixXd gram = base;
            gram.diagonal().array() += noise_variance;
            f.chol = jittered_cholesky(gram);
        }
        return f;
    }

    static GramFactor factorize(const Eigen::MatrixXd &inputs, const ModelParams &p) {
        const double noise = p.noise_std * p.noise_std;
        if (const auto h = detail::uniform_spacing(inputs)) {
            const Eigen::VectorXd col = kernel_column(inputs.rows(), *h, p);
            return factor_base(Eigen::MatrixXd{}, &col, noise);
        }
        return factor_base(kernel_from_distances(detail::squared_distances(inputs, inputs), p), nullptr, noise);
    }

    static Eigen::MatrixXd centered(const Eigen::MatrixXd &y, const Eigen::VectorXd &mean) {
        return y.rowwise() - mean.transpose();
    }

    PosteriorSummary predict(const TimeSeriesWindow &train, const Conditioning &cond,
                             const Eigen::MatrixXd &query) const {
        const double noise = params_.noise_std * params_.noise_std;
        PosteriorSummary out;
        // At training inputs: mean = y - s2 alpha, cov = 2 s2 I - s2^2 K^-1.
        if (const auto off = detail::block_offset(train.inputs(), query)) {
            const Eigen::Index m = query.rows();
            out.mean = train.outputs().middleRows(*off, m) - noise * cond.alpha.middleRows(*off, m);
            out.covariance = -(noise * noise) * cond.factor.inverse_columns(*off, m).middleRows(*off, m);
            out.covariance.diagonal().array() += 2.0 * noise;
            return out;
        }
        const Eigen::MatrixXd cross = kernel(train.inputs(), query);
        out.mean = (cross.transpose() * cond.alpha).rowwise() + params_.mean.transpose();
        out.covariance = noisy_gram(detail::squared_distances(query, query), params_);
        out.covariance.noalias() -= cross.transpose() * cond.factor.solve(cross);
        return out;
    }

    void check_channels(const TimeSeriesWindow &window) const {
        if (window.channel_count() != params_.channel_count()) {
            throw InvalidArgument("model has " + std::to_string(params_.channel_count()) + " channels, window has " +
                                  std::to_string(window.channel_count()));
        }
    }

    static Theta to_theta(const ModelParams &p) {
        return Theta(std::log(p.lengthscale), std::log(p.output_scale), std::log(p.noise_std));
    }

    static ModelParams from_theta(const Theta &theta, const ModelParams &base) {
        ModelParams p = base;
        p.lengthscale = std::exp(theta(0));
        p.output_scale = std::exp(theta(1));
        p.noise_std = std::exp(theta(2));
        return p;
    }

    Theta clamp(Theta theta) const {
        theta(0) = std::clamp(theta(0), std::log(options_.min_lengthscale), std::log(options_.max_lengthscale));
        theta(1) = std::clamp(theta(1), std::log(options_.min_output_scale), std::log(options_.max_output_scale));
        theta(2) = std::clamp(theta(2), std::log(options_.min_noise_std), std::log(options_.max_noise_std));
        return theta;
    }

    Evaluation evaluate(const Theta &theta, const ModelParams &base, const Geometry &geo,
                        const Eigen::MatrixXd &y) const {
        const ModelParams p = from_theta(theta, base);
        const auto n = y.rows();
        Evaluation e;
        e.noise_variance = p.noise_std * p.noise_std;
        e.lengthscale = p.lengthscale;
        if (geo.spacing) {
            e.spacing = *geo.spacing;
            e.column = kernel_column(n, e.spacing, p);
            e.factor = factor_base(Eigen::MatrixXd{}, &e.column, e.noise_variance);
        } else {
            e.base = kernel_from_distances(geo.dist, p);
            e.factor = factor_base(e.base, nullptr, e.noise_variance);
        }

        const Eigen::VectorXd u = e.factor.solve(Eigen::VectorXd::Ones(n));
        const double denom = u.sum();
        e.mean = (y.transpose() * u) / denom;
        e.residual = centered(y, e.mean);
        const auto c = static_cast<double>(y.cols());
        const double total = -0.5 * e.factor.quadratic(e.residual) - 0.5 * c * e.factor.log_determinant() -
                             0.5 * static_cast<double>(n) * c * kLogTwoPi;
        e.value = total / (static_cast<double>(n) * c);
        return e;
    }

    void compute_gradient(Evaluation &e, const Eigen::MatrixXd &dist, const Eigen::MatrixXd &y) const {
        const auto n = y.rows();
        const auto c = static_cast<double>(y.cols());
        const double scale = 0.5 / (static_cast<double>(n) * c);
        const bool rbf = params_.kernel == KernelKind::Rbf;
        const double inv_l2 = 1.0 / (e.lengthscale * e.lengthscale);
        e.gradient.setZero();
        // W = sum_c alpha_c alpha_c' - C K^-1; d logp / d theta = tr(W dK/dtheta) / 2
        if (e.factor.toeplitz) {
            // dK/dtheta is Toeplitz too, so only the sums of W along each diagonal matter.
            const Eigen::MatrixXd &inverse = e.factor.toeplitz->inverse;
            const Eigen::MatrixXd alpha = inverse * e.residual;
            Eigen::VectorXd lag_sum = Eigen::VectorXd::Zero(n); // lag k > 0: upper triangle only
            for (Eigen::Index j = 0; j < n; ++j) {
                lag_sum(0) += inverse(j, j);
                lag_sum.segment(1, j) += inverse.col(j).head(j).reverse();
            }
            lag_sum *= -c;
            for (Eigen::Index k = 0; k < n; ++k) {
                lag_sum(k) += (alpha.topRows(n - k).array() * alpha.bottomRows(n - k).array()).sum();
            }
            if (rbf) {
                double g0 = 0.0;
                double g1 = lag_sum(0) * e.column(0);
                for (Eigen::Index k = 1; k < n; ++k) {
                    const double lag = static_cast<double>(k) * e.spacing;
                    g0 += 2.0 * lag_sum(k) * e.column(k) * lag * lag;
                    g1 += 2.0 * lag_sum(k) * e.column(k);
                }
                e.gradient(0) = scale * g0 * inv_l2;
                e.gradient(1) = scale * 2.0 * g1;
            }
            e.gradient(2) = scale * 2.0 * e.noise_variance * lag_sum(0);
            return;
        }
        const Eigen::MatrixXd inverse = e.factor.inverse();
        const Eigen::MatrixXd alpha = inverse * e.residual;
        Eigen::MatrixXd w = alpha * alpha.transpose();
        w -= c * inverse;
        if (rbf) {
            e.gradient(0) = scale * (w.array() * e.base.array() * dist.array()).sum() * inv_l2;
            e.gradient(1) = scale * 2.0 * (w.array() * e.base.array()).sum();
        }
        e.gradient(2) = scale * 2.0 * e.noise_variance * w.trace();
    }

    /// Gradient with the components that push against an active bound removed.
    Theta projected(const Theta &theta, const Theta &gradient) const {
        const Theta lower(std::log(options_.min_lengthscale), std::log(options_.min_output_scale),
                          std::log(options_.min_noise_std));
        const Theta upper(std::log(options_.max_lengthscale), std::log(options_.max_output_scale),
                          std::log(options_.max_noise_std));
        Theta out = gradient;
        for (int i = 0; i < 3; ++i) {
            if ((theta(i) <= lower(i) && out(i) < 0.0) || (theta(i) >= upper(i) && out(i) > 0.0)) {
                out(i) = 0.0;
            }
        }
        return out;
    }

    // Quasi-Newton (BFGS) ascent from `start`; `inverse_hessian` is updated in place.
    Ascent ascend(const ModelParams &start, const Geometry &geo, const Eigen::MatrixXd &y,
                  Eigen::Matrix3d &inverse_hessian) const {
        Ascent out;
        out.theta = clamp(to_theta(start));
        out.last = evaluate(out.theta, start, geo, y);
        compute_gradient(out.last, geo.dist, y);
        while (out.iterations < options_.max_iterations) {
            const Theta gradient = projected(out.theta, out.last.gradient);
            if (gradient.norm() < options_.gradient_tolerance) {
                break;
            }
            Theta direction = projected(out.theta, inverse_hessian * gradient);
            if (direction.dot(gradient) <= 0.0) {
                inverse_hessian.setIdentity();
                direction = gradient;
            }
            const double longest = direction.cwiseAbs().maxCoeff();
            if (longest > kMaxLogStep) {
                direction *= kMaxLogStep / longest;
            }
            bool accepted = false;
            double step = 1.0;
            for (int trial = 0; trial < 40; ++trial, step *= 0.5) {
                const Theta candidate = clamp(out.theta + step * direction);
                const Theta delta = candidate - out.theta;
                if (delta.squaredNorm() == 0.0) {
                    break;
                }
                std::optional<Evaluation> next;
                try {
                    next = evaluate(candidate, start, geo, y);
                } catch (const NonPositiveDefinite &) {
                    continue;
                }
                if (next->value < out.last.value + 1e-4 * gradient.dot(delta)) {
                    continue;
                }
                compute_gradient(*next, geo.dist, y);
                update_inverse_hessian(inverse_hessian, delta, out.last.gradient - next->gradient);
                out.theta = candidate;
                out.last = std::move(*next);
                accepted = true;
                break;
            }
            if (!accepted) {
                inverse_hessian.setIdentity();
                break;
            }
            ++out.iterations;
        }
        return out;
    }

    // BFGS update of the inverse curvature of -value from step s and gradient decrease y.
    static void update_inverse_hessian(Eigen::Matrix3d &inverse_hessian, const Theta &s, const Theta &y) {
        const double sy = s.dot(y);
        if (!(sy > 1e-12)) {
            return;
        }
        const double rho = 1.0 / sy;
        const Eigen::Matrix3d left = Eigen::Matrix3d::Identity() - rho * s * y.transpose();
        inverse_hessian = left * inverse_hessian * left.transpose() + rho * s * s.transpose();
    }

    ModelParams prior_;
    ModelParams params_;
    FitOptions options_;
    std::optional<TimeSeriesWindow> train_;
    std::optional<Conditioning> conditioning_;
    std::size_t last_iterations_ = 0;
    Eigen::Matrix3d inverse_hessian_ = Eigen::Matrix3d::Identity();
};

} // namespace gocpd
