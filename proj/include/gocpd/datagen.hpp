#pragma once

#include "gocpd/errors.hpp"
#include "gocpd/gp_model.hpp"
#include "gocpd/linalg.hpp"
#include "gocpd/params.hpp"
#include "gocpd/window.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace gocpd {

/// Hyperparameter that a regime script varies from segment to segment.
enum class RegimeTarget { Lengthscale, OutputScale, Mean, NoiseStd };

inline std::string_view to_string(RegimeTarget target) {
    switch (target) {
    case RegimeTarget::Lengthscale:
        return "lengthscale";
    case RegimeTarget::OutputScale:
        return "output_scale";
    case RegimeTarget::Mean:
        return "mean";
    case RegimeTarget::NoiseStd:
        return "noise_std";
    }
    return "mean";
}

inline RegimeTarget target_from_string(std::string_view name) {
    if (name == "lengthscale") {
        return RegimeTarget::Lengthscale;
    }
    if (name == "output_scale") {
        return RegimeTarget::OutputScale;
    }
    if (name == "mean") {
        return RegimeTarget::Mean;
    }
    if (name == "noise_std") {
        return RegimeTarget::NoiseStd;
    }
    throw InvalidArgument("unknown regime target '" + std::string(name) + "'");
}

/// Piecewise-stationary GP series description.
///
/// Segment i covers [locations[i], locations[i+1]) (the last one runs to
/// length-1) and uses base_params with the target hyperparameter multiplied
/// by factors[i]. For the mean the factor is the segment mean itself.
struct RegimeScript {
    std::string name;
    std::vector<std::int64_t> locations{0};
    ModelParams base_params{KernelKind::Rbf, 1.0, 0.5, 0.01, Eigen::VectorXd::Constant(1, 1.0)};
    RegimeTarget target = RegimeTarget::Mean;
    std::vector<double> factors{1.0};
    std::int64_t length = 1000;
    std::uint64_t seed = 0;
    std::int64_t min_gap = 50;

    std::size_t segment_count() const noexcept { return locations.size(); }

    void validate() const {
        if (locations.empty() || locations.front() != 0) {
            throw InvalidArgument("regime locations must start at 0");
        }
        for (std::size_t i = 1; i < locations.size(); ++i) {
            if (locations[i] <= locations[i - 1]) {
                throw InvalidArgument("regime locations must be strictly increasing");
            }
            if (locations[i] - locations[i - 1] < min_gap) {
                throw InvalidArgument("regime locations " + std::to_string(locations[i - 1]) + " and " +
                                      std::to_string(locations[i]) + " are closer than the minimum gap " +
                                      std::to_string(min_gap));
            }
        }
        if (length <= locations.back()) {
            throw InvalidArgument("series length must exceed the last regime location");
        }
        if (length - locations.back() < 1) {
            throw InvalidArgument("last segment is empty");
        }
        if (factors.size() != locations.size()) {
            throw InvalidArgument("need one factor per segment (" + std::to_string(locations.size()) + "), got " +
                                  std::to_string(factors.size()));
        }
        base_params.validate();
    }

    ModelParams segment_params(std::size_t segment) const {
        ModelParams p = base_params;
        const double f = factors.at(segment);
        switch (target) {
        case RegimeTarget::Lengthscale:
            p.lengthscale *= f;
            break;
        case RegimeTarget::OutputScale:
            p.output_scale *= f;
            break;
        case RegimeTarget::Mean:
            p.mean = Eigen::VectorXd::Constant(base_params.mean.size(), f);
            break;
        case RegimeTarget::NoiseStd:
            p.noise_std *= f;
            break;
        }
        return p;
    }
};

struct GeneratedSeries {
    TimeSeriesWindow series;
    /// Change locations after the initial 0.
    std::vector<std::int64_t> change_points;
};

/// Draws one GP sample per segment, each on its own local unit grid and
/// independent of the others, and concatenates them. The result is on the
/// global grid x_t = t.
inline GeneratedSeries sample_piecewise_gp(const RegimeScript &script) {
    script.validate();
    std::mt19937_64 rng(script.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto channels = static_cast<Eigen::Index>(script.base_params.channel_count());
    Eigen::MatrixXd y(script.length, channels);

    for (std::size_t s = 0; s < script.segment_count(); ++s) {
        const std::int64_t begin = script.locations[s];
        const std::int64_t end = s + 1 < script.segment_count() ? script.locations[s + 1] : script.length;
        const auto n = static_cast<Eigen::Index>(end - begin);
        const ModelParams p = script.segment_params(s);

        Eigen::MatrixXd grid(n, 1);
        for (Eigen::Index i = 0; i < n; ++i) {
            grid(i, 0) = static_cast<double>(i);
        }
        GaussianProcessModel gp(p);
        Eigen::MatrixXd cov = gp.kernel(grid, grid);
        cov.diagonal().array() += p.noise_std * p.noise_std;
        const JitteredCholesky chol = jittered_cholesky(cov);

        for (Eigen::Index c = 0; c < channels; ++c) {
            Eigen::VectorXd z(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                z(i) = normal(rng);
            }
            y.block(begin, c, n, 1) = (chol.llt.matrixL() * z).array() + p.mean(c);
        }
    }

    GeneratedSeries out{TimeSeriesWindow::from_outputs(std::move(y)), {}};
    out.change_points.assign(script.locations.begin() + 1, script.locations.end());
    return out;
}

/// Mean step of the unimodality example: 101 points, y ~ N(0, 0.1^2) on
/// [0, 49] and N(1, 0.1^2) on [50, 100].
inline TimeSeriesWindow step_example(std::uint64_t seed = 0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.1);
    std::vector<double> values(101);
    for (std::size_t t = 0; t < values.size(); ++t) {
        values[t] = (t < 50 ? 0.0 : 1.0) + noise(rng);
    }
    return TimeSeriesWindow::from_values(values);
}

struct ChannelTransform {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;

    Eigen::MatrixXd invert(const Eigen::MatrixXd &standardized) const {
        return (standardized.array().rowwise() * std.transpose().array()).rowwise() + mean.transpose().array();
    }
};

struct StandardizedWindow {
    TimeSeriesWindow window;
    ChannelTransform transform;
};

/// Zero mean and unit (population) standard deviation per output channel.
inline StandardizedWindow standardize(const TimeSeriesWindow &window) {
    const Eigen::MatrixXd &y = window.outputs();
    ChannelTransform tr;
    tr.mean = y.colwise().mean().transpose();
    const Eigen::MatrixXd centered = y.rowwise() - tr.mean.transpose();
    tr.std = (centered.colwise().squaredNorm() / static_cast<double>(y.rows())).cwiseSqrt().transpose();
    for (Eigen::Index c = 0; c < tr.std.size(); ++c) {
        if (!(tr.std(c) > 0.0)) {
            throw ZeroVariance(static_cast<std::size_t>(c));
        }
    }
    Eigen::MatrixXd out = centered.array().rowwise() / tr.std.transpose().array();
    return {TimeSeriesWindow(window.timestamps(), window.inputs(), std::move(out)), std::move(tr)};
}

/// Keeps rows 0, rate, 2*rate, ... with their original timestamps and inputs.
inline TimeSeriesWindow downsample(const TimeSeriesWindow &window, std::size_t rate) {
    if (rate == 0) {
        throw InvalidArgument("downsampling rate must be positive");
    }
    if (rate == 1) {
        return window;
    }
    const std::size_t n = (window.size() + rate - 1) / rate;
    std::vector<std::int64_t> ts(n);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), window.inputs().cols());
    Eigen::MatrixXd y(static_cast<Eigen::Index>(n), window.outputs().cols());
    for (std::size_t i = 0; i < n; ++i) {
        const auto src = static_cast<Eigen::Index>(i * rate);
        ts[i] = window.timestamp(i * rate);
        x.row(static_cast<Eigen::Index>(i)) = window.inputs().row(src);
        y.row(static_cast<Eigen::Index>(i)) = window.outputs().row(src);
    }
    return TimeSeriesWindow(std::move(ts), std::move(x), std::move(y));
}

/// The four synthetic scripts of the benchmark: 1000 points, changes at
/// 60, 150, 240, 450, 650, 800, 890, base lengthscale 1, output scale 0.5,
/// mean 1, noise std 0.01.
inline RegimeScript benchmark_script(RegimeTarget target, std::uint64_t seed) {
    RegimeScript s;
    s.locations = {0, 60, 150, 240, 450, 650, 800, 890};
    s.target = target;
    s.seed = seed;
    s.length = 1000;
    switch (target) {
    case RegimeTarget::Lengthscale:
        s.name = "change_in_lengthscale";
        s.factors = {10, 2, 10, 1, 5, 1.0 / 5, 1, 20};
        break;
    case RegimeTarget::OutputScale:
        s.name = "change_in_output_scale";
        s.factors = {1.0 / 10, 10, 1.0 / 20, 1, 10, 1.0 / 10, 3, 1.0 / 8};
        break;
    case RegimeTarget::Mean:
        s.name = "change_in_mean";
        s.factors = {0, 2, -1, 3, 0, -1.4, 3.5, 0.2};
        break;
    case RegimeTarget::NoiseStd:
        s.name = "change_in_noise";
        s.factors = {1.0 / 5, 10, 1.0 / 5, 10, 1.0 / 5, 5, 1.0 / 5, 5};
        break;
    }
    return s;
}

} // namespace gocpd
