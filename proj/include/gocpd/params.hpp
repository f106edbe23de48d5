#pragma once

#include "gocpd/errors.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <string_view>

namespace gocpd {

enum class KernelKind { Rbf, DiracDelta };

inline std::string_view to_string(KernelKind kind) {
    return kind == KernelKind::Rbf ? "rbf" : "dirac_delta";
}

inline KernelKind kernel_from_string(std::string_view name) {
    if (name == "rbf") {
        return KernelKind::Rbf;
    }
    if (name == "dirac_delta" || name == "dirac") {
        return KernelKind::DiracDelta;
    }
    throw InvalidArgument("unknown kernel '" + std::string(name) + "'");
}

/// Hyperparameters shared by every observation model.
///
/// The iid Gaussian model only reads `noise_std` and `mean`. The Dirac-delta
/// kernel has unit covariance between identical inputs, so it ignores
/// `lengthscale` and `output_scale`.
struct ModelParams {
    KernelKind kernel = KernelKind::Rbf;
    double lengthscale = 1.0;
    double output_scale = 0.5;
    double noise_std = 0.01;
    Eigen::VectorXd mean = Eigen::VectorXd::Constant(1, 1.0);

    std::size_t channel_count() const noexcept { return static_cast<std::size_t>(mean.size()); }

    void validate() const {
        if (!(lengthscale > 0.0) || !(output_scale > 0.0) || !(noise_std > 0.0)) {
            throw InvalidArgument("lengthscale, output_scale and noise_std must be strictly positive");
        }
        if (mean.size() == 0) {
            throw InvalidArgument("model needs at least one channel");
        }
    }

    /// Copy with the mean resized to `channels`, repeating the first entry.
    ModelParams with_channels(std::size_t channels) const {
        ModelParams out = *this;
        if (out.channel_count() != channels) {
            const double fill = mean.size() > 0 ? mean(0) : 0.0;
            out.mean = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(channels), fill);
        }
        return out;
    }

    friend bool operator==(const ModelParams &a, const ModelParams &b) {
        return a.kernel == b.kernel && a.lengthscale == b.lengthscale && a.output_scale == b.output_scale &&
               a.noise_std == b.noise_std && a.mean.size() == b.mean.size() && a.mean == b.mean;
    }
};

} // namespace gocpd
