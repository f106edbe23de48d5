#pragma once

#include "gocpd/detector.hpp"
#include "gocpd/gp_model.hpp"
#include "gocpd/iid_model.hpp"

#include <cstddef>
#include <utility>

namespace gocpd {

/// Builds the prototype model described by `spec` for `channels` outputs and
/// hands it to `fn`, so callers can stay generic over the model type.
template <class Fn>
decltype(auto) with_model(const ModelSpec &spec, std::size_t channels, Fn &&fn) {
    const ModelParams prior = spec.prior.with_channels(channels);
    if (spec.family == ModelFamily::IidGaussian) {
        return std::forward<Fn>(fn)(IidGaussianModel(prior, spec.fit, spec.fixed_variance));
    }
    return std::forward<Fn>(fn)(GaussianProcessModel(prior, spec.fit));
}

} // namespace gocpd
