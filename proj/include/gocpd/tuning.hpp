#pragma once

#include "gocpd/detector.hpp"
#include "gocpd/errors.hpp"
#include "gocpd/eval.hpp"
#include "gocpd/window.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <tuple>
#include <vector>

namespace gocpd {

/// Threshold grid searched on the leading train_fraction of a labelled stream.
struct TuningGrid {
    std::vector<double> nu1{1.005, 1.01, 1.02, 1.05, 1.1};
    std::vector<double> nu2{1.005, 1.01, 1.02, 1.05, 1.1};
    std::vector<std::size_t> k_max{5, 10, 20};
    double train_fraction = 0.3;
    std::int64_t tolerance = 25;

    void validate() const {
        if (nu1.empty() || nu2.empty() || k_max.empty()) {
            throw InvalidArgument("tuning grid must not be empty");
        }
        for (const double v : nu1) {
            if (!(v > 0.0)) {
                throw InvalidArgument("tuning nu1 values must be positive");
            }
        }
        for (const double v : nu2) {
            if (!(v > 0.0)) {
                throw InvalidArgument("tuning nu2 values must be positive");
            }
        }
        for (const std::size_t k : k_max) {
            if (k == 0) {
                throw InvalidArgument("tuning k_max values must be positive");
            }
        }
        if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
            throw InvalidArgument("train_fraction must lie in (0, 1]");
        }
        if (tolerance < 0) {
            throw InvalidArgument("tolerance must be non-negative");
        }
    }
};

struct TuningTrial {
    double nu1 = 0.0;
    double nu2 = 0.0;
    std::size_t k_max = 0;
    MatchReport report;
    Rates rates;
    double objective = 0.0;
};

struct TuningResult {
    DetectorConfig best;
    std::size_t best_trial = 0;
    std::size_t train_size = 0;
    std::vector<std::int64_t> train_truth;
    std::vector<TuningTrial> trials;
};

/// 2TP / (2TP + FP + FN); 1 when there is nothing to find and nothing was found.
inline double f1_score(const MatchReport &r) {
    const auto denom = static_cast<double>(2 * r.true_positives + r.false_positives + r.false_negatives);
    return denom == 0.0 ? 1.0 : 2.0 * static_cast<double>(r.true_positives) / denom;
}

inline std::size_t train_length(std::size_t n, double fraction) {
    const auto len = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
    return std::clamp<std::size_t>(len, 1, n);
}

/// Runs every grid point on the train split and keeps the best F1. Ties go
/// to the most conservative setting: larger nu1 + nu2, then larger k_max.
/// `truth` holds stream indices.
template <ObservationModel Model>
TuningResult tune_thresholds(const TimeSeriesWindow &stream, std::span<const std::int64_t> truth,
                             const DetectorConfig &base, const Model &prototype, const TuningGrid &grid) {
    grid.validate();
    TuningResult out;
    out.train_size = train_length(stream.size(), grid.train_fraction);
    const TimeSeriesWindow train = stream.slice(0, out.train_size - 1);
    for (const auto c : truth) {
        if (c > 0 && c < static_cast<std::int64_t>(out.train_size)) {
            out.train_truth.push_back(c);
        }
    }

    auto better = [](const TuningTrial &a, const TuningTrial &b) {
        return std::tuple(a.objective, a.nu1 + a.nu2, a.k_max) > std::tuple(b.objective, b.nu1 + b.nu2, b.k_max);
    };
    for (const double nu1 : grid.nu1) {
        for (const double nu2 : grid.nu2) {
            for (const std::size_t k : grid.k_max) {
                DetectorConfig config = base;
                config.nu1 = nu1;
                config.nu2 = nu2;
                config.k_max = k;
                const StreamResult run = run_stream(train, config, prototype);
                std::vector<std::int64_t> detected;
                for (const DetectionEvent &e : run.events) {
                    detected.push_back(e.change_point);
                }
                TuningTrial trial{nu1, nu2, k, match_detections(out.train_truth, detected, grid.tolerance), {}, 0.0};
                trial.rates = rates(trial.report);
                trial.objective = f1_score(trial.report);
                out.trials.push_back(std::move(trial));
                if (out.trials.size() == 1 || better(out.trials.back(), out.trials[out.best_trial])) {
                    out.best_trial = out.trials.size() - 1;
                }
            }
        }
    }
    const TuningTrial &best = out.trials[out.best_trial];
    out.best = base;
    out.best.nu1 = best.nu1;
    out.best.nu2 = best.nu2;
    out.best.k_max = best.k_max;
    return out;
}

} // namespace gocpd
