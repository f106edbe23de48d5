#pragma once

#include "gocpd/detector.hpp"
#include "gocpd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <span>
#include <tuple>
#include <vector>

namespace gocpd {

struct MatchedPair {
    std::int64_t truth = 0;
    std::int64_t detected = 0;
    std::int64_t delay = 0;

    friend bool operator==(const MatchedPair &, const MatchedPair &) = default;
};

struct MatchReport {
    std::size_t true_positives = 0;
    std::size_t false_positives = 0;
    std::size_t false_negatives = 0;
    std::vector<MatchedPair> pairs;
    std::int64_t tolerance = 0;
};

/// Greedy nearest matching within +-tolerance. Closest (truth, detection)
/// pairs are committed first; equal distances prefer the earlier true change,
/// then the earlier detection. Each side is used at most once.
inline MatchReport match_detections(std::span<const std::int64_t> truth, std::span<const std::int64_t> detected,
                                    std::int64_t tolerance) {
    struct Candidate {
        std::int64_t distance;
        std::size_t truth;
        std::size_t detected;
    };
    std::vector<Candidate> candidates;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        for (std::size_t j = 0; j < detected.size(); ++j) {
            const std::int64_t d = std::llabs(detected[j] - truth[i]);
            if (d <= tolerance) {
                candidates.push_back({d, i, j});
            }
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate &a, const Candidate &b) {
        return std::tie(a.distance, a.truth, a.detected) < std::tie(b.distance, b.truth, b.detected);
    });

    std::vector<bool> truth_used(truth.size(), false);
    std::vector<bool> detected_used(detected.size(), false);
    MatchReport out;
    out.tolerance = tolerance;
    for (const Candidate &c : candidates) {
        if (truth_used[c.truth] || detected_used[c.detected]) {
            continue;
        }
        truth_used[c.truth] = true;
        detected_used[c.detected] = true;
        out.pairs.push_back({truth[c.truth], detected[c.detected], detected[c.detected] - truth[c.truth]});
    }
    std::sort(out.pairs.begin(), out.pairs.end(),
              [](const MatchedPair &a, const MatchedPair &b) { return a.truth < b.truth; });
    out.true_positives = out.pairs.size();
    out.false_negatives = truth.size() - out.true_positives;
    out.false_positives = detected.size() - out.true_positives;
    return out;
}

struct Rates {
    double tpr = 1.0;
    double ppv = 1.0;
    double fdr = 0.0;
    /// Set when a denominator was zero and the vacuous value 1.0 was used.
    bool tpr_vacuous = false;
    bool ppv_vacuous = false;
};

/// TPR = TP/(TP+FN), PPV = TP/(TP+FP), FDR = 1 - PPV. Empty denominators give 1.0.
inline Rates rates(const MatchReport &report) {
    Rates out;
    const std::size_t truths = report.true_positives + report.false_negatives;
    const std::size_t detections = report.true_positives + report.false_positives;
    if (truths == 0) {
        out.tpr_vacuous = true;
    } else {
        out.tpr = static_cast<double>(report.true_positives) / static_cast<double>(truths);
    }
    if (detections == 0) {
        out.ppv_vacuous = true;
    } else {
        out.ppv = static_cast<double>(report.true_positives) / static_cast<double>(detections);
    }
    out.fdr = 1.0 - out.ppv;
    return out;
}

/// Series starts are never scorable changes.
inline std::vector<std::int64_t> scorable_truth(std::span<const std::int64_t> truth, std::int64_t series_start = 0) {
    std::vector<std::int64_t> out;
    for (const auto c : truth) {
        if (c > series_start) {
            out.push_back(c);
        }
    }
    return out;
}

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

inline MeanStd mean_std(std::span<const double> values) {
    MeanStd out;
    if (values.empty()) {
        return out;
    }
    double sum = 0.0;
    for (const double v : values) {
        sum += v;
    }
    out.mean = sum / static_cast<double>(values.size());
    double sq = 0.0;
    for (const double v : values) {
        sq += (v - out.mean) * (v - out.mean);
    }
    out.std = std::sqrt(sq / static_cast<double>(values.size()));
    return out;
}

struct InstrumentationSummary {
    std::size_t iterations = 0; // searched iterations
    std::size_t points = 0;     // all processed samples
    MeanStd interval_size;
    MeanStd effective_size;
    MeanStd evaluations;
    double total_seconds = 0.0;
    double seconds_per_point = 0.0;
};

/// Mean and population std of interval size (t - last change), effective
/// interval size and score evaluations over the iterations that searched,
/// plus wall time per processed sample.
inline InstrumentationSummary aggregate_instrumentation(std::span<const IterationRecord> log,
                                                        std::size_t points = 0) {
    std::vector<double> interval;
    std::vector<double> effective;
    std::vector<double> evals;
    InstrumentationSummary out;
    for (const IterationRecord &r : log) {
        out.total_seconds += r.seconds;
        if (!r.searched) {
            continue;
        }
        interval.push_back(static_cast<double>(r.interval_size));
        effective.push_back(static_cast<double>(r.effective_size));
        evals.push_back(static_cast<double>(r.evaluations));
    }
    if (interval.empty()) {
        throw EmptyLog("instrumentation log has no searched iterations");
    }
    out.iterations = interval.size();
    out.points = points == 0 ? log.size() : points;
    out.interval_size = mean_std(interval);
    out.effective_size = mean_std(effective);
    out.evaluations = mean_std(evals);
    out.seconds_per_point = out.total_seconds / static_cast<double>(out.points);
    return out;
}

/// 3 * (ceil(log_{3/2} n) + 1): worst-case distinct evaluations of one ternary search over n positions.
inline double evaluation_bound(double n) {
    if (n <= 1.0) {
        return 3.0;
    }
    return 3.0 * (std::ceil(std::log(n) / std::log(1.5)) + 1.0);
}

} // namespace gocpd
