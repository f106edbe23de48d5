#pragma once

#include "gocpd/errors.hpp"
#include "gocpd/model.hpp"
#include "gocpd/search.hpp"
#include "gocpd/window.hpp"

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gocpd {

enum class ModelFamily { IidGaussian, GaussianProcess };

inline std::string_view to_string(ModelFamily family) {
    return family == ModelFamily::IidGaussian ? "iid_gaussian" : "gaussian_process";
}

inline ModelFamily family_from_string(std::string_view name) {
    if (name == "iid_gaussian" || name == "iid") {
        return ModelFamily::IidGaussian;
    }
    if (name == "gaussian_process" || name == "gp") {
        return ModelFamily::GaussianProcess;
    }
    throw InvalidArgument("unknown model family '" + std::string(name) + "'");
}

/// Which observation model to build for m0, m1 and m2. All three share the
/// prior and fitting limits.
struct ModelSpec {
    ModelFamily family = ModelFamily::IidGaussian;
    ModelParams prior{KernelKind::Rbf, 1.0, 0.5, 1.0, Eigen::VectorXd::Zero(1)};
    FitOptions fit{};
    /// iid family only: keep sigma at prior.noise_std and fit means only.
    bool fixed_variance = false;
};

struct DetectorConfig {
    double nu1 = 2.0;
    double nu2 = 2.0;
    std::size_t k_max = 10;
    /// Samples that must accumulate after the last change before searching.
    std::size_t t_ini = 30;
    /// Samples to skip after each detection.
    std::size_t wait = 80;
    std::int64_t search_tolerance = 2;
    std::size_t batch_size = 1;
    /// When the candidate moves but the criterion holds, keep k instead of resetting it.
    bool freeze_on_move = false;
    ModelSpec model{};

    std::size_t min_fit_points() const noexcept { return model.fit.min_fit_points; }

    void validate() const {
        if (!(nu1 > 0.0) || !(nu2 > 0.0)) {
            throw InvalidArgument("thresholds nu1 and nu2 must be positive");
        }
        if (k_max == 0) {
            throw InvalidArgument("k_max must be positive");
        }
        if (batch_size == 0) {
            throw InvalidArgument("batch_size must be positive");
        }
        if (min_fit_points() == 0) {
            throw InvalidArgument("min_fit_points must be positive");
        }
        if (t_ini < 2 * min_fit_points()) {
            throw InvalidArgument("t_ini must be at least 2 * min_fit_points");
        }
        if (search_tolerance < 1 || search_tolerance > static_cast<std::int64_t>(min_fit_points())) {
            throw InvalidArgument("search_tolerance must lie in [1, min_fit_points]");
        }
        model.prior.validate();
    }
};

struct DetectionEvent {
    /// Stream index of the declared change point and of the sample that triggered the declaration.
    std::int64_t change_point = 0;
    std::int64_t declared_at = 0;
    /// Timestamps of the same two samples.
    std::int64_t change_timestamp = 0;
    std::int64_t declared_timestamp = 0;
    double candidate_score = 0.0;
    double left_distance = 0.0;
    double right_distance = 0.0;

    friend bool operator==(const DetectionEvent &, const DetectionEvent &) = default;
};

struct CriterionResult {
    bool satisfied = false;
    double left_distance = 0.0;
    double right_distance = 0.0;
};

/// One record per processed batch.
struct IterationRecord {
    std::int64_t t = 0;
    bool searched = false;
    std::size_t interval_size = 0;
    std::size_t effective_size = 0;
    std::size_t evaluations = 0;
    std::int64_t candidate = 0;
    double candidate_score = 0.0;
    double left_distance = 0.0;
    double right_distance = 0.0;
    bool criterion = false;
    std::size_t persistence = 0;
    bool detected = false;
    double seconds = 0.0;
    std::string warning;
};

/// Greedy online change point detector.
///
/// Every batch is appended to the data since the last change c. Once at least
/// t_ini samples have accumulated (and the post-detection wait is over), each
/// batch triggers: refit of m0 on D[c:t], ternary search for the split
/// candidate c_t over the effective interval, and the two-segment test
///   dbar_m0(D[c:c_t]) > nu1  and  dbar_m0(D[c_t+1:t]) > nu2.
/// The persistence counter k increases while the test holds and the candidate
/// stays within search_tolerance of the candidate that started the streak.
/// When k exceeds k_max, c_t is declared, all models return to their priors and
/// data before c_t is dropped.
template <ObservationModel Model>
class Detector {
public:
    using WarningSink = std::function<void(std::string_view)>;

    Detector(DetectorConfig config, Model prototype)
        : config_(std::move(config)), m0_(prototype), scorer_(prototype, prototype) {
        config_.validate();
    }

    const DetectorConfig &config() const noexcept { return config_; }
    std::int64_t last_change() const noexcept { return last_change_; }
    const CandidateState &candidate() const noexcept { return candidate_; }
    bool has_candidate() const noexcept { return has_candidate_; }
    const TimeSeriesWindow &buffer() const noexcept { return buffer_; }
    const std::vector<DetectionEvent> &history() const noexcept { return history_; }
    const Model &m0() const noexcept { return m0_; }
    std::size_t wait_remaining() const noexcept { return wait_remaining_; }
    /// Index of the most recent sample, -1 before any data.
    std::int64_t now() const noexcept { return next_index_ - 1; }
    const IterationRecord &last_record() const noexcept { return record_; }

    void set_warning_sink(WarningSink sink) { warn_ = std::move(sink); }

    std::optional<DetectionEvent> step(const TimeSeriesWindow &batch) {
        if (batch.empty()) {
            return std::nullopt;
        }
        if (!buffer_.empty() && batch.first_timestamp() <= buffer_.last_timestamp()) {
            throw NonContiguousBatch("batch starting at timestamp " + std::to_string(batch.first_timestamp()) +
                                     " does not follow " + std::to_string(buffer_.last_timestamp()));
        }
        if (!buffer_.empty() &&
            (batch.channel_count() != buffer_.channel_count() || batch.input_dim() != buffer_.input_dim())) {
            throw InvalidArgument("batch dimensions differ from the stream");
        }
        const auto start = std::chrono::steady_clock::now();
        buffer_.append(batch);
        next_index_ += static_cast<std::int64_t>(batch.size());
        const std::int64_t t = now();

        record_ = IterationRecord{};
        record_.t = t;
        record_.interval_size = static_cast<std::size_t>(t - last_change_);
        record_.candidate = candidate_.candidate;
        record_.persistence = candidate_.persistence;

        std::optional<DetectionEvent> event;
        if (wait_remaining_ > 0) {
            wait_remaining_ -= std::min(wait_remaining_, batch.size());
        } else if (t - last_change_ >= static_cast<std::int64_t>(config_.t_ini)) {
            try {
                event = search_and_test(t);
            } catch (const Error &e) {
                record_.warning = e.what();
                if (warn_) {
                    warn_("t=" + std::to_string(t) + ": step skipped: " + e.what());
                }
            }
        }
        record_.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return event;
    }

    /// Two-segment test of the current candidate against m0's predictive distribution.
    CriterionResult criterion() const {
        const auto split = static_cast<std::size_t>(candidate_.candidate - last_change_);
        const std::size_t n = buffer_.size();
        if (split + 1 >= n) {
            throw EmptyDomain("candidate leaves no data after it");
        }
        CriterionResult out;
        out.left_distance = modified_mahalanobis(m0_, buffer_.slice(0, split));
        out.right_distance = modified_mahalanobis(m0_, buffer_.slice(split + 1, n - 1));
        out.satisfied = out.left_distance > config_.nu1 && out.right_distance > config_.nu2;
        return out;
    }

private:
    std::optional<DetectionEvent> search_and_test(std::int64_t t) {
        const std::size_t m = config_.min_fit_points();
        m0_.fit(buffer_, true);

        const std::int64_t prev = has_candidate_ ? candidate_.candidate : last_change_;
        const IndexRange domain = effective_interval(t, last_change_, prev, m);
        record_.effective_size = domain.size();
        CandidateState next = candidate_;
        next.candidate = prev;
        if (!domain.empty()) {
            scorer_.begin_iteration(buffer_, last_change_);
            const SearchResult found = ternary_search(scorer_, domain, prev, config_.search_tolerance);
            next.candidate = found.argmax;
            next.candidate_score = found.score;
            next.eval_count_last_iter = found.evaluations;
        } else {
            next.eval_count_last_iter = 0;
        }
        record_.searched = true;
        record_.evaluations = next.eval_count_last_iter;

        const bool first_search = !has_candidate_;
        candidate_ = next;
        has_candidate_ = true;

        const CriterionResult test = criterion();
        record_.candidate = candidate_.candidate;
        record_.candidate_score = candidate_.candidate_score;
        record_.left_distance = test.left_distance;
        record_.right_distance = test.right_distance;
        record_.criterion = test.satisfied;

        // The streak reference is the candidate of the step right before the
        // first increment, so k only grows while c_t stays put (within tolerance).
        const bool stable = !first_search && std::abs(candidate_.candidate - anchor_) <= config_.search_tolerance;
        if (test.satisfied && stable) {
            ++candidate_.persistence;
        } else if (!(test.satisfied && config_.freeze_on_move)) {
            candidate_.persistence = 0;
        }
        if (candidate_.persistence == 0 || !stable) {
            anchor_ = candidate_.candidate;
        }
        record_.persistence = candidate_.persistence;

        if (candidate_.persistence <= config_.k_max) {
            return std::nullopt;
        }
        return declare(t, test);
    }

    DetectionEvent declare(std::int64_t t, const CriterionResult &test) {
        DetectionEvent event;
        event.change_point = candidate_.candidate;
        event.declared_at = t;
        const auto split = static_cast<std::size_t>(candidate_.candidate - last_change_);
        event.change_timestamp = buffer_.timestamp(split);
        event.declared_timestamp = buffer_.last_timestamp();
        event.candidate_score = candidate_.candidate_score;
        event.left_distance = test.left_distance;
        event.right_distance = test.right_distance;
        history_.push_back(event);
        record_.detected = true;

        buffer_.drop_front(split);
        last_change_ = candidate_.candidate;
        m0_.reset();
        scorer_.reset();
        candidate_ = CandidateState{last_change_, 0.0, 0, 0};
        has_candidate_ = false;
        anchor_ = last_change_;
        wait_remaining_ = config_.wait;
        return event;
    }

    DetectorConfig config_;
    Model m0_;
    SplitScorer<Model> scorer_;
    TimeSeriesWindow buffer_;
    std::int64_t next_index_ = 0;
    std::int64_t last_change_ = 0;
    CandidateState candidate_{};
    bool has_candidate_ = false;
    std::int64_t anchor_ = 0;
    std::size_t wait_remaining_ = 0;
    std::vector<DetectionEvent> history_;
    IterationRecord record_{};
    WarningSink warn_;
};

struct StreamResult {
    std::vector<DetectionEvent> events;
    std::vector<IterationRecord> log;
};

/// Feeds `stream` to a fresh detector in batches of config.batch_size.
template <ObservationModel Model>
StreamResult run_stream(const TimeSeriesWindow &stream, const DetectorConfig &config, const Model &prototype,
                        typename Detector<Model>::WarningSink warn = {}) {
    Detector<Model> detector(config, prototype);
    if (warn) {
        detector.set_warning_sink(std::move(warn));
    }
    StreamResult out;
    const std::size_t n = stream.size();
    for (std::size_t first = 0; first < n; first += config.batch_size) {
        const std::size_t last = std::min(n, first + config.batch_size) - 1;
        if (auto event = detector.step(stream.slice(first, last))) {
            out.events.push_back(*event);
        }
        out.log.push_back(detector.last_record());
    }
    return out;
}

} // namespace gocpd
