#pragma once

#include "gocpd/errors.hpp"
#include "gocpd/model.hpp"
#include "gocpd/window.hpp"

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <iterator>
#include <map>
#include <optional>
#include <utility>

namespace gocpd {

/// Inclusive range of split positions. Empty when last < first.
struct IndexRange {
    std::int64_t first = 0;
    std::int64_t last = -1;

    bool empty() const noexcept { return last < first; }
    std::size_t size() const noexcept { return empty() ? 0 : static_cast<std::size_t>(last - first + 1); }
    bool contains(std::int64_t tau) const noexcept { return tau >= first && tau <= last; }

    friend bool operator==(const IndexRange &, const IndexRange &) = default;
};

/// Value of the split metric at tau: the averaged log-likelihood of the segment
/// before tau under its own fit plus that of the segment from tau on.
struct SplitScore {
    std::int64_t tau = 0;
    double score = 0.0;
    ModelParams left_fit;
    ModelParams right_fit;
};

struct CandidateState {
    std::int64_t candidate = 0;
    double candidate_score = 0.0;
    std::size_t persistence = 0;
    std::size_t eval_count_last_iter = 0;
};

struct SearchResult {
    std::int64_t argmax = 0;
    double score = 0.0;
    std::size_t evaluations = 0;
};

/// Split positions worth evaluating at time t.
///
/// Both segments of a split must hold at least `min_fit_points` observations,
/// and nothing before the saved candidate is revisited:
/// [max(prev_candidate, last_change + m), t - m].
inline IndexRange effective_interval(std::int64_t t, std::int64_t last_change, std::int64_t prev_candidate,
                                     std::size_t min_fit_points) {
    const auto m = static_cast<std::int64_t>(min_fit_points);
    return IndexRange{std::max(prev_candidate, last_change + m), t - m};
}

/// Fits m1 on window rows [0, tau - base) and m2 on rows [tau - base, end),
/// where `base` is the absolute index of row 0, and returns the summed
/// averaged log-likelihoods.
template <ObservationModel Model>
SplitScore split_score(const TimeSeriesWindow &window, std::int64_t base, std::int64_t tau, Model &m1, Model &m2,
                       bool warm_start) {
    const auto n = static_cast<std::int64_t>(window.size());
    const std::int64_t split = tau - base;
    const auto left_need = m1.options().min_fit_points;
    const auto right_need = m2.options().min_fit_points;
    if (split < static_cast<std::int64_t>(left_need)) {
        throw TooFewPoints(static_cast<std::size_t>(std::max<std::int64_t>(split, 0)), left_need);
    }
    if (n - split < static_cast<std::int64_t>(right_need)) {
        throw TooFewPoints(static_cast<std::size_t>(std::max<std::int64_t>(n - split, 0)), right_need);
    }
    const TimeSeriesWindow left = window.slice(0, static_cast<std::size_t>(split - 1));
    const TimeSeriesWindow right = window.slice(static_cast<std::size_t>(split), static_cast<std::size_t>(n - 1));
    m1.fit(left, warm_start);
    m2.fit(right, warm_start);
    SplitScore out;
    out.tau = tau;
    out.score = avg_log_likelihood(m1, left) + avg_log_likelihood(m2, right);
    out.left_fit = m1.params();
    out.right_fit = m2.params();
    return out;
}

/// Index of the largest value of `score` on `domain`; ties go to the earliest index.
template <class ScoreFn>
SearchResult linear_scan_argmax(ScoreFn &&score, IndexRange domain) {
    if (domain.empty()) {
        throw EmptyDomain("linear scan over an empty domain");
    }
    SearchResult out{domain.first, score(domain.first), 1};
    for (std::int64_t tau = domain.first + 1; tau <= domain.last; ++tau) {
        const double s = score(tau);
        ++out.evaluations;
        if (s > out.score) {
            out.argmax = tau;
            out.score = s;
        }
    }
    return out;
}

/// Discrete ternary search for the maximum of a unimodal sequence.
///
/// The bracket [l, r] is cut at tau1 = l + (r-l)/3 and tau2 = r - (r-l)/3. If
/// the previous candidate scores higher than tau1 the maximum lies between
/// them and the bracket becomes [l, tau1]; otherwise the lower of tau1/tau2
/// decides which third is dropped (both outer thirds on a tie). Once the
/// bracket has at most three points or tau2 - tau1 < tolerance, the remaining
/// bracket is scanned and the best position scored so far is returned.
/// `evaluations` counts distinct positions scored.
template <class ScoreFn>
SearchResult ternary_search(ScoreFn &&score, IndexRange domain, std::int64_t prev_candidate,
                            std::int64_t tolerance = 2) {
    if (domain.empty()) {
        throw EmptyDomain("ternary search over an empty domain");
    }
    if (tolerance < 1) {
        throw InvalidArgument("search tolerance must be at least 1");
    }
    std::map<std::int64_t, double> seen;
    auto eval = [&](std::int64_t tau) {
        auto it = seen.find(tau);
        if (it == seen.end()) {
            it = seen.emplace(tau, score(tau)).first;
        }
        return it->second;
    };

    const std::int64_t prev = std::clamp(prev_candidate, domain.first, domain.last);
    std::int64_t l = domain.first;
    std::int64_t r = domain.last;
    while (true) {
        const std::int64_t third = (r - l) / 3;
        const std::int64_t tau1 = l + third;
        const std::int64_t tau2 = r - third;
        if (r - l <= 2 || tau2 - tau1 < tolerance) {
            break;
        }
        const double s_prev = eval(prev);
        const double s1 = eval(tau1);
        const double s2 = eval(tau2);
        if (s_prev > s1) {
            r = tau1;
        } else if (s1 < s2) {
            l = tau1;
        } else if (s1 > s2) {
            r = tau2;
        } else {
            l = tau1;
            r = tau2;
        }
    }
    SearchResult out = linear_scan_argmax(eval, IndexRange{l, r});
    // Off a unimodal sequence an earlier probe (the previous candidate in
    // particular) can beat the terminal bracket; keep the best position seen.
    for (const auto &[tau, s] : seen) {
        if (s > out.score) {
            out.argmax = tau;
            out.score = s;
        }
    }
    out.evaluations = seen.size();
    return out;
}

/// Memoizing evaluator of the split metric over the window D[base : t].
///
/// Left-segment fits depend only on (base, tau) and are kept until the base
/// moves. Full scores depend on t and are dropped by begin_iteration(). Each
/// new fit is warm-started from the fit at the nearest evaluated tau of this
/// iteration, falling back to the previous iteration.
template <ObservationModel Model>
class SplitScorer {
public:
    SplitScorer(Model left_prototype, Model right_prototype)
        : left_prototype_(std::move(left_prototype)), right_prototype_(std::move(right_prototype)) {}

    void begin_iteration(const TimeSeriesWindow &window, std::int64_t base) {
        if (base != base_) {
            left_cache_.clear();
            previous_right_.clear();
            base_ = base;
        } else {
            for (auto &[tau, entry] : scores_) {
                previous_right_[tau] = entry.right_fit;
            }
        }
        scores_.clear();
        window_ = &window;
        evaluations_ = 0;
    }

    /// Forgets every cached fit, e.g. after a detection.
    void reset() {
        left_cache_.clear();
        previous_right_.clear();
        scores_.clear();
        window_ = nullptr;
        base_ = -1;
        evaluations_ = 0;
    }

    const SplitScore &score(std::int64_t tau) {
        if (window_ == nullptr) {
            throw InvalidArgument("SplitScorer::score called before begin_iteration");
        }
        if (auto it = scores_.find(tau); it != scores_.end()) {
            return it->second;
        }
        const auto n = static_cast<std::int64_t>(window_->size());
        const std::int64_t split = tau - base_;
        const auto left_need = static_cast<std::int64_t>(left_prototype_.options().min_fit_points);
        const auto right_need = static_cast<std::int64_t>(right_prototype_.options().min_fit_points);
        if (split < left_need || n - split < right_need) {
            throw TooFewPoints(static_cast<std::size_t>(std::max<std::int64_t>(std::min(split, n - split), 0)),
                               static_cast<std::size_t>(std::max(left_need, right_need)));
        }
        ++evaluations_;

        const LeftFit &left = left_fit(tau, split);

        Model m2 = right_prototype_;
        bool warm = false;
        if (const ModelParams *source = nearest_right_params(tau)) {
            m2.set_params(*source);
            warm = true;
        }
        const TimeSeriesWindow right = window_->slice(static_cast<std::size_t>(split), static_cast<std::size_t>(n - 1));
        m2.fit(right, warm);

        SplitScore out;
        out.tau = tau;
        out.score = left.avg_log_likelihood + avg_log_likelihood(m2, right);
        out.left_fit = left.params;
        out.right_fit = m2.params();
        return scores_.emplace(tau, std::move(out)).first->second;
    }

    double operator()(std::int64_t tau) { return score(tau).score; }

    std::size_t evaluations() const noexcept { return evaluations_; }
    const std::map<std::int64_t, SplitScore> &scores() const noexcept { return scores_; }

private:
    struct LeftFit {
        ModelParams params;
        double avg_log_likelihood = 0.0;
    };

    const LeftFit &left_fit(std::int64_t tau, std::int64_t split) {
        if (auto it = left_cache_.find(tau); it != left_cache_.end()) {
            return it->second;
        }
        Model m1 = left_prototype_;
        bool warm = false;
        if (auto near = nearest(left_cache_, tau); near != left_cache_.end()) {
            m1.set_params(near->second.params);
            warm = true;
        }
        const TimeSeriesWindow left = window_->slice(0, static_cast<std::size_t>(split - 1));
        m1.fit(left, warm);
        LeftFit fit{m1.params(), avg_log_likelihood(m1, left)};
        return left_cache_.emplace(tau, std::move(fit)).first->second;
    }

    const ModelParams *nearest_right_params(std::int64_t tau) const {
        if (auto it = nearest(scores_, tau); it != scores_.end()) {
            return &it->second.right_fit;
        }
        if (auto it = nearest(previous_right_, tau); it != previous_right_.end()) {
            return &it->second;
        }
        return nullptr;
    }

    template <class Map>
    static auto nearest(const Map &map, std::int64_t tau) {
        if (map.empty()) {
            return map.end();
        }
        auto hi = map.lower_bound(tau);
        if (hi == map.begin()) {
            return hi;
        }
        auto lo = std::prev(hi);
        if (hi == map.end()) {
            return lo;
        }
        return (tau - lo->first) <= (hi->first - tau) ? lo : hi;
    }

    Model left_prototype_;
    Model right_prototype_;
    const TimeSeriesWindow *window_ = nullptr;
    std::int64_t base_ = -1;
    std::size_t evaluations_ = 0;
    std::map<std::int64_t, LeftFit> left_cache_;
    std::map<std::int64_t, ModelParams> previous_right_;
    std::map<std::int64_t, SplitScore> scores_;
};

/// Runs ternary search over the effective interval with a SplitScorer and
/// packages the result as the new candidate state. The persistence counter is
/// carried over from `previous`; the detector owns its update.
template <ObservationModel Model>
CandidateState search_candidate(SplitScorer<Model> &scorer, const TimeSeriesWindow &window, std::int64_t base,
                                std::int64_t t, const CandidateState &previous, std::size_t min_fit_points,
                                std::int64_t tolerance) {
    const IndexRange domain = effective_interval(t, base, previous.candidate, min_fit_points);
    if (domain.empty()) {
        throw EmptyDomain("effective interval is empty at t=" + std::to_string(t));
    }
    scorer.begin_iteration(window, base);
    const SearchResult found = ternary_search(scorer, domain, previous.candidate, tolerance);
    CandidateState out = previous;
    out.candidate = found.argmax;
    out.candidate_score = found.score;
    out.eval_count_last_iter = found.evaluations;
    return out;
}

} // namespace gocpd
