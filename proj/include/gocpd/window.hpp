#pragma once

#include "gocpd/errors.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace gocpd {

/// A contiguous run of (input, output) observations.
///
/// Row i holds x_i (inputs, D columns) and y_i (outputs, C columns) observed at
/// timestamps()[i]. Timestamps are strictly increasing but need not be unit
/// spaced (a downsampled series keeps its original timestamps).
class TimeSeriesWindow {
public:
    TimeSeriesWindow() = default;

    TimeSeriesWindow(std::vector<std::int64_t> timestamps, Eigen::MatrixXd inputs, Eigen::MatrixXd outputs)
        : timestamps_(std::move(timestamps)), inputs_(std::move(inputs)), outputs_(std::move(outputs)) {
        validate();
    }

    /// Unit-grid series: timestamps start, start+1, ... and x_t = t.
    static TimeSeriesWindow from_values(std::span<const double> values, std::int64_t start = 0) {
        Eigen::MatrixXd y(static_cast<Eigen::Index>(values.size()), 1);
        for (std::size_t i = 0; i < values.size(); ++i) {
            y(static_cast<Eigen::Index>(i), 0) = values[i];
        }
        return from_outputs(std::move(y), start);
    }

    static TimeSeriesWindow from_outputs(Eigen::MatrixXd outputs, std::int64_t start = 0) {
        const auto n = outputs.rows();
        std::vector<std::int64_t> ts(static_cast<std::size_t>(n));
        Eigen::MatrixXd x(n, 1);
        for (Eigen::Index i = 0; i < n; ++i) {
            ts[static_cast<std::size_t>(i)] = start + i;
            x(i, 0) = static_cast<double>(start + i);
        }
        return TimeSeriesWindow(std::move(ts), std::move(x), std::move(outputs));
    }

    std::size_t size() const noexcept { return timestamps_.size(); }
    bool empty() const noexcept { return timestamps_.empty(); }
    std::size_t input_dim() const noexcept { return static_cast<std::size_t>(inputs_.cols()); }
    std::size_t channel_count() const noexcept { return static_cast<std::size_t>(outputs_.cols()); }

    const std::vector<std::int64_t> &timestamps() const noexcept { return timestamps_; }
    std::int64_t timestamp(std::size_t row) const { return timestamps_.at(row); }
    std::int64_t first_timestamp() const { return timestamps_.front(); }
    std::int64_t last_timestamp() const { return timestamps_.back(); }

    const Eigen::MatrixXd &inputs() const noexcept { return inputs_; }
    const Eigen::MatrixXd &outputs() const noexcept { return outputs_; }

    /// Rows first..last inclusive, so the result holds last - first + 1 points.
    TimeSeriesWindow slice(std::size_t first, std::size_t last) const {
        if (first > last || last >= size()) {
            throw InvalidArgument("slice [" + std::to_string(first) + ", " + std::to_string(last) +
                                  "] out of range for window of size " + std::to_string(size()));
        }
        const auto n = static_cast<Eigen::Index>(last - first + 1);
        const auto f = static_cast<Eigen::Index>(first);
        std::vector<std::int64_t> ts(timestamps_.begin() + f, timestamps_.begin() + f + n);
        return TimeSeriesWindow(std::move(ts), inputs_.middleRows(f, n), outputs_.middleRows(f, n));
    }

    /// Appends `other` after the last row. Dimensions must agree and `other`
    /// must start strictly after this window ends.
    void append(const TimeSeriesWindow &other) {
        if (other.empty()) {
            return;
        }
        if (empty()) {
            *this = other;
            return;
        }
        if (other.input_dim() != input_dim() || other.channel_count() != channel_count()) {
            throw InvalidArgument("appended window has mismatched dimensions");
        }
        if (other.first_timestamp() <= last_timestamp()) {
            throw NonContiguousBatch("batch starting at " + std::to_string(other.first_timestamp()) +
                                     " does not follow timestamp " + std::to_string(last_timestamp()));
        }
        const auto n = inputs_.rows();
        const auto m = other.inputs_.rows();
        inputs_.conservativeResize(n + m, Eigen::NoChange);
        inputs_.bottomRows(m) = other.inputs_;
        outputs_.conservativeResize(n + m, Eigen::NoChange);
        outputs_.bottomRows(m) = other.outputs_;
        timestamps_.insert(timestamps_.end(), other.timestamps_.begin(), other.timestamps_.end());
    }

    /// Removes the first `count` rows.
    void drop_front(std::size_t count) {
        if (count == 0) {
            return;
        }
        if (count >= size()) {
            *this = TimeSeriesWindow{};
            return;
        }
        const auto keep = static_cast<Eigen::Index>(size() - count);
        Eigen::MatrixXd x = inputs_.bottomRows(keep);
        Eigen::MatrixXd y = outputs_.bottomRows(keep);
        inputs_ = std::move(x);
        outputs_ = std::move(y);
        timestamps_.erase(timestamps_.begin(), timestamps_.begin() + static_cast<std::ptrdiff_t>(count));
    }

    friend bool operator==(const TimeSeriesWindow &a, const TimeSeriesWindow &b) {
        return a.timestamps_ == b.timestamps_ && a.inputs_.rows() == b.inputs_.rows() &&
               a.inputs_.cols() == b.inputs_.cols() && a.outputs_.cols() == b.outputs_.cols() &&
               a.inputs_ == b.inputs_ && a.outputs_ == b.outputs_;
    }

private:
    void validate() const {
        const auto n = timestamps_.size();
        if (n == 0) {
            throw InvalidArgument("a window needs at least one observation");
        }
        if (static_cast<std::size_t>(inputs_.rows()) != n || static_cast<std::size_t>(outputs_.rows()) != n) {
            throw InvalidArgument("inputs, outputs and timestamps must have equal length");
        }
        if (outputs_.cols() == 0) {
            throw InvalidArgument("a window needs at least one output channel");
        }
        for (std::size_t i = 1; i < n; ++i) {
            if (timestamps_[i] <= timestamps_[i - 1]) {
                throw InvalidArgument("timestamps must be strictly increasing (row " + std::to_string(i) + ")");
            }
        }
    }

    std::vector<std::int64_t> timestamps_;
    Eigen::MatrixXd inputs_;
    Eigen::MatrixXd outputs_;
};

} // namespace gocpd
