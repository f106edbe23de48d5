#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gocpd {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A Gram or predictive covariance matrix could not be factorized even after
/// the maximum jitter was added to its diagonal.
class NonPositiveDefinite : public Error {
public:
    using Error::Error;
};

class TooFewPoints : public Error {
public:
    TooFewPoints(std::size_t have, std::size_t need)
        : Error("window has " + std::to_string(have) + " points, at least " + std::to_string(need) +
                " required"),
          have_(have), need_(need) {}

    std::size_t have() const noexcept { return have_; }
    std::size_t need() const noexcept { return need_; }

private:
    std::size_t have_;
    std::size_t need_;
};

class EmptyDomain : public Error {
public:
    using Error::Error;
};

class NonContiguousBatch : public Error {
public:
    using Error::Error;
};

class ZeroVariance : public Error {
public:
    explicit ZeroVariance(std::size_t channel)
        : Error("channel " + std::to_string(channel) + " has zero variance"), channel_(channel) {}

    std::size_t channel() const noexcept { return channel_; }

private:
    std::size_t channel_;
};

class EmptyLog : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Malformed input file. `line` is 1-based; 0 when the position is unknown.
class ParseError : public Error {
public:
    ParseError(const std::string &what, std::size_t line = 0)
        : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A configuration or script document is missing a field or has a field of the wrong type.
class SchemaError : public Error {
public:
    SchemaError(std::string field, const std::string &what)
        : Error("schema error at '" + field + "': " + what), field_(std::move(field)) {}

    const std::string &field() const noexcept { return field_; }

private:
    std::string field_;
};

} // namespace gocpd
