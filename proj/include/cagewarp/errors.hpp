#pragma once

#include <stdexcept>
#include <string>

namespace cagewarp {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File could not be opened, read or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed input record. `line` is 1-based, 0 when unknown.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
    [[nodiscard]] std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Out-of-range index or mismatched sizes between arguments.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Open, non-manifold or inconsistently oriented mesh where a cage is required.
class TopologyError : public Error {
public:
    using Error::Error;
};

/// Degenerate geometry or non-finite values.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace cagewarp
