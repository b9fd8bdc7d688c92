#pragma once

#include <stdexcept>
#include <string>

namespace eulerlab {

/// Base class for every error raised by the library.
struct LabError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// An operation was called outside its domain (bad grid, nonzero mean, CFL violation, ...).
struct PreconditionError : LabError {
    using LabError::LabError;
};

/// NaN/Inf appeared in a state, or an iteration diverged.
struct NumericalError : LabError {
    using LabError::LabError;
};

/// Strict config parsing failure; `line` is 1-based, 0 when not tied to a line.
struct ConfigError : LabError {
    ConfigError(const std::string& msg, int line_no = 0)
        : LabError(line_no > 0 ? "line " + std::to_string(line_no) + ": " + msg : msg), line(line_no) {}
    int line;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw PreconditionError(msg);
}

}  // namespace eulerlab
