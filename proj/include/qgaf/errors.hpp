#pragma once

#include <stdexcept>
#include <string>

namespace qgaf {

// Base type for everything thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Input data violates a precondition (bad value, bad ordering, bad shape).
struct ValidationError : Error {
    using Error::Error;
};

// A window whose values are all equal cannot be normalized.
struct DegenerateWindowError : ValidationError {
    using ValidationError::ValidationError;
};

// Malformed text input (CSV rows, dates, numbers).
struct ParseError : Error {
    using Error::Error;
};

// Math domain violation (arccos out of range, unrecoverable sign).
struct DomainError : Error {
    using Error::Error;
};

// Binary container violation (magic, version, dimensions, truncation).
struct FormatError : Error {
    using Error::Error;
};

// Filesystem failure.
struct IoError : Error {
    using Error::Error;
};

// HTTP fetch failure. status < 0 means the transport failed before any
// response arrived (refused connection, DNS, timeout).
struct FetchError : Error {
    int status;
    FetchError(const std::string& msg, int status_code = -1)
        : Error(msg), status(status_code) {}
};

// Bad pipeline configuration.
struct ConfigError : Error {
    using Error::Error;
};

// Training aborted mid-run (non-finite loss or gradient). Reported as an
// internal failure by the CLI, unlike the user-facing errors above.
struct TrainingFailure : Error {
    using Error::Error;
};

}  // namespace qgaf
