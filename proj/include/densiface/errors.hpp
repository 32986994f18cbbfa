#pragma once

#include <stdexcept>
#include <string>

namespace densiface {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller violated a documented precondition.
class UsageError : public Error {
public:
    using Error::Error;
};

/// Inconsistent camera / frame / parameter setup.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed input file or document.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Well-formed document that fails a field-level check.
class ValidationError : public ParseError {
public:
    using ParseError::ParseError;
};

/// Cascade constructs we deliberately do not evaluate (tilted features, trees).
class UnsupportedFeatureError : public ParseError {
public:
    using ParseError::ParseError;
};

/// No face rectangle could be determined.
class NoFaceError : public Error {
public:
    using Error::Error;
};

/// Linear solve failed (non-convergence or singular system).
class SolverError : public Error {
public:
    SolverError(const std::string& what, double residual = 0.0)
        : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

class SingularityError : public SolverError {
public:
    using SolverError::SolverError;
};

} // namespace densiface
