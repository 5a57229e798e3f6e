#pragma once

#include <stdexcept>
#include <string>

namespace dce {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Invalid interval (lower >= upper or non-finite bounds).
class DomainError : public Error {
  public:
    using Error::Error;
};

/// Model or algorithm parameter outside its admissible range.
class ParameterError : public Error {
  public:
    using Error::Error;
};

/// Input data that cannot be processed (non-finite values, empty samples, ...).
class DataError : public Error {
  public:
    using Error::Error;
};

/// Requested size exceeds a hard guard.
class SizeError : public Error {
  public:
    using Error::Error;
};

/// Exercise/monitoring schedule inconsistent with the request.
class ScheduleError : public Error {
  public:
    using Error::Error;
};

/// Incompatible pieces handed to an algorithm (grid mismatch, domain mismatch, ...).
class ConfigurationError : public Error {
  public:
    using Error::Error;
};

/// A numerical procedure failed its own diagnostics.
class NumericalError : public Error {
  public:
    NumericalError(const std::string& what, std::string diagnostic = {})
        : Error(what), diagnostic_(std::move(diagnostic)) {}

    const std::string& diagnostic() const noexcept { return diagnostic_; }

  private:
    std::string diagnostic_;
};

}  // namespace dce
