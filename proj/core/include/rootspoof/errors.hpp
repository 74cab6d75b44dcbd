#pragma once

#include <stdexcept>
#include <string>

namespace rootspoof {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user-supplied configuration: thresholds, scenario files, flags.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input that cannot be used at all (as opposed to individual skipped records).
class InputError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ScheduleConflict : public InputError {
 public:
  using InputError::InputError;
};

/// A pattern profile or known-site list failed validation.
class ProfileError : public InputError {
 public:
  using InputError::InputError;
};

class FetchError : public Error {
 public:
  FetchError(const std::string& what, std::string resume_cursor)
      : Error(what), resume_cursor_(std::move(resume_cursor)) {}

  /// Cursor of the first page not yet received; pass it back to resume.
  const std::string& resume_cursor() const { return resume_cursor_; }

 private:
  std::string resume_cursor_;
};

/// An internal consistency check failed. Indicates a bug, not bad input.
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace rootspoof
