#pragma once

#include <stdexcept>
#include <string>

namespace mammo {

// Violated precondition or domain rule. The CLI maps this to exit status 1.
class ValidationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Unreadable, missing or malformed external data (files, model directories).
// The CLI maps this to exit status 2.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// A ratio whose denominator is zero, e.g. sensitivity with no positives.
class UndefinedRateError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

namespace detail {

[[noreturn]] inline void fail(const std::string& what) { throw ValidationError(what); }

inline void require(bool ok, const std::string& what) {
  if (!ok) fail(what);
}

} // namespace detail
} // namespace mammo
