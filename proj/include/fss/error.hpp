#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace fss {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid input: violated precondition, bad configuration value, etc.
class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// An iterative method stopped before meeting its tolerance.
/// Carries the last iterate so callers can inspect or resume.
class ConvergenceError : public Error {
public:
  ConvergenceError(const std::string& what, std::vector<double> last_iterate, double residual_norm)
      : Error(what), last_iterate_(std::move(last_iterate)), residual_norm_(residual_norm) {}

  const std::vector<double>& last_iterate() const noexcept { return last_iterate_; }
  double residual_norm() const noexcept { return residual_norm_; }

private:
  std::vector<double> last_iterate_;
  double residual_norm_;
};

/// Thrown by the self-checking routines when a certified property fails.
class AssertionFailure : public Error {
public:
  using Error::Error;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

} // namespace detail
} // namespace fss
