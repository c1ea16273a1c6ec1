#pragma once

#include <stdexcept>
#include <string>

namespace iontweez {

/// Error categories double as process exit codes for the command-line tool.
enum class ErrorCategory : int {
  config = 2,
  instability = 3,
  numerical = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }
  int exit_code() const noexcept { return static_cast<int>(category_); }

 private:
  ErrorCategory category_;
};

/// Invalid or inconsistent input (bad config values, bound violations, size mismatches).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

/// The physical system is not confined or not dynamically stable.
class InstabilityError : public Error {
 public:
  explicit InstabilityError(const std::string& what)
      : Error(ErrorCategory::instability, what) {}
};

/// A solver failed to converge or hit a singular configuration.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(ErrorCategory::numerical, what) {}
};

}  // namespace iontweez
