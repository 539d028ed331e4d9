#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ksbt {

// Precondition failures on user-supplied arguments.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Configuration validation collects every problem before failing.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> issues);
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  std::vector<std::string> issues_;
};

// Initial data above the smallness threshold.
class SmallnessViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Ordering of the iterates broken beyond the configured slack.
class MonotonicityViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ksbt
