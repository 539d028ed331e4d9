#include "ksbt/errors.hpp"

namespace ksbt {

namespace {

std::string join(const std::vector<std::string>& issues) {
  std::string msg = "invalid configuration";
  for (const auto& s : issues) msg += "\n  - " + s;
  return msg;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> issues) : std::runtime_error(join(issues)), issues_(std::move(issues)) {}

}  // namespace ksbt
