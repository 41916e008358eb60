#pragma once

#include <stdexcept>
#include <string>

namespace gibbslab {

// Bad experiment description (unknown keys, invalid parameters, ...).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Arguments outside the declared domain of an operation.
struct DomainError : std::runtime_error {
  explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

// Refusal to run: the requested ensemble is not normalizable.
struct StabilityError : std::runtime_error {
  explicit StabilityError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace gibbslab
