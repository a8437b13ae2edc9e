#pragma once

#include <stdexcept>
#include <string>

namespace dart {

// Bad configuration: unknown keys, out-of-range values, malformed files.
// The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Training produced non-finite losses or parameters. CLI exit code 3.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

// A required input artifact (checkpoint, pool, trace) is absent or corrupt.
// CLI exit code 4.
class MissingArtifactError : public std::runtime_error {
 public:
  explicit MissingArtifactError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dart
