#pragma once

#include <stdexcept>
#include <string>

namespace entroshape {

/// Invalid hyperparameter or option (bad bandwidth, unknown variant, ...).
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// Malformed data: shape mismatch, ragged arrays, non-finite values.
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace entroshape
