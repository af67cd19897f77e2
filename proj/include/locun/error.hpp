// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace locun {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or batch shapes that do not line up with the model.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// NaN or infinity reached an activation or a loss.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Invalid hyperparameters, unknown names, schema violations.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Data that breaks a documented constraint (label range, split sizes).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t byte_offset)
      : Error(what + " (at byte " + std::to_string(byte_offset) + ")"), offset_(byte_offset) {}

  std::size_t byte_offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace locun
