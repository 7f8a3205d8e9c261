#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nhp {

enum class ErrorKind {
  kInvalidArgument,
  kInvalidGeometry,
  kOutOfRegion,
  kParse,
  kNotFound,
  kDimensionMismatch,
  kNumerical,
  kIo,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Exception carrying a machine-readable kind alongside the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace nhp
