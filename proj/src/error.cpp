#include "nhp/error.hpp"

namespace nhp {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kInvalidArgument:
      return "invalid_argument";
    case ErrorKind::kInvalidGeometry:
      return "invalid_geometry";
    case ErrorKind::kOutOfRegion:
      return "out_of_region";
    case ErrorKind::kParse:
      return "parse_error";
    case ErrorKind::kNotFound:
      return "not_found";
    case ErrorKind::kDimensionMismatch:
      return "dimension_mismatch";
    case ErrorKind::kNumerical:
      return "numerical_error";
    case ErrorKind::kIo:
      return "io_error";
  }
  return "unknown";
}

}  // namespace nhp
