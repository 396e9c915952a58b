// Copyright 2026 The mrvox Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MRVOX_ERROR_HPP
#define MRVOX_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace mrvox {

enum class Errc {
  kInvalidScale,
  kInvalidFactor,
  kOutOfBounds,
  kDuplicateVoxel,
  kEmptyInput,
  kShapeError,
  kInvalidCamera,
  kNoLabels,
  kNotFound,
  kParseError,
  kConfigError,
  kDimMismatch,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::kInvalidScale: return "InvalidScale";
    case Errc::kInvalidFactor: return "InvalidFactor";
    case Errc::kOutOfBounds: return "OutOfBounds";
    case Errc::kDuplicateVoxel: return "DuplicateVoxel";
    case Errc::kEmptyInput: return "EmptyInput";
    case Errc::kShapeError: return "ShapeError";
    case Errc::kInvalidCamera: return "InvalidCamera";
    case Errc::kNoLabels: return "NoLabels";
    case Errc::kNotFound: return "NotFound";
    case Errc::kParseError: return "ParseError";
    case Errc::kConfigError: return "ConfigError";
    case Errc::kDimMismatch: return "DimMismatch";
  }
  return "Unknown";
}

/// Single exception type for the library; the code identifies the failure.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  [[nodiscard]] Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace mrvox

#endif  // MRVOX_ERROR_HPP
