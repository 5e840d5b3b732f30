#pragma once

#include <stdexcept>
#include <string>

namespace patchqc {

enum class ErrorKind {
  DegenerateGeometry,
  EmptyInput,
  MissingLabels,
  NoSeeds,
  DivisionByZero,
  MissingOrtho,
  NearVerticalPlane,
  TooFewPoints,
  TooFewPatches,
  TooFewValues,
  InsufficientNeighbors,
  InvalidSpec,
  PatchSetMismatch,
  ConfigError,
  DataError,
  IoError,
};

const char* to_string(ErrorKind kind) noexcept;

// Every library failure is reported through this type; `kind` selects the
// CLI exit code and the machine-readable error name.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace patchqc
