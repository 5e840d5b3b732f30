#include "patchqc/error.hpp"

namespace patchqc {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::MissingLabels: return "MissingLabels";
    case ErrorKind::NoSeeds: return "NoSeeds";
    case ErrorKind::DivisionByZero: return "DivisionByZero";
    case ErrorKind::MissingOrtho: return "MissingOrtho";
    case ErrorKind::NearVerticalPlane: return "NearVerticalPlane";
    case ErrorKind::TooFewPoints: return "TooFewPoints";
    case ErrorKind::TooFewPatches: return "TooFewPatches";
    case ErrorKind::TooFewValues: return "TooFewValues";
    case ErrorKind::InsufficientNeighbors: return "InsufficientNeighbors";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::PatchSetMismatch: return "PatchSetMismatch";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::DataError: return "DataError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace patchqc
