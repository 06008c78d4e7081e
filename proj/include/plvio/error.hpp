#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace plvio {

enum class ErrorKind {
  DegenerateLine,
  DegenerateProjection,
  DegenerateImageLine,
  DegenerateFeature,
  BehindCamera,
  VpAtInfinity,
  StaleTrack,
  TriangulationFailed,
  WindowOverflow,
  EmptyWindow,
  DimensionError,
  TimeOrderError,
  ConfigError,
  ParseError,
  Diverged,
};

std::string_view to_string(ErrorKind kind);

// All recoverable failures in the library are reported through this type.
// Callers that only care about one category switch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DegenerateLine: return "DegenerateLine";
    case ErrorKind::DegenerateProjection: return "DegenerateProjection";
    case ErrorKind::DegenerateImageLine: return "DegenerateImageLine";
    case ErrorKind::DegenerateFeature: return "DegenerateFeature";
    case ErrorKind::BehindCamera: return "BehindCamera";
    case ErrorKind::VpAtInfinity: return "VpAtInfinity";
    case ErrorKind::StaleTrack: return "StaleTrack";
    case ErrorKind::TriangulationFailed: return "TriangulationFailed";
    case ErrorKind::WindowOverflow: return "WindowOverflow";
    case ErrorKind::EmptyWindow: return "EmptyWindow";
    case ErrorKind::DimensionError: return "DimensionError";
    case ErrorKind::TimeOrderError: return "TimeOrderError";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::Diverged: return "Diverged";
  }
  return "Unknown";
}

}  // namespace plvio
