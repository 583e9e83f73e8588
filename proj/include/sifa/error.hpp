#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sifa {

enum class ErrorKind {
  ShapeMismatch,
  SpacingMismatch,
  LabelOutOfRange,
  NonFiniteData,
  InvalidArgument,
  UnsupportedFormat,
  CorruptHeader,
  DegenerateVolume,
  RoiOutOfBounds,
  EmptyDataset,
  NonFiniteLoss,
  ArchMismatch,
  CorruptCheckpoint,
  EmptyLog,
  Io,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::SpacingMismatch: return "SpacingMismatch";
    case ErrorKind::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorKind::NonFiniteData: return "NonFiniteData";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorKind::CorruptHeader: return "CorruptHeader";
    case ErrorKind::DegenerateVolume: return "DegenerateVolume";
    case ErrorKind::RoiOutOfBounds: return "RoiOutOfBounds";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::ArchMismatch: return "ArchMismatch";
    case ErrorKind::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorKind::EmptyLog: return "EmptyLog";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace sifa
