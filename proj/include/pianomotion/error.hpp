#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pianomotion {

enum class Errc {
  // midi
  MalformedHeader,
  TruncatedChunk,
  InvalidVlq,
  MalformedEvent,
  // numerics / shapes
  DimensionMismatch,
  LengthMismatch,
  ShapeMismatch,
  TooShort,
  TooFewSamples,
  NotPSD,
  NonFinite,
  BadWindow,
  BadRange,
  StepOutOfRange,
  NoConvergence,
  // dataset
  SchemaViolation,
  BadFrameCount,
  EmptyDataset,
  ConflictingSplit,
  Unpaired,
  // generic
  InvalidArgument,
  Io,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::MalformedHeader: return "MalformedHeader";
    case Errc::TruncatedChunk: return "TruncatedChunk";
    case Errc::InvalidVlq: return "InvalidVlq";
    case Errc::MalformedEvent: return "MalformedEvent";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::TooShort: return "TooShort";
    case Errc::TooFewSamples: return "TooFewSamples";
    case Errc::NotPSD: return "NotPSD";
    case Errc::NonFinite: return "NonFinite";
    case Errc::BadWindow: return "BadWindow";
    case Errc::BadRange: return "BadRange";
    case Errc::StepOutOfRange: return "StepOutOfRange";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::SchemaViolation: return "SchemaViolation";
    case Errc::BadFrameCount: return "BadFrameCount";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::ConflictingSplit: return "ConflictingSplit";
    case Errc::Unpaired: return "Unpaired";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI exit-code mapping) can dispatch without parsing text.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) { throw Error(code, message); }

inline void require(bool condition, Errc code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace pianomotion
