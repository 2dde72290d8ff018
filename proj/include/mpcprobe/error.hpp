#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mpcprobe {

enum class Errc {
  kDecodeError,
  kAnonymizationOverflow,
  kInvalidNextSpeaker,
  kUnknownNode,
  kEmptyGraph,
  kDisconnectedGraph,
  kIllegalCombination,
  kMissingRepresentation,
  kBackendError,
  kEmptyGeneration,
  kEmptyContinuation,
  kCacheCorrupt,
  kDistractorUnavailable,
  kDummyCollision,
  kInstanceAborted,
  kEmptyCell,
  kDegenerateCell,
  kIoError,
  kInvalidConfig,
};

inline std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::kDecodeError: return "DecodeError";
    case Errc::kAnonymizationOverflow: return "AnonymizationOverflow";
    case Errc::kInvalidNextSpeaker: return "InvalidNextSpeaker";
    case Errc::kUnknownNode: return "UnknownNode";
    case Errc::kEmptyGraph: return "EmptyGraph";
    case Errc::kDisconnectedGraph: return "DisconnectedGraph";
    case Errc::kIllegalCombination: return "IllegalCombination";
    case Errc::kMissingRepresentation: return "MissingRepresentation";
    case Errc::kBackendError: return "BackendError";
    case Errc::kEmptyGeneration: return "EmptyGeneration";
    case Errc::kEmptyContinuation: return "EmptyContinuation";
    case Errc::kCacheCorrupt: return "CacheCorrupt";
    case Errc::kDistractorUnavailable: return "DistractorUnavailable";
    case Errc::kDummyCollision: return "DummyCollision";
    case Errc::kInstanceAborted: return "InstanceAborted";
    case Errc::kEmptyCell: return "EmptyCell";
    case Errc::kDegenerateCell: return "DegenerateCell";
    case Errc::kIoError: return "IoError";
    case Errc::kInvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

/// Single exception type for the toolkit; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

  /// Only backend transport failures are worth retrying.
  bool retryable() const noexcept { return code_ == Errc::kBackendError; }

 private:
  Errc code_;
};

}  // namespace mpcprobe
