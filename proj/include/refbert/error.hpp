#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace refbert {

enum class Errc {
  MalformedCode,
  NoVariables,
  PoolExhausted,
  Io,
  SchemaViolation,
  InvariantViolation,
  VocabTooSmall,
  EmptyName,
  InvalidConfig,
  SequenceTooLong,
  UnknownTokenId,
  EmptyPositions,
  ZeroVector,
  NonFiniteGradient,
  NonFiniteLoss,
  LengthOutOfRange,
  NameTooLong,
  NameTruncated,
  ShapeMismatch,
  VocabExhausted,
  VariableNotFound,
  EmptyTruth,
  EmptyCorpus,
  NoCandidates,
  BadCheckpoint,
};

std::string_view to_string(Errc code) noexcept;

/// Every failure raised by the library carries one of the Errc kinds so that
/// callers (the CLI in particular) can map it to an exit code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace refbert
