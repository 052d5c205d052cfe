#include "refbert/error.hpp"

namespace refbert {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::MalformedCode: return "MalformedCode";
    case Errc::NoVariables: return "NoVariables";
    case Errc::PoolExhausted: return "PoolExhausted";
    case Errc::Io: return "Io";
    case Errc::SchemaViolation: return "SchemaViolation";
    case Errc::InvariantViolation: return "InvariantViolation";
    case Errc::VocabTooSmall: return "VocabTooSmall";
    case Errc::EmptyName: return "EmptyName";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::SequenceTooLong: return "SequenceTooLong";
    case Errc::UnknownTokenId: return "UnknownTokenId";
    case Errc::EmptyPositions: return "EmptyPositions";
    case Errc::ZeroVector: return "ZeroVector";
    case Errc::NonFiniteGradient: return "NonFiniteGradient";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::LengthOutOfRange: return "LengthOutOfRange";
    case Errc::NameTooLong: return "NameTooLong";
    case Errc::NameTruncated: return "NameTruncated";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::VocabExhausted: return "VocabExhausted";
    case Errc::VariableNotFound: return "VariableNotFound";
    case Errc::EmptyTruth: return "EmptyTruth";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::NoCandidates: return "NoCandidates";
    case Errc::BadCheckpoint: return "BadCheckpoint";
  }
  return "Unknown";
}

}  // namespace refbert
