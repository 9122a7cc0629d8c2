// SPDX-License-Identifier: Apache-2.0

#include "mrcad/error.hpp"

namespace mrcad {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnresolvedReference:
      return "UnresolvedReference";
    case ErrorCode::DegenerateResult:
      return "DegenerateResult";
    case ErrorCode::DegenerateCurve:
      return "DegenerateCurve";
    case ErrorCode::OutOfBounds:
      return "OutOfBounds";
    case ErrorCode::InvalidDesign:
      return "InvalidDesign";
    case ErrorCode::ParseError:
      return "ParseError";
    case ErrorCode::UnsupportedCommand:
      return "UnsupportedCommand";
    case ErrorCode::ModalityViolation:
      return "ModalityViolation";
    case ErrorCode::CharLimitExceeded:
      return "CharLimitExceeded";
    case ErrorCode::RoundLimitExceeded:
      return "RoundLimitExceeded";
    case ErrorCode::TimeExhausted:
      return "TimeExhausted";
    case ErrorCode::EmptyMessage:
      return "EmptyMessage";
    case ErrorCode::GameFinished:
      return "GameFinished";
    case ErrorCode::UnknownPreset:
      return "UnknownPreset";
    case ErrorCode::InvalidConfig:
      return "InvalidConfig";
    case ErrorCode::AgentError:
      return "AgentError";
    case ErrorCode::DegenerateBoundingBox:
      return "DegenerateBoundingBox";
    case ErrorCode::SchemaError:
      return "SchemaError";
    case ErrorCode::ZeroBaseline:
      return "ZeroBaseline";
    case ErrorCode::TransportError:
      return "TransportError";
    case ErrorCode::MalformedToolCall:
      return "MalformedToolCall";
    case ErrorCode::SessionNotFound:
      return "SessionNotFound";
    case ErrorCode::SessionFull:
      return "SessionFull";
    case ErrorCode::BadToken:
      return "BadToken";
    case ErrorCode::NotYourTurn:
      return "NotYourTurn";
    case ErrorCode::DyadEjected:
      return "DyadEjected";
  }
  return "UnknownError";
}

}  // namespace mrcad
