// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mrcad {

enum class ErrorCode {
  // cad-core
  UnresolvedReference,
  DegenerateResult,
  DegenerateCurve,
  OutOfBounds,
  InvalidDesign,
  // message
  ParseError,
  UnsupportedCommand,
  // game-engine
  ModalityViolation,
  CharLimitExceeded,
  RoundLimitExceeded,
  TimeExhausted,
  EmptyMessage,
  GameFinished,
  UnknownPreset,
  InvalidConfig,
  AgentError,
  // dataset-io
  DegenerateBoundingBox,
  SchemaError,
  // eval-harness
  ZeroBaseline,
  TransportError,
  MalformedToolCall,
  // server
  SessionNotFound,
  SessionFull,
  BadToken,
  NotYourTurn,
  DyadEjected,
};

std::string_view to_string(ErrorCode code);

/// Error raised by every mrcad operation. The code is stable and
/// machine-readable; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mrcad
