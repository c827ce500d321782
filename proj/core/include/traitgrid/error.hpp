#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace traitgrid {

enum class ErrorCode {
  InvalidSpec,
  DuplicateCommand,
  LevelFinished,
  UnknownRegion,
  UnknownPlayer,
  SelectionLocked,
  MissingCanonicalLevel,
  NoVariant,
  OutOfOrder,
  IncompleteLog,
  ParamMismatch,
  EmptyPopulation,
  DuplicateParticipant,
  BadConfig,
  OutOfSeq,
  IllegalState,
  IncompleteSession,
  UnknownSession,
  UnknownPersona,
  ParseError,
};

std::string_view to_string(ErrorCode code);

// All library failures surface as this one exception type; callers branch on
// code(). The CLI maps every code to exit status 1 (validation).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace traitgrid
