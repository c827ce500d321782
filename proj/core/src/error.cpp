#include "traitgrid/error.hpp"

namespace traitgrid {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::DuplicateCommand: return "DuplicateCommand";
    case ErrorCode::LevelFinished: return "LevelFinished";
    case ErrorCode::UnknownRegion: return "UnknownRegion";
    case ErrorCode::UnknownPlayer: return "UnknownPlayer";
    case ErrorCode::SelectionLocked: return "SelectionLocked";
    case ErrorCode::MissingCanonicalLevel: return "MissingCanonicalLevel";
    case ErrorCode::NoVariant: return "NoVariant";
    case ErrorCode::OutOfOrder: return "OutOfOrder";
    case ErrorCode::IncompleteLog: return "IncompleteLog";
    case ErrorCode::ParamMismatch: return "ParamMismatch";
    case ErrorCode::EmptyPopulation: return "EmptyPopulation";
    case ErrorCode::DuplicateParticipant: return "DuplicateParticipant";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::OutOfSeq: return "OutOfSeq";
    case ErrorCode::IllegalState: return "IllegalState";
    case ErrorCode::IncompleteSession: return "IncompleteSession";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::UnknownPersona: return "UnknownPersona";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

}  // namespace traitgrid
