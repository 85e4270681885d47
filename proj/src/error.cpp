#include "flucast/error.hpp"

namespace flucast {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::MissingWeek: return "MissingWeek";
    case ErrorCode::UnknownZip: return "UnknownZip";
    case ErrorCode::TooFewZips: return "TooFewZips";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::InsufficientHistory: return "InsufficientHistory";
    case ErrorCode::NonFiniteEta: return "NonFiniteEta";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyErrors: return "EmptyErrors";
    case ErrorCode::TooFewResiduals: return "TooFewResiduals";
    case ErrorCode::GroupTooSmall: return "GroupTooSmall";
    case ErrorCode::DegenerateMatrix: return "DegenerateMatrix";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "UnknownError";
}

}  // namespace flucast
