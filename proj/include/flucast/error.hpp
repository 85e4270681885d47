#pragma once

#include <stdexcept>
#include <string>

namespace flucast {

enum class ErrorCode {
  SchemaError,
  MissingWeek,
  UnknownZip,
  TooFewZips,
  DegenerateInput,
  InsufficientHistory,
  NonFiniteEta,
  LengthMismatch,
  EmptyErrors,
  TooFewResiduals,
  GroupTooSmall,
  DegenerateMatrix,
  RankDeficient,
  InvalidArgument,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void throw_error(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace flucast
