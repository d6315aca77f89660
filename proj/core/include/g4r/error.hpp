#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace g4r {

enum class ErrorCode {
  NotFound,
  UnknownInterface,
  InvalidArgument,
  InvalidEmail,
  DuplicateEmail,
  WeakPassword,
  AuthFailed,
  SequenceGap,
  MalformedInput,
  MissingKeyColumn,
  DuplicateSurveyKey,
  Storage,
  Crypto,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Base exception for every failure the core library reports.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace g4r
