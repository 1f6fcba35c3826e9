#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace apksecrets {

enum class ErrorCode {
  IoError,
  NotAnArchive,
  BadMagic,
  TruncatedFile,
  OffsetOutOfBounds,
  ClassNotFound,
  EmptyString,
  ProviderError,
  MalformedResponse,
  RuleParseError,
  GroundTruthParseError,
  ReportParseError,
  NoFindings,
  InvalidParams,
  ConfigError,
  HashMismatch,
};

std::string_view to_string(ErrorCode code);

// Every fatal condition raised by the library. Warning-level conditions
// (missing dex, checksum mismatch, malformed chunks) are reported as status
// fields on the returned values instead.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace apksecrets
