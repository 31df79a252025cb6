#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace emg {

enum class ErrorCode {
  DurationTooShort,
  TooFewSamples,
  EmptySlot,
  RaggedRows,
  EmptyMatrix,
  SingleClass,
  NonFinite,
  DimensionMismatch,
  TooFewRows,
  TooFewUsers,
  KOutOfRange,
  BudgetExceeded,
  UnknownUser,
  IterationFailure,
  ParseError,
  ValueOutOfRange,
  NonMonotonicTimestamp,
  IoError,
  ManifestMismatch,
  VersionMismatch,
  InvalidConfig,
  InvalidPhase,
  UnknownSession,
  SourceUnavailable,
  SourceLost,
  FrameError,
};

std::string_view to_string(ErrorCode code);

/// Typed failure raised by every module. Readers attach the offending line.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> line = std::nullopt)
      : std::runtime_error(format(code, message, line)),
        code_(code),
        line_(line),
        detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> line() const noexcept { return line_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  static std::string format(ErrorCode code, const std::string& message,
                            std::optional<std::size_t> line);

  ErrorCode code_;
  std::optional<std::size_t> line_;
  std::string detail_;
};

}  // namespace emg
