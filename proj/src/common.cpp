#include <algorithm>
#include <cctype>
#include <string>

#include "emg_affect/error.hpp"
#include "emg_affect/types.hpp"

namespace emg {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DurationTooShort: return "DurationTooShort";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::EmptySlot: return "EmptySlot";
    case ErrorCode::RaggedRows: return "RaggedRows";
    case ErrorCode::EmptyMatrix: return "EmptyMatrix";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::TooFewRows: return "TooFewRows";
    case ErrorCode::TooFewUsers: return "TooFewUsers";
    case ErrorCode::KOutOfRange: return "KOutOfRange";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::UnknownUser: return "UnknownUser";
    case ErrorCode::IterationFailure: return "IterationFailure";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValueOutOfRange: return "ValueOutOfRange";
    case ErrorCode::NonMonotonicTimestamp: return "NonMonotonicTimestamp";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ManifestMismatch: return "ManifestMismatch";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidPhase: return "InvalidPhase";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::SourceUnavailable: return "SourceUnavailable";
    case ErrorCode::SourceLost: return "SourceLost";
    case ErrorCode::FrameError: return "FrameError";
  }
  return "Unknown";
}

std::string Error::format(ErrorCode code, const std::string& message,
                          std::optional<std::size_t> line) {
  std::string out(to_string(code));
  if (line) out += " (line " + std::to_string(*line) + ")";
  if (!message.empty()) out += ": " + message;
  return out;
}

std::string_view to_string(Label label) {
  return label == Label::Angry ? "angry" : "relaxed";
}

std::string_view to_string(Condition condition) {
  return condition == Condition::Open ? "open" : "fixed";
}

namespace {
std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}
}  // namespace

Label parse_label(std::string_view text) {
  const std::string s = lower(text);
  if (s == "angry") return Label::Angry;
  if (s == "relaxed") return Label::Relaxed;
  throw Error(ErrorCode::ParseError, "unknown label '" + std::string(text) + "'");
}

Condition parse_condition(std::string_view text) {
  const std::string s = lower(text);
  if (s == "fixed") return Condition::Fixed;
  if (s == "open") return Condition::Open;
  throw Error(ErrorCode::ParseError,
              "unknown condition '" + std::string(text) + "'");
}

}  // namespace emg
