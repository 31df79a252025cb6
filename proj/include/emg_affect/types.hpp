#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace emg {

/// Class label. Angry is the positive class (+1) everywhere.
enum class Label { Relaxed, Angry };

/// Typing protocol the recording was captured under.
enum class Condition { Fixed, Open };

std::string_view to_string(Label label);
std::string_view to_string(Condition condition);

// Case-insensitive; throw Error{ParseError} on unknown names.
Label parse_label(std::string_view text);
Condition parse_condition(std::string_view text);

inline int label_sign(Label label) { return label == Label::Angry ? 1 : -1; }

/// Where a feature row came from.
struct Provenance {
  std::string user_id;
  Condition condition = Condition::Fixed;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

}  // namespace emg
