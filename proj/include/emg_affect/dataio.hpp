#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "emg_affect/features.hpp"
#include "emg_affect/signal.hpp"
#include "emg_affect/svm.hpp"
#include "emg_affect/types.hpp"

namespace emg {

namespace fs = std::filesystem;

// Recording file:
//
//   user_id=<id>
//   condition=fixed|open
//   label=relaxed|angry
//   sample_rate_hz=<int>
//   started_at=<UTC ISO-8601>
//   <extra key=value lines, sorted by key>
//   ---
//   <timestamp_ms>,<value>
//   ...
//
// Timestamps are ms since session start and strictly increasing; values are
// integers in [0, 999]. Lines end with a single '\n'.

struct RecordingMeta {
  std::string user_id;
  Condition condition = Condition::Fixed;
  Label label = Label::Relaxed;
  std::uint32_t sample_rate_hz = 200;
  std::string started_at = "1970-01-01T00:00:00Z";
  std::map<std::string, std::string> extra;

  friend bool operator==(const RecordingMeta&, const RecordingMeta&) = default;
};

struct Recording {
  RecordingMeta meta;
  std::vector<std::int64_t> timestamps_ms;
  std::vector<int> values;

  /// Series at the header rate, offset by the first timestamp.
  SampleSeries series() const;
  friend bool operator==(const Recording&, const Recording&) = default;
};

/// Timestamps derived from the series rate and start offset.
Recording make_recording(const SampleSeries& series, RecordingMeta meta);

Recording parse_recording(std::string_view text);
std::string format_recording(const Recording& recording);

/// Throws IoError when the file cannot be read, plus every parse error.
Recording read_recording(const fs::path& path);
/// Throws IoError when the path exists and overwrite is false.
void write_recording(const Recording& recording, const fs::path& path, bool overwrite = false);

// Manifest file:
//
//   # emg-affect manifest v1
//   path,user_id,condition,label
//   <relative path>,<user>,<condition>,<label>

struct ManifestEntry {
  std::string path;  // relative to the manifest's directory
  std::string user_id;
  Condition condition = Condition::Fixed;
  Label label = Label::Relaxed;
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

std::vector<ManifestEntry> parse_manifest(std::string_view text);
std::string format_manifest(const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const fs::path& path);
void write_manifest(const std::vector<ManifestEntry>& entries, const fs::path& path,
                    bool overwrite = false);

struct CorpusRecording {
  ManifestEntry entry;
  Recording recording;
};

/// Reads every manifest recording in manifest order. Throws
/// ManifestMismatch when a file header disagrees with its manifest line.
std::vector<CorpusRecording> load_corpus(const fs::path& manifest_path);

/// Extracts one row per recording, sorted by provenance.
FeatureMatrix extract_corpus(const std::vector<CorpusRecording>& corpus,
                             const ExtractOptions& options, std::size_t jobs = 1);

// Feature-matrix file:
//
//   # emg-affect feature-matrix v1
//   user_id,condition,label,s0_MAXP,...,s9_WL
//   <user>,<condition>,<label>,<value>,...

FeatureMatrix parse_matrix(std::string_view text);
std::string format_matrix(const FeatureMatrix& matrix);
FeatureMatrix read_matrix(const fs::path& path);
void write_matrix(const FeatureMatrix& matrix, const fs::path& path, bool overwrite = true);

// Model file: "emg-affect-model v1" followed by key=value lines and one
// "sv=<coef>;<v0>,<v1>,..." line per support vector, closed by "end".
// Reals are written as shortest round-trip decimals.

inline constexpr int kModelFormatVersion = 1;

SvmModel parse_model(std::string_view text);
std::string format_model(const SvmModel& model);
SvmModel load_model(const fs::path& path);
void save_model(const SvmModel& model, const fs::path& path, bool overwrite = true);

// Key-event sidecar: "t_ms,key" header, then one event per line. The key is
// escaped so that '\\' -> "\\\\" and '\n' -> "\\n".

struct KeyEvent {
  std::int64_t t_ms = 0;
  std::string key;
  friend bool operator==(const KeyEvent&, const KeyEvent&) = default;
};

std::string format_key_events(const std::vector<KeyEvent>& events);
std::vector<KeyEvent> parse_key_events(std::string_view text);

/// Shortest decimal that parses back to the same double.
std::string format_real(double value);
/// Strict full-string parse; rejects nan/inf. Throws ParseError.
double parse_real(std::string_view text, std::size_t line = 0);

std::string read_text_file(const fs::path& path);
void write_text_file(const fs::path& path, std::string_view text, bool overwrite);

}  // namespace emg
