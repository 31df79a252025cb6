#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "emg_affect/signal.hpp"
#include "emg_affect/types.hpp"

namespace emg {

/// Time-domain features in their fixed column order. The ordinal of each
/// kind is its offset inside a slot block: column = slot * 8 + ordinal.
enum class FeatureKind : std::size_t {
  MAXP = 0,    // maximum peak
  MAV = 1,     // mean absolute value
  MAVSLP = 2,  // mean absolute value slope
  PAAF = 3,    // peaks above average
  RMS = 4,
  AAC = 5,     // average amplitude change
  DASDV = 6,   // difference absolute standard deviation value
  WL = 7,      // waveform length
};

inline constexpr std::size_t kFeatureKindCount = 8;
inline constexpr std::array<FeatureKind, kFeatureKindCount> kAllFeatureKinds = {
    FeatureKind::MAXP, FeatureKind::MAV,  FeatureKind::MAVSLP, FeatureKind::PAAF,
    FeatureKind::RMS,  FeatureKind::AAC,  FeatureKind::DASDV,  FeatureKind::WL};

std::string_view to_string(FeatureKind kind);
FeatureKind parse_feature_kind(std::string_view text);

constexpr std::size_t ordinal(FeatureKind kind) {
  return static_cast<std::size_t>(kind);
}

namespace feature {

// Slot extractors. Each throws EmptySlot or TooFewSamples below its minimum
// length (1 for maxp/mav/rms, 2 for the difference-based ones, 3 for paaf).
double maxp(std::span<const double> x);
double mav(std::span<const double> x);
/// MAVs of sub_segments equal parts (remainder to the last); returns the
/// mean of adjacent differences.
double mavslp(std::span<const double> x, std::size_t sub_segments = 3);
/// Count of strict local maxima lying above the slot mean.
double paaf(std::span<const double> x);
double rms(std::span<const double> x);
double aac(std::span<const double> x);
double dasdv(std::span<const double> x);
double wl(std::span<const double> x);

double compute(FeatureKind kind, std::span<const double> x,
               std::size_t mavslp_segments = 3);

}  // namespace feature

/// One labelled row, slot-major.
struct FeatureVector {
  std::vector<double> values;
  Label label = Label::Relaxed;
  Provenance provenance;
};

struct ColumnLabel {
  std::size_t slot = 0;
  FeatureKind kind = FeatureKind::MAXP;
  friend bool operator==(const ColumnLabel&, const ColumnLabel&) = default;
};

std::string column_name(const ColumnLabel& label);  // e.g. "s3_RMS"
ColumnLabel parse_column_name(std::string_view name);

inline std::size_t column_index(std::size_t slot, FeatureKind kind) {
  return slot * kFeatureKindCount + ordinal(kind);
}
inline ColumnLabel column_label(std::size_t column) {
  return {column / kFeatureKindCount,
          static_cast<FeatureKind>(column % kFeatureKindCount)};
}

/// Rows plus the (slot, kind) label of every column.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;

  std::size_t rows() const { return rows_.size(); }
  std::size_t cols() const { return column_labels_.size(); }
  std::size_t slot_count() const { return cols() / kFeatureKindCount; }

  const std::vector<FeatureVector>& row_data() const { return rows_; }
  const FeatureVector& row(std::size_t i) const { return rows_.at(i); }
  const std::vector<ColumnLabel>& column_labels() const { return column_labels_; }

  /// Distinct user ids in first-appearance order.
  std::vector<std::string> users() const;
  std::size_t count(Label label) const;

  /// Rows selected by index, in the given order.
  FeatureMatrix subset(std::span<const std::size_t> indices) const;

 private:
  friend FeatureMatrix build_matrix(std::vector<FeatureVector> rows);
  std::vector<FeatureVector> rows_;
  std::vector<ColumnLabel> column_labels_;
};

/// Throws RaggedRows when rows differ in length (or are not a multiple of
/// eight) and NonFinite on NaN/inf values.
FeatureMatrix build_matrix(std::vector<FeatureVector> rows);

struct ExtractOptions {
  double head_s = 10.0;
  double tail_s = 5.0;
  std::size_t slot_count = 10;
  std::size_t mavslp_segments = 3;
  bool center = false;  // subtract the trimmed recording's mean first
};

/// Features of an already-trimmed series under a given partition.
FeatureVector extract_row(const SampleSeries& series, const SlotPartition& partition,
                          Label label, Provenance provenance,
                          std::size_t mavslp_segments = 3, bool center = false);

/// Trim, partition and extract in one step.
FeatureVector extract_recording(const SampleSeries& raw, Label label,
                                Provenance provenance,
                                const ExtractOptions& options = {});

/// Sort key used when rows are assembled: user, then condition, then label.
bool provenance_less(const FeatureVector& a, const FeatureVector& b);

}  // namespace emg
