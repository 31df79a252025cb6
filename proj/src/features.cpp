#include "emg_affect/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>
#include <unordered_set>

#include "emg_affect/error.hpp"

namespace emg {

namespace {
constexpr std::array<std::string_view, kFeatureKindCount> kNames = {
    "MAXP", "MAV", "MAVSLP", "PAAF", "RMS", "AAC", "DASDV", "WL"};

void require(std::span<const double> x, std::size_t minimum, std::string_view what) {
  if (x.size() >= minimum) return;
  const auto code = x.empty() && minimum == 1 ? ErrorCode::EmptySlot
                                              : ErrorCode::TooFewSamples;
  throw Error(code, std::string(what) + " needs at least " +
                        std::to_string(minimum) + " samples, got " +
                        std::to_string(x.size()));
}
}  // namespace

std::string_view to_string(FeatureKind kind) { return kNames.at(ordinal(kind)); }

FeatureKind parse_feature_kind(std::string_view text) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == text) return static_cast<FeatureKind>(i);
  }
  throw Error(ErrorCode::ParseError, "unknown feature '" + std::string(text) + "'");
}

namespace feature {

double maxp(std::span<const double> x) {
  require(x, 1, "MAXP");
  return *std::max_element(x.begin(), x.end());
}

double mav(std::span<const double> x) {
  require(x, 1, "MAV");
  double sum = 0.0;
  for (double v : x) sum += std::abs(v);
  return sum / static_cast<double>(x.size());
}

double mavslp(std::span<const double> x, std::size_t sub_segments) {
  if (sub_segments < 2) {
    throw Error(ErrorCode::InvalidConfig, "MAVSLP needs at least 2 sub-segments");
  }
  require(x, sub_segments, "MAVSLP");
  const auto parts = partition_slots(x.size(), sub_segments);
  // The mean of adjacent differences telescopes to (last - first) / (k - 1).
  const double first = mav(x.subspan(parts.slots.front().begin, parts.slots.front().size()));
  const double last = mav(x.subspan(parts.slots.back().begin, parts.slots.back().size()));
  return (last - first) / static_cast<double>(sub_segments - 1);
}

double paaf(std::span<const double> x) {
  require(x, 3, "PAAF");
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  std::size_t peaks = 0;
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    if (x[i] > x[i - 1] && x[i] > x[i + 1] && x[i] > mean) ++peaks;
  }
  return static_cast<double>(peaks);
}

double rms(std::span<const double> x) {
  require(x, 1, "RMS");
  double sum = 0.0;
  for (double v : x) sum += v * v;
  return std::sqrt(sum / static_cast<double>(x.size()));
}

double aac(std::span<const double> x) {
  require(x, 2, "AAC");
  double sum = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) sum += std::abs(x[i] - x[i - 1]);
  return sum / static_cast<double>(x.size() - 1);
}

// Derived from AAC so that wl == (N-1) * aac holds bit-for-bit; the two
// differ only by that scale. Within one ulp of the plain sum.
double wl(std::span<const double> x) {
  require(x, 2, "WL");
  return static_cast<double>(x.size() - 1) * aac(x);
}

double dasdv(std::span<const double> x) {
  require(x, 2, "DASDV");
  double sum = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double d = x[i] - x[i - 1];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(x.size() - 1));
}

double compute(FeatureKind kind, std::span<const double> x,
               std::size_t mavslp_segments) {
  switch (kind) {
    case FeatureKind::MAXP: return maxp(x);
    case FeatureKind::MAV: return mav(x);
    case FeatureKind::MAVSLP: return mavslp(x, mavslp_segments);
    case FeatureKind::PAAF: return paaf(x);
    case FeatureKind::RMS: return rms(x);
    case FeatureKind::AAC: return aac(x);
    case FeatureKind::DASDV: return dasdv(x);
    case FeatureKind::WL: return wl(x);
  }
  throw Error(ErrorCode::InvalidConfig, "unknown feature kind");
}

}  // namespace feature

std::string column_name(const ColumnLabel& label) {
  return "s" + std::to_string(label.slot) + "_" + std::string(to_string(label.kind));
}

ColumnLabel parse_column_name(std::string_view name) {
  const auto underscore = name.find('_');
  if (name.size() < 3 || name[0] != 's' || underscore == std::string_view::npos ||
      underscore == 1) {
    throw Error(ErrorCode::ParseError, "bad column name '" + std::string(name) + "'");
  }
  std::size_t slot = 0;
  for (char c : name.substr(1, underscore - 1)) {
    if (c < '0' || c > '9') {
      throw Error(ErrorCode::ParseError, "bad column name '" + std::string(name) + "'");
    }
    slot = slot * 10 + static_cast<std::size_t>(c - '0');
  }
  return {slot, parse_feature_kind(name.substr(underscore + 1))};
}

std::vector<std::string> FeatureMatrix::users() const {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& r : rows_) {
    if (seen.insert(r.provenance.user_id).second) out.push_back(r.provenance.user_id);
  }
  return out;
}

std::size_t FeatureMatrix::count(Label label) const {
  return static_cast<std::size_t>(std::count_if(
      rows_.begin(), rows_.end(), [label](const auto& r) { return r.label == label; }));
}

FeatureMatrix FeatureMatrix::subset(std::span<const std::size_t> indices) const {
  FeatureMatrix out;
  out.column_labels_ = column_labels_;
  out.rows_.reserve(indices.size());
  for (std::size_t i : indices) out.rows_.push_back(rows_.at(i));
  return out;
}

FeatureMatrix build_matrix(std::vector<FeatureVector> rows) {
  FeatureMatrix m;
  if (rows.empty()) return m;
  const std::size_t width = rows.front().values.size();
  if (width == 0 || width % kFeatureKindCount != 0) {
    throw Error(ErrorCode::RaggedRows,
                "row length " + std::to_string(width) + " is not a positive multiple of 8");
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].values.size() != width) {
      throw Error(ErrorCode::RaggedRows, "row " + std::to_string(i) + " has " +
                                             std::to_string(rows[i].values.size()) +
                                             " values, expected " + std::to_string(width));
    }
    for (double v : rows[i].values) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::NonFinite, "row " + std::to_string(i));
      }
    }
  }
  m.column_labels_.reserve(width);
  for (std::size_t c = 0; c < width; ++c) m.column_labels_.push_back(column_label(c));
  m.rows_ = std::move(rows);
  return m;
}

FeatureVector extract_row(const SampleSeries& series, const SlotPartition& partition,
                          Label label, Provenance provenance,
                          std::size_t mavslp_segments, bool center) {
  if (partition.slots.empty() || partition.covered() != series.size()) {
    throw Error(ErrorCode::DimensionMismatch, "partition does not cover the series");
  }
  std::vector<double> x(series.samples().begin(), series.samples().end());
  if (center && !x.empty()) {
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    for (double& v : x) v -= mean;
  }
  FeatureVector row;
  row.label = label;
  row.provenance = std::move(provenance);
  row.values.reserve(partition.slot_count() * kFeatureKindCount);
  const std::span<const double> all(x);
  for (const auto& slot : partition.slots) {
    const auto slice = all.subspan(slot.begin, slot.size());
    for (FeatureKind kind : kAllFeatureKinds) {
      row.values.push_back(feature::compute(kind, slice, mavslp_segments));
    }
  }
  return row;
}

FeatureVector extract_recording(const SampleSeries& raw, Label label,
                                Provenance provenance, const ExtractOptions& options) {
  const auto trimmed = trim_rest_windows(raw, options.head_s, options.tail_s);
  const auto partition = partition_slots(trimmed, options.slot_count);
  return extract_row(trimmed, partition, label, std::move(provenance),
                     options.mavslp_segments, options.center);
}

bool provenance_less(const FeatureVector& a, const FeatureVector& b) {
  return std::tie(a.provenance.user_id, a.provenance.condition, a.label) <
         std::tie(b.provenance.user_id, b.provenance.condition, b.label);
}

}  // namespace emg
