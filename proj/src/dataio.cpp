#include "emg_affect/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <system_error>

#include "emg_affect/error.hpp"
#include "emg_affect/parallel.hpp"

namespace emg {

namespace {

constexpr std::string_view kSeparator = "---";
constexpr std::string_view kManifestMagic = "# emg-affect manifest v1";
constexpr std::string_view kMatrixMagic = "# emg-affect feature-matrix v1";
constexpr std::string_view kModelMagic = "emg-affect-model v";
constexpr std::string_view kKeyHeader = "t_ms,key";

/// Splits on '\n'. A trailing newline does not produce an empty last line.
std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(pos));
      break;
    }
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return lines;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  for (;;) {
    const auto at = text.find(sep, pos);
    if (at == std::string_view::npos) {
      out.push_back(text.substr(pos));
      return out;
    }
    out.push_back(text.substr(pos, at - pos));
    pos = at + 1;
  }
}

[[noreturn]] void parse_fail(std::size_t line, const std::string& message) {
  throw Error(ErrorCode::ParseError, message, line);
}

template <typename Int>
Int parse_int(std::string_view text, std::size_t line, std::string_view what) {
  Int value{};
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  if (text.empty() || text.front() == '+') {
    parse_fail(line, "bad " + std::string(what) + " '" + std::string(text) + "'");
  }
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    parse_fail(line, "bad " + std::string(what) + " '" + std::string(text) + "'");
  }
  return value;
}

// Identifiers end up inside CSV rows and file names.
void check_identifier(std::string_view id, std::size_t line) {
  if (id.empty()) parse_fail(line, "empty user id");
  for (char c : id) {
    if (c == ',' || c == '\n' || c == '\r' || c == '=' || c == '\t') {
      parse_fail(line, "user id contains a reserved character");
    }
  }
}

template <typename Fn>
auto rethrow_with_line(std::size_t line, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.line()) throw;
    throw Error(e.code(), e.detail(), line);
  }
}

}  // namespace

std::string format_real(double value) {
  if (!std::isfinite(value)) throw Error(ErrorCode::NonFinite, "cannot write a non-finite number");
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw Error(ErrorCode::IoError, "cannot format real");
  return std::string(buf, ptr);
}

double parse_real(std::string_view text, std::size_t line) {
  double value = 0.0;
  const auto* last = text.data() + text.size();
  if (text.empty() || text.front() == '+') parse_fail(line, "bad number '" + std::string(text) + "'");
  const auto [ptr, ec] = std::from_chars(text.data(), last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
    parse_fail(line, "bad number '" + std::string(text) + "'");
  }
  return value;
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::IoError, "read failed on '" + path.string() + "'");
  return buffer.str();
}

void write_text_file(const fs::path& path, std::string_view text, bool overwrite) {
  std::error_code ec;
  if (!overwrite && fs::exists(path, ec)) {
    throw Error(ErrorCode::IoError, "'" + path.string() + "' already exists");
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "write failed on '" + path.string() + "'");
}

// --- recordings ---

SampleSeries Recording::series() const {
  const std::int64_t offset = timestamps_ms.empty() ? 0 : timestamps_ms.front();
  return SampleSeries(meta.sample_rate_hz, values, offset);
}

Recording make_recording(const SampleSeries& series, RecordingMeta meta) {
  Recording rec;
  meta.sample_rate_hz = series.sample_rate_hz();
  rec.meta = std::move(meta);
  rec.values = series.samples();
  rec.timestamps_ms.reserve(series.size());
  const double step = 1000.0 / series.sample_rate_hz();
  std::int64_t prev = -1;
  for (std::size_t i = 0; i < series.size(); ++i) {
    auto t = series.start_offset_ms() + std::llround(static_cast<double>(i) * step);
    // Rates above 1 kHz would collide at ms resolution.
    if (t <= prev) t = prev + 1;
    rec.timestamps_ms.push_back(t);
    prev = t;
  }
  return rec;
}

Recording parse_recording(std::string_view text) {
  const auto lines = split_lines(text);
  Recording rec;
  std::set<std::string> seen;
  std::size_t i = 0;
  bool separated = false;
  for (; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const auto line = lines[i];
    if (line == kSeparator) {
      separated = true;
      ++i;
      break;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos || eq == 0) parse_fail(line_no, "expected key=value");
    const std::string key(line.substr(0, eq));
    const std::string value(line.substr(eq + 1));
    if (!seen.insert(key).second) parse_fail(line_no, "duplicate key '" + key + "'");
    if (value.find('\r') != std::string::npos) parse_fail(line_no, "carriage return in header");
    if (key == "user_id") {
      check_identifier(value, line_no);
      rec.meta.user_id = value;
    } else if (key == "condition") {
      rec.meta.condition = rethrow_with_line(line_no, [&] { return parse_condition(value); });
    } else if (key == "label") {
      rec.meta.label = rethrow_with_line(line_no, [&] { return parse_label(value); });
    } else if (key == "sample_rate_hz") {
      rec.meta.sample_rate_hz = parse_int<std::uint32_t>(value, line_no, "sample rate");
      if (rec.meta.sample_rate_hz == 0) parse_fail(line_no, "sample rate must be >= 1");
    } else if (key == "started_at") {
      if (value.empty()) parse_fail(line_no, "empty started_at");
      rec.meta.started_at = value;
    } else {
      rec.meta.extra.emplace(key, value);
    }
  }
  if (!separated) parse_fail(lines.size() + 1, "missing '---' header separator");
  for (const char* key : {"user_id", "condition", "label", "sample_rate_hz", "started_at"}) {
    if (!seen.count(key)) parse_fail(i, std::string("missing header key '") + key + "'");
  }

  std::int64_t prev = -1;
  for (; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const auto line = lines[i];
    const auto comma = line.find(',');
    if (comma == std::string_view::npos) parse_fail(line_no, "expected timestamp_ms,value");
    const auto t = parse_int<std::int64_t>(line.substr(0, comma), line_no, "timestamp");
    const auto v = parse_int<int>(line.substr(comma + 1), line_no, "sample value");
    if (t < 0) parse_fail(line_no, "negative timestamp");
    if (t <= prev) {
      throw Error(ErrorCode::NonMonotonicTimestamp,
                  std::to_string(t) + " after " + std::to_string(prev), line_no);
    }
    if (v < kAdcMin || v > kAdcMax) {
      throw Error(ErrorCode::ValueOutOfRange, std::to_string(v) + " outside [0, 999]", line_no);
    }
    rec.timestamps_ms.push_back(t);
    rec.values.push_back(v);
    prev = t;
  }
  return rec;
}

std::string format_recording(const Recording& rec) {
  if (rec.timestamps_ms.size() != rec.values.size()) {
    throw Error(ErrorCode::DimensionMismatch, "timestamps and values differ in length");
  }
  std::string out;
  out.reserve(64 + rec.values.size() * 12);
  out += "user_id=" + rec.meta.user_id + "\n";
  out += "condition=" + std::string(to_string(rec.meta.condition)) + "\n";
  out += "label=" + std::string(to_string(rec.meta.label)) + "\n";
  out += "sample_rate_hz=" + std::to_string(rec.meta.sample_rate_hz) + "\n";
  out += "started_at=" + rec.meta.started_at + "\n";
  for (const auto& [key, value] : rec.meta.extra) out += key + "=" + value + "\n";
  out += kSeparator;
  out += '\n';
  for (std::size_t i = 0; i < rec.values.size(); ++i) {
    out += std::to_string(rec.timestamps_ms[i]);
    out += ',';
    out += std::to_string(rec.values[i]);
    out += '\n';
  }
  return out;
}

Recording read_recording(const fs::path& path) { return parse_recording(read_text_file(path)); }

void write_recording(const Recording& recording, const fs::path& path, bool overwrite) {
  // Refuse to write anything the reader would reject.
  const auto text = format_recording(recording);
  parse_recording(text);
  write_text_file(path, text, overwrite);
}

// --- manifest ---

std::vector<ManifestEntry> parse_manifest(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty() || lines[0] != kManifestMagic) parse_fail(1, "missing manifest header");
  if (lines.size() < 2 || lines[1] != "path,user_id,condition,label") {
    parse_fail(2, "missing manifest column header");
  }
  std::vector<ManifestEntry> entries;
  std::set<std::string> paths;
  for (std::size_t i = 2; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const auto fields = split(lines[i], ',');
    if (fields.size() != 4) parse_fail(line_no, "expected 4 fields");
    ManifestEntry e;
    e.path = std::string(fields[0]);
    if (e.path.empty()) parse_fail(line_no, "empty path");
    if (!paths.insert(e.path).second) parse_fail(line_no, "duplicate path '" + e.path + "'");
    check_identifier(fields[1], line_no);
    e.user_id = std::string(fields[1]);
    e.condition = rethrow_with_line(line_no, [&] { return parse_condition(fields[2]); });
    e.label = rethrow_with_line(line_no, [&] { return parse_label(fields[3]); });
    entries.push_back(std::move(e));
  }
  return entries;
}

std::string format_manifest(const std::vector<ManifestEntry>& entries) {
  std::string out(kManifestMagic);
  out += "\npath,user_id,condition,label\n";
  for (const auto& e : entries) {
    out += e.path + "," + e.user_id + "," + std::string(to_string(e.condition)) + "," +
           std::string(to_string(e.label)) + "\n";
  }
  return out;
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  return parse_manifest(read_text_file(path));
}

void write_manifest(const std::vector<ManifestEntry>& entries, const fs::path& path,
                    bool overwrite) {
  write_text_file(path, format_manifest(entries), overwrite);
}

std::vector<CorpusRecording> load_corpus(const fs::path& manifest_path) {
  const auto entries = read_manifest(manifest_path);
  const auto base = manifest_path.parent_path();
  std::vector<CorpusRecording> corpus;
  corpus.reserve(entries.size());
  for (const auto& e : entries) {
    auto rec = read_recording(base / e.path);
    if (rec.meta.user_id != e.user_id || rec.meta.condition != e.condition ||
        rec.meta.label != e.label) {
      throw Error(ErrorCode::ManifestMismatch,
                  "'" + e.path + "' header says " + rec.meta.user_id + "/" +
                      std::string(to_string(rec.meta.condition)) + "/" +
                      std::string(to_string(rec.meta.label)));
    }
    corpus.push_back({e, std::move(rec)});
  }
  return corpus;
}

FeatureMatrix extract_corpus(const std::vector<CorpusRecording>& corpus,
                             const ExtractOptions& options, std::size_t jobs) {
  std::vector<FeatureVector> rows(corpus.size());
  parallel_for(corpus.size(), jobs, [&](std::size_t i) {
    const auto& c = corpus[i];
    try {
      rows[i] = extract_recording(c.recording.series(), c.entry.label,
                                  {c.entry.user_id, c.entry.condition}, options);
    } catch (const Error& e) {
      throw Error(e.code(), "'" + c.entry.path + "': " + e.detail());
    }
  });
  std::stable_sort(rows.begin(), rows.end(), provenance_less);
  return build_matrix(std::move(rows));
}

// --- feature matrix ---

FeatureMatrix parse_matrix(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty() || lines[0] != kMatrixMagic) parse_fail(1, "missing feature-matrix header");
  if (lines.size() < 2) parse_fail(2, "missing column header");
  const auto header = split(lines[1], ',');
  if (header.size() < 4 || header[0] != "user_id" || header[1] != "condition" ||
      header[2] != "label") {
    parse_fail(2, "bad column header");
  }
  const std::size_t width = header.size() - 3;
  for (std::size_t c = 0; c < width; ++c) {
    const auto label = rethrow_with_line(2, [&] { return parse_column_name(header[c + 3]); });
    if (!(label == column_label(c))) {
      parse_fail(2, "column " + std::to_string(c) + " should be " + column_name(column_label(c)));
    }
  }
  std::vector<FeatureVector> rows;
  for (std::size_t i = 2; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const auto fields = split(lines[i], ',');
    if (fields.size() != header.size()) {
      parse_fail(line_no, "expected " + std::to_string(header.size()) + " fields");
    }
    FeatureVector row;
    check_identifier(fields[0], line_no);
    row.provenance.user_id = std::string(fields[0]);
    row.provenance.condition = rethrow_with_line(line_no, [&] { return parse_condition(fields[1]); });
    row.label = rethrow_with_line(line_no, [&] { return parse_label(fields[2]); });
    row.values.reserve(width);
    for (std::size_t c = 0; c < width; ++c) row.values.push_back(parse_real(fields[c + 3], line_no));
    rows.push_back(std::move(row));
  }
  return rethrow_with_line(lines.size(), [&] { return build_matrix(std::move(rows)); });
}

std::string format_matrix(const FeatureMatrix& matrix) {
  std::string out(kMatrixMagic);
  out += "\nuser_id,condition,label";
  for (const auto& label : matrix.column_labels()) out += "," + column_name(label);
  out += '\n';
  for (const auto& row : matrix.row_data()) {
    out += row.provenance.user_id + "," + std::string(to_string(row.provenance.condition)) + "," +
           std::string(to_string(row.label));
    for (double v : row.values) out += "," + format_real(v);
    out += '\n';
  }
  return out;
}

FeatureMatrix read_matrix(const fs::path& path) { return parse_matrix(read_text_file(path)); }

void write_matrix(const FeatureMatrix& matrix, const fs::path& path, bool overwrite) {
  write_text_file(path, format_matrix(matrix), overwrite);
}

// --- model ---

namespace {

std::string join_reals(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += format_real(values[i]);
  }
  return out;
}

std::vector<double> parse_reals(std::string_view text, std::size_t line) {
  std::vector<double> out;
  if (text.empty()) return out;
  for (auto field : split(text, ',')) out.push_back(parse_real(field, line));
  return out;
}

}  // namespace

std::string format_model(const SvmModel& model) {
  const auto& norm = model.normalizer;
  std::string out(kModelMagic);
  out += std::to_string(kModelFormatVersion) + "\n";
  out += "input_dim=" + std::to_string(norm.input_dim) + "\n";
  out += "gamma=" + format_real(model.gamma) + "\n";
  out += "bias=" + format_real(model.bias) + "\n";
  out += "columns=";
  for (std::size_t i = 0; i < norm.columns.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(norm.columns[i]);
  }
  out += "\nmean=" + join_reals(norm.mean) + "\n";
  out += "sd=" + join_reals(norm.sd) + "\n";
  out += "support_vectors=" + std::to_string(model.support_vectors.size()) + "\n";
  for (std::size_t i = 0; i < model.support_vectors.size(); ++i) {
    out += "sv=" + format_real(model.dual_coefs[i]) + ";" + join_reals(model.support_vectors[i]) +
           "\n";
  }
  out += "end\n";
  return out;
}

SvmModel parse_model(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty() || lines[0].substr(0, kModelMagic.size()) != kModelMagic) {
    parse_fail(1, "not a model file");
  }
  const int version = parse_int<int>(lines[0].substr(kModelMagic.size()), 1, "model version");
  if (version != kModelFormatVersion) {
    throw Error(ErrorCode::VersionMismatch,
                "model format v" + std::to_string(version) + ", expected v" +
                    std::to_string(kModelFormatVersion),
                1);
  }

  SvmModel model;
  auto& norm = model.normalizer;
  const std::vector<std::string_view> keys = {"input_dim", "gamma", "bias", "columns",
                                              "mean",      "sd",    "support_vectors"};
  std::size_t sv_count = 0;
  for (std::size_t k = 0; k < keys.size(); ++k) {
    const std::size_t line_no = k + 2;
    if (line_no > lines.size()) parse_fail(line_no, "truncated model file");
    const auto line = lines[line_no - 1];
    const auto prefix = std::string(keys[k]) + "=";
    if (line.substr(0, prefix.size()) != prefix) parse_fail(line_no, "expected '" + prefix + "'");
    const auto value = line.substr(prefix.size());
    switch (k) {
      case 0: norm.input_dim = parse_int<std::size_t>(value, line_no, "input_dim"); break;
      case 1: model.gamma = parse_real(value, line_no); break;
      case 2: model.bias = parse_real(value, line_no); break;
      case 3:
        if (value.empty()) break;
        for (auto field : split(value, ',')) {
          norm.columns.push_back(parse_int<std::size_t>(field, line_no, "column index"));
        }
        break;
      case 4: norm.mean = parse_reals(value, line_no); break;
      case 5: norm.sd = parse_reals(value, line_no); break;
      case 6: sv_count = parse_int<std::size_t>(value, line_no, "support vector count"); break;
    }
  }
  if (!(model.gamma > 0.0)) parse_fail(3, "gamma must be positive");
  for (std::size_t i = 0; i < norm.columns.size(); ++i) {
    if (norm.columns[i] >= norm.input_dim || (i > 0 && norm.columns[i] <= norm.columns[i - 1])) {
      parse_fail(5, "columns must be increasing and below input_dim");
    }
  }
  if (norm.mean.size() != norm.columns.size()) parse_fail(6, "mean length mismatch");
  if (norm.sd.size() != norm.columns.size()) parse_fail(7, "sd length mismatch");
  for (double s : norm.sd) {
    if (s < 0.0) parse_fail(7, "negative sd");
  }

  const std::size_t first_sv = keys.size() + 2;
  if (lines.size() != first_sv - 1 + sv_count + 1) {
    parse_fail(std::min(lines.size(), first_sv - 1 + sv_count + 1),
               "expected " + std::to_string(sv_count) + " support vectors then 'end'");
  }
  for (std::size_t s = 0; s < sv_count; ++s) {
    const std::size_t line_no = first_sv + s;
    const auto line = lines[line_no - 1];
    if (line.substr(0, 3) != "sv=") parse_fail(line_no, "expected 'sv='");
    const auto body = line.substr(3);
    const auto semi = body.find(';');
    if (semi == std::string_view::npos) parse_fail(line_no, "expected '<coef>;<values>'");
    model.dual_coefs.push_back(parse_real(body.substr(0, semi), line_no));
    auto values = parse_reals(body.substr(semi + 1), line_no);
    if (values.size() != norm.columns.size()) parse_fail(line_no, "support vector length mismatch");
    model.support_vectors.push_back(std::move(values));
  }
  if (lines.back() != "end") parse_fail(lines.size(), "expected 'end'");
  return model;
}

SvmModel load_model(const fs::path& path) { return parse_model(read_text_file(path)); }

void save_model(const SvmModel& model, const fs::path& path, bool overwrite) {
  write_text_file(path, format_model(model), overwrite);
}

// --- key events ---

std::string format_key_events(const std::vector<KeyEvent>& events) {
  std::string out(kKeyHeader);
  out += '\n';
  for (const auto& e : events) {
    out += std::to_string(e.t_ms);
    out += ',';
    for (char c : e.key) {
      if (c == '\\') {
        out += "\\\\";
      } else if (c == '\n') {
        out += "\\n";
      } else {
        out += c;
      }
    }
    out += '\n';
  }
  return out;
}

std::vector<KeyEvent> parse_key_events(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty() || lines[0] != kKeyHeader) parse_fail(1, "missing key-event header");
  std::vector<KeyEvent> events;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const auto comma = lines[i].find(',');
    if (comma == std::string_view::npos) parse_fail(line_no, "expected t_ms,key");
    KeyEvent e;
    e.t_ms = parse_int<std::int64_t>(lines[i].substr(0, comma), line_no, "timestamp");
    const auto raw = lines[i].substr(comma + 1);
    for (std::size_t k = 0; k < raw.size(); ++k) {
      if (raw[k] != '\\') {
        e.key += raw[k];
        continue;
      }
      if (k + 1 >= raw.size()) parse_fail(line_no, "dangling escape");
      const char next = raw[++k];
      if (next == '\\') {
        e.key += '\\';
      } else if (next == 'n') {
        e.key += '\n';
      } else {
        parse_fail(line_no, "unknown escape");
      }
    }
    events.push_back(std::move(e));
  }
  return events;
}

}  // namespace emg
