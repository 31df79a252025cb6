#include "emg_affect/session.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>

#include "emg_affect/error.hpp"

namespace emg {

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::Created: return "created";
    case Phase::PreRest: return "pre_rest";
    case Phase::Typing: return "typing";
    case Phase::PostRest: return "post_rest";
    case Phase::Finished: return "finished";
    case Phase::Aborted: return "aborted";
  }
  return "unknown";
}

void SessionConfig::validate() const {
  auto bad = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, m); };
  if (user_id.empty()) bad("user_id is required");
  for (char c : user_id) {
    if (c == ',' || c == '=' || c == '\n' || c == '\r' || c == '/' || c == '\\' || c == '\t') {
      bad("user_id contains a reserved character");
    }
  }
  if (condition == Condition::Fixed && script_text.empty()) bad("fixed mode needs script_text");
  if (!(typing_limit_s > 0.0)) bad("typing_limit_s must be positive");
  if (!(fixed_cap_s > 0.0)) bad("fixed_cap_s must be positive");
  if (!(pre_rest_s >= 0.0) || !(post_rest_s >= 0.0)) bad("rest windows must be non-negative");
  if (source.sample_rate_hz == 0) bad("sample_rate_hz must be >= 1");
  if (source.kind == SourceSpec::Kind::Serial && source.port.empty()) bad("serial source needs a port");
}

namespace {

std::int64_t to_ms(double seconds) { return std::llround(seconds * 1000.0); }

std::string utc_now_iso8601() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void pop_utf8(std::string& s) {
  if (s.empty()) return;
  std::size_t i = s.size() - 1;
  while (i > 0 && (static_cast<unsigned char>(s[i]) & 0xC0) == 0x80) --i;
  s.erase(i);
}

}  // namespace

Session::Session(std::string id, SessionConfig config, std::unique_ptr<SampleSource> source)
    : id_(std::move(id)),
      config_(std::move(config)),
      source_(std::move(source)),
      pre_rest_ms_(to_ms(config_.pre_rest_s)),
      post_rest_ms_(to_ms(config_.post_rest_s)) {
  if (!source_) throw Error(ErrorCode::SourceUnavailable, "no sample source");
  config_.source.sample_rate_hz = source_->sample_rate_hz();
}

void Session::start(std::int64_t now_ms) {
  std::lock_guard lock(mutex_);
  if (phase_ != Phase::Created) {
    throw Error(ErrorCode::InvalidPhase, "session " + id_ + " is " + std::string(to_string(phase_)));
  }
  start_ms_ = now_ms;
  elapsed_ms_ = 0;
  abort_reason_.clear();
  enter(Phase::PreRest, 0);
  started_at_ = utc_now_iso8601();
  advance_locked(now_ms);
}

void Session::enter(Phase phase, std::int64_t at_elapsed_ms) {
  phase_ = phase;
  phase_entered_ms_ = at_elapsed_ms;
}

std::int64_t Session::typing_deadline_ms() const {
  const double limit = config_.condition == Condition::Open ? config_.typing_limit_s
                                                            : config_.fixed_cap_s;
  return pre_rest_ms_ + to_ms(limit);
}

void Session::collect(std::int64_t until_elapsed_ms) {
  const auto frames = source_->pull(until_elapsed_ms);
  const double period_ms = 1000.0 / source_->sample_rate_hz();
  const std::int64_t end = phase_ == Phase::PostRest ? typing_end_ms_ + post_rest_ms_ : -1;
  for (const auto& f : frames) {
    const auto t = std::llround(static_cast<double>(frame_index_) * period_ms);
    ++frame_index_;
    if (end >= 0 && t >= end) continue;
    if (!f) {
      ++gaps_;
      continue;
    }
    if (!timestamps_.empty() && t <= timestamps_.back()) continue;
    timestamps_.push_back(t);
    samples_.push_back(*f);
  }
}

void Session::advance_locked(std::int64_t now_ms) {
  if (phase_ == Phase::Created || phase_ == Phase::Finished || phase_ == Phase::Aborted) return;
  const std::int64_t target = std::max(elapsed_ms_, now_ms - start_ms_);
  try {
    for (;;) {
      if (phase_ == Phase::PreRest && target >= pre_rest_ms_) {
        collect(pre_rest_ms_);
        enter(Phase::Typing, pre_rest_ms_);
      } else if (phase_ == Phase::Typing && target >= typing_deadline_ms()) {
        const auto deadline = typing_deadline_ms();
        collect(deadline);
        typing_end_ms_ = deadline;
        enter(Phase::PostRest, deadline);
      } else if (phase_ == Phase::PostRest && target >= typing_end_ms_ + post_rest_ms_) {
        const auto end = typing_end_ms_ + post_rest_ms_;
        collect(end);
        enter(Phase::Finished, end);
        elapsed_ms_ = end;
        return;
      } else {
        break;
      }
    }
    collect(target);
    elapsed_ms_ = target;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::SourceLost) throw;
    elapsed_ms_ = target;
    abort_reason_ = std::string(to_string(ErrorCode::SourceLost)) + ": " + e.detail();
    enter(Phase::Aborted, target);
  }
}

void Session::advance(std::int64_t now_ms) {
  std::lock_guard lock(mutex_);
  advance_locked(now_ms);
}

void Session::key_event(std::int64_t now_ms, const KeyInput& input) {
  std::lock_guard lock(mutex_);
  advance_locked(now_ms);
  if (phase_ != Phase::Typing) {
    throw Error(ErrorCode::InvalidPhase,
                "keystrokes are accepted only while typing (phase " + std::string(to_string(phase_)) + ")");
  }
  if (input.text) {
    typed_ = *input.text;
  } else if (input.key == "Backspace") {
    pop_utf8(typed_);
  } else if (input.key == "Enter") {
    typed_ += '\n';
  } else {
    typed_ += input.key;
  }
  keys_.push_back({elapsed_ms_, input.key.empty() && input.text ? std::string("<text>") : input.key});

  if (config_.condition == Condition::Fixed && typed_ == config_.script_text) {
    typing_end_ms_ = elapsed_ms_;
    enter(Phase::PostRest, elapsed_ms_);
  }
}

void Session::abort(std::int64_t now_ms, const std::string& reason) {
  std::lock_guard lock(mutex_);
  advance_locked(now_ms);
  if (phase_ == Phase::Finished || phase_ == Phase::Aborted) return;
  abort_reason_ = reason;
  enter(Phase::Aborted, elapsed_ms_);
}

double Session::remaining_locked() const {
  std::int64_t end = 0;
  switch (phase_) {
    case Phase::PreRest: end = pre_rest_ms_; break;
    case Phase::Typing: end = typing_deadline_ms(); break;
    case Phase::PostRest: end = typing_end_ms_ + post_rest_ms_; break;
    default: return 0.0;
  }
  return static_cast<double>(std::max<std::int64_t>(0, end - elapsed_ms_)) / 1000.0;
}

SessionSnapshot Session::snapshot_locked() const {
  SessionSnapshot s;
  s.id = id_;
  s.phase = phase_;
  s.elapsed_ms = elapsed_ms_;
  s.phase_entered_at_ms = phase_entered_ms_;
  s.remaining_s = remaining_locked();
  s.samples = samples_.size();
  s.gaps = gaps_;
  s.keystrokes = keys_.size();
  s.typed_text = typed_;
  s.abort_reason = abort_reason_;
  if (recording_path_) s.recording_path = recording_path_->string();
  return s;
}

SessionSnapshot Session::snapshot(std::int64_t now_ms) {
  std::lock_guard lock(mutex_);
  advance_locked(now_ms);
  return snapshot_locked();
}

StreamFrame Session::frame_since(std::int64_t now_ms, std::size_t cursor, std::size_t max_values) {
  std::lock_guard lock(mutex_);
  advance_locked(now_ms);
  StreamFrame frame;
  frame.phase = phase_;
  frame.remaining_s = remaining_locked();
  frame.t_ms = elapsed_ms_;
  cursor = std::min(cursor, samples_.size());
  const std::size_t fresh = samples_.size() - cursor;
  const std::size_t stride = max_values == 0 ? 1 : std::max<std::size_t>(1, (fresh + max_values - 1) / max_values);
  for (std::size_t i = cursor; i < samples_.size(); i += stride) frame.values.push_back(samples_[i]);
  if (fresh > 0) frame.t_ms = timestamps_.back();
  frame.next_cursor = samples_.size();
  return frame;
}

Recording Session::recording_locked() const {
  Recording rec;
  rec.meta.user_id = config_.user_id;
  rec.meta.condition = config_.condition;
  rec.meta.label = config_.target_label;
  rec.meta.sample_rate_hz = source_->sample_rate_hz();
  rec.meta.started_at = started_at_.empty() ? "1970-01-01T00:00:00Z" : started_at_;
  rec.meta.extra["session_id"] = id_;
  rec.meta.extra["source"] = source_->describe();
  rec.meta.extra["gap_count"] = std::to_string(gaps_);
  rec.meta.extra["typing_start_ms"] = std::to_string(pre_rest_ms_);
  rec.meta.extra["typing_end_ms"] = std::to_string(typing_end_ms_);
  rec.meta.extra["end_ms"] = std::to_string(typing_end_ms_ + post_rest_ms_);
  rec.timestamps_ms = timestamps_;
  rec.values = samples_;
  return rec;
}

Recording Session::recording() const {
  std::lock_guard lock(mutex_);
  return recording_locked();
}

std::filesystem::path Session::finish(const std::filesystem::path& out_dir, std::int64_t now_ms) {
  std::lock_guard lock(mutex_);
  advance_locked(now_ms);
  if (recording_path_) return *recording_path_;
  if (phase_ != Phase::Finished) {
    throw Error(ErrorCode::InvalidPhase, "session " + id_ + " is " + std::string(to_string(phase_)));
  }
  const std::string stem = config_.user_id + "_" + std::string(to_string(config_.condition)) + "_" +
                           std::string(to_string(config_.target_label)) + "_" + id_;
  const auto path = out_dir / (stem + ".csv");
  write_recording(recording_locked(), path);
  write_text_file(out_dir / (stem + ".keys.csv"), format_key_events(keys_), false);
  recording_path_ = path;
  return path;
}

SessionManager::SessionManager(const Clock& clock, std::filesystem::path out_dir)
    : clock_(clock), out_dir_(std::move(out_dir)) {}

std::string SessionManager::create(const SessionConfig& config) {
  config.validate();
  SessionConfig cfg = config;
  cfg.source.profile.label = cfg.target_label;
  return create(cfg, make_source(cfg.source));
}

std::string SessionManager::create(const SessionConfig& config,
                                   std::unique_ptr<SampleSource> source) {
  config.validate();
  std::lock_guard lock(mutex_);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "s%04llu", static_cast<unsigned long long>(next_id_++));
  std::string id(buf);
  sessions_.emplace(id, std::make_shared<Session>(id, config, std::move(source)));
  return id;
}

std::shared_ptr<Session> SessionManager::get(const std::string& id) {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "no session '" + id + "'");
  return it->second;
}

void SessionManager::start(const std::string& id) { get(id)->start(clock_.now_ms()); }

void SessionManager::key_event(const std::string& id, const KeyInput& input) {
  get(id)->key_event(clock_.now_ms(), input);
}

std::filesystem::path SessionManager::finish(const std::string& id) {
  return get(id)->finish(out_dir_, clock_.now_ms());
}

SessionSnapshot SessionManager::snapshot(const std::string& id) {
  return get(id)->snapshot(clock_.now_ms());
}

StreamFrame SessionManager::frame_since(const std::string& id, std::size_t cursor) {
  return get(id)->frame_since(clock_.now_ms(), cursor);
}

void SessionManager::tick() {
  std::vector<std::shared_ptr<Session>> all;
  {
    std::lock_guard lock(mutex_);
    for (const auto& [id, s] : sessions_) all.push_back(s);
  }
  const auto now = clock_.now_ms();
  for (const auto& s : all) s->advance(now);
}

}  // namespace emg
