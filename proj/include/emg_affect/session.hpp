#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "emg_affect/dataio.hpp"
#include "emg_affect/sources.hpp"
#include "emg_affect/types.hpp"

namespace emg {

/// Millisecond clock; sessions never read wall time directly.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::int64_t now_ms() const = 0;
};

class SteadyClock final : public Clock {
 public:
  std::int64_t now_ms() const override {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
  }
};

class ManualClock final : public Clock {
 public:
  std::int64_t now_ms() const override { return now_.load(); }
  void set(std::int64_t t) { now_.store(t); }
  void advance(std::int64_t dt) { now_.fetch_add(dt); }

 private:
  std::atomic<std::int64_t> now_{0};
};

enum class Phase { Created, PreRest, Typing, PostRest, Finished, Aborted };
std::string_view to_string(Phase phase);

struct SessionConfig {
  std::string user_id;
  Condition condition = Condition::Fixed;
  Label target_label = Label::Relaxed;
  std::string script_text;
  double typing_limit_s = 60.0;  // Open mode duration
  double fixed_cap_s = 300.0;    // Fixed mode hard cap
  double pre_rest_s = 10.0;
  double post_rest_s = 5.0;
  SourceSpec source;

  /// Throws InvalidConfig.
  void validate() const;
};

/// A keystroke as sent by the client. `key` is a printable character,
/// "Backspace" or "Enter"; `text`, when present, replaces the whole typed
/// buffer (the client's text area contents).
struct KeyInput {
  std::string key;
  std::optional<std::string> text;
};

struct SessionSnapshot {
  std::string id;
  Phase phase = Phase::Created;
  std::int64_t elapsed_ms = 0;
  std::int64_t phase_entered_at_ms = 0;  // relative to start
  double remaining_s = 0.0;              // in the current phase; 0 if open-ended
  std::size_t samples = 0;
  std::size_t gaps = 0;
  std::size_t keystrokes = 0;
  std::string typed_text;
  std::string abort_reason;
  std::optional<std::string> recording_path;
};

/// Display batch for live subscribers.
struct StreamFrame {
  std::int64_t t_ms = 0;
  std::vector<int> values;
  Phase phase = Phase::Created;
  double remaining_s = 0.0;
  std::size_t next_cursor = 0;
};

/// One capture session: pre-rest, typing, post-rest. Phase changes are
/// driven by the times passed to advance(); every public call serialises on
/// the session's own lock.
class Session {
 public:
  Session(std::string id, SessionConfig config, std::unique_ptr<SampleSource> source);

  const std::string& id() const { return id_; }
  const SessionConfig& config() const { return config_; }

  void start(std::int64_t now_ms);
  void advance(std::int64_t now_ms);
  void key_event(std::int64_t now_ms, const KeyInput& input);
  void abort(std::int64_t now_ms, const std::string& reason);

  /// Writes the recording (full span, rest windows included) and a
  /// ".keys.csv" sidecar into out_dir. Requires Finished; repeated calls
  /// return the same path.
  std::filesystem::path finish(const std::filesystem::path& out_dir, std::int64_t now_ms);

  SessionSnapshot snapshot(std::int64_t now_ms);
  /// Samples from `cursor` on, decimated to at most `max_values` for display.
  StreamFrame frame_since(std::int64_t now_ms, std::size_t cursor, std::size_t max_values = 50);

  /// Assembled recording; valid once Finished.
  Recording recording() const;

 private:
  void advance_locked(std::int64_t now_ms);
  void enter(Phase phase, std::int64_t at_elapsed_ms);
  void collect(std::int64_t until_elapsed_ms);
  std::int64_t typing_deadline_ms() const;
  double remaining_locked() const;
  SessionSnapshot snapshot_locked() const;
  Recording recording_locked() const;

  std::string id_;
  SessionConfig config_;
  std::unique_ptr<SampleSource> source_;
  mutable std::mutex mutex_;

  Phase phase_ = Phase::Created;
  std::int64_t start_ms_ = 0;      // clock value at start
  std::int64_t elapsed_ms_ = 0;
  std::int64_t phase_entered_ms_ = 0;
  std::int64_t pre_rest_ms_;
  std::int64_t post_rest_ms_;
  std::int64_t typing_end_ms_ = -1;

  std::uint64_t frame_index_ = 0;
  std::vector<std::int64_t> timestamps_;
  std::vector<int> samples_;
  std::size_t gaps_ = 0;
  std::vector<KeyEvent> keys_;
  std::string typed_;
  std::string abort_reason_;
  std::string started_at_;
  std::optional<std::filesystem::path> recording_path_;
};

/// Owns all sessions and routes API calls to them at the clock's time.
class SessionManager {
 public:
  SessionManager(const Clock& clock, std::filesystem::path out_dir);

  /// Throws InvalidConfig or SourceUnavailable.
  std::string create(const SessionConfig& config);
  /// For tests and custom devices.
  std::string create(const SessionConfig& config, std::unique_ptr<SampleSource> source);

  void start(const std::string& id);
  void key_event(const std::string& id, const KeyInput& input);
  std::filesystem::path finish(const std::string& id);
  SessionSnapshot snapshot(const std::string& id);
  StreamFrame frame_since(const std::string& id, std::size_t cursor);
  std::shared_ptr<Session> get(const std::string& id);

  /// Advances every session to the current clock time.
  void tick();

  const std::filesystem::path& out_dir() const { return out_dir_; }

 private:
  const Clock& clock_;
  std::filesystem::path out_dir_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 1;
};

}  // namespace emg
