#include <doctest.h>

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <httplib.h>
#include <json.hpp>

#include "emg_affect/dataio.hpp"
#include "emg_affect/error.hpp"
#include "emg_affect/server.hpp"
#include "emg_affect/session.hpp"
#include "emg_affect/sources.hpp"
#include "support.hpp"

using namespace emg;
using nlohmann::json;

namespace {

template <class Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an emg::Error");
  return ErrorCode::ParseError;
}

SessionConfig open_config(const std::string& user = "u1") {
  SessionConfig c;
  c.user_id = user;
  c.condition = Condition::Open;
  c.target_label = Label::Angry;
  c.source.kind = SourceSpec::Kind::Simulator;
  c.source.sample_rate_hz = 200;
  return c;
}

void run_until(ManualClock& clock, SessionManager& mgr, std::int64_t until_ms, std::int64_t step = 37) {
  while (clock.now_ms() < until_ms) {
    clock.advance(std::min(step, until_ms - clock.now_ms()));
    mgr.tick();
  }
}

}  // namespace

TEST_CASE("serial frame parsing") {
  CHECK(parse_serial_frame("512\r") == 512);
  CHECK(parse_serial_frame("0") == 0);
  CHECK(parse_serial_frame("999") == 999);
  CHECK(code_of([] { parse_serial_frame("abc"); }) == ErrorCode::FrameError);
  CHECK(code_of([] { parse_serial_frame("1000"); }) == ErrorCode::FrameError);
  CHECK(code_of([] { parse_serial_frame(""); }) == ErrorCode::FrameError);
  CHECK(code_of([] { parse_serial_frame("-1"); }) == ErrorCode::FrameError);
  CHECK(code_of([] { parse_serial_frame("12 3"); }) == ErrorCode::FrameError);
}

TEST_CASE("session config validation") {
  auto c = open_config();
  c.condition = Condition::Fixed;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::InvalidConfig);
  c.script_text = "hello";
  c.validate();
  c.user_id = "a,b";
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("open session timeline and recording") {
  ManualClock clock;
  const auto dir = testsupport::temp_dir("service_open");
  SessionManager mgr(clock, dir);
  const auto id = mgr.create(open_config());
  CHECK(mgr.snapshot(id).phase == Phase::Created);
  CHECK(code_of([&] { mgr.key_event(id, {"a", {}}); }) == ErrorCode::InvalidPhase);
  mgr.start(id);
  CHECK(code_of([&] { mgr.start(id); }) == ErrorCode::InvalidPhase);
  CHECK(mgr.snapshot(id).phase == Phase::PreRest);
  CHECK(code_of([&] { mgr.key_event(id, {"a", {}}); }) == ErrorCode::InvalidPhase);

  run_until(clock, mgr, 9999);
  CHECK(mgr.snapshot(id).phase == Phase::PreRest);
  run_until(clock, mgr, 10000);
  CHECK(mgr.snapshot(id).phase == Phase::Typing);
  CHECK(mgr.snapshot(id).remaining_s == doctest::Approx(60.0));
  mgr.key_event(id, {"h", {}});
  clock.advance(5);
  mgr.key_event(id, {"i", {}});
  mgr.key_event(id, {"Backspace", {}});
  mgr.key_event(id, {"Enter", {}});
  CHECK(mgr.snapshot(id).typed_text == "h\n");
  CHECK(code_of([&] { mgr.finish(id); }) == ErrorCode::InvalidPhase);

  run_until(clock, mgr, 70000);
  CHECK(mgr.snapshot(id).phase == Phase::PostRest);
  CHECK(code_of([&] { mgr.key_event(id, {"a", {}}); }) == ErrorCode::InvalidPhase);
  run_until(clock, mgr, 75000);
  const auto snap = mgr.snapshot(id);
  CHECK(snap.phase == Phase::Finished);
  CHECK(snap.samples >= 14997);
  CHECK(snap.samples <= 15003);

  const auto path = mgr.finish(id);
  CHECK(mgr.finish(id) == path);
  const auto rec = read_recording(path);
  CHECK(rec.values.size() == snap.samples);
  CHECK(rec.meta.label == Label::Angry);
  CHECK(rec.meta.condition == Condition::Open);
  CHECK(rec.meta.extra.at("gap_count") == "0");
  CHECK(std::stoll(rec.meta.extra.at("typing_start_ms")) == 10000);
  CHECK(std::stoll(rec.meta.extra.at("typing_end_ms")) == 70000);
  for (std::size_t i = 1; i < rec.timestamps_ms.size(); ++i) {
    CHECK(rec.timestamps_ms[i] > rec.timestamps_ms[i - 1]);
  }
  // Phase durations hold within one sample period.
  CHECK(rec.timestamps_ms.back() >= 75000 - 5);
  CHECK(rec.timestamps_ms.back() < 75000);
  auto keys_path = path;
  keys_path.replace_extension(".keys.csv");
  const auto keys = parse_key_events(read_text_file(keys_path));
  REQUIRE(keys.size() == 4);
  CHECK(keys[0].t_ms == 10000);
  CHECK(keys[1].t_ms == 10005);
  // The stored recording is usable downstream.
  const auto row = extract_recording(rec.series(), rec.meta.label, {rec.meta.user_id, rec.meta.condition});
  CHECK(row.values.size() == 80);
}

TEST_CASE("fixed session ends when the script is typed") {
  ManualClock clock;
  const auto dir = testsupport::temp_dir("service_fixed");
  SessionManager mgr(clock, dir);
  auto cfg = open_config();
  cfg.condition = Condition::Fixed;
  cfg.script_text = "Hé!";
  const auto id = mgr.create(cfg);
  mgr.start(id);
  run_until(clock, mgr, 10000);
  for (const char* k : {"H", "x", "Backspace", "é"}) mgr.key_event(id, {k, {}});
  CHECK(mgr.snapshot(id).phase == Phase::Typing);
  clock.advance(1000);
  mgr.key_event(id, {"!", {}});
  CHECK(mgr.snapshot(id).phase == Phase::PostRest);
  run_until(clock, mgr, 16000);
  CHECK(mgr.snapshot(id).phase == Phase::Finished);
  const auto rec = read_recording(mgr.finish(id));
  CHECK(std::stoll(rec.meta.extra.at("typing_end_ms")) == 11000);
  CHECK(rec.values.size() == 3200);
}

TEST_CASE("fixed session hits the time cap") {
  ManualClock clock;
  SessionManager mgr(clock, testsupport::temp_dir("service_cap"));
  auto cfg = open_config();
  cfg.condition = Condition::Fixed;
  cfg.script_text = "never typed";
  cfg.fixed_cap_s = 20;
  const auto id = mgr.create(cfg);
  mgr.start(id);
  run_until(clock, mgr, 30000, 1000);
  CHECK(mgr.snapshot(id).phase == Phase::PostRest);
  run_until(clock, mgr, 35000, 1000);
  CHECK(mgr.snapshot(id).phase == Phase::Finished);
}

TEST_CASE("stream frames are decimated but cover the data") {
  ManualClock clock;
  SessionManager mgr(clock, testsupport::temp_dir("service_stream"));
  const auto id = mgr.create(open_config());
  mgr.start(id);
  run_until(clock, mgr, 1000);
  const auto f = mgr.frame_since(id, 0);
  CHECK(f.next_cursor == 200);
  CHECK(f.values.size() <= 50);
  CHECK(!f.values.empty());
  CHECK(f.phase == Phase::PreRest);
  const auto g = mgr.frame_since(id, f.next_cursor);
  CHECK(g.values.empty());
  CHECK(code_of([&] { mgr.snapshot("nope"); }) == ErrorCode::UnknownSession);
}

TEST_CASE("unplugged serial source aborts the session") {
  const auto dir = testsupport::temp_dir("service_serial");
  const auto fifo = dir / "tty";
  REQUIRE(::mkfifo(fifo.c_str(), 0600) == 0);
  ManualClock clock;
  SessionManager mgr(clock, dir);
  auto cfg = open_config();
  cfg.source.kind = SourceSpec::Kind::Serial;
  cfg.source.port = fifo.string();
  const auto id = mgr.create(cfg);
  const int writer = ::open(fifo.c_str(), O_WRONLY | O_NONBLOCK);
  REQUIRE(writer >= 0);
  mgr.start(id);
  const std::string lines = "500\r\n501\r\nbad\r\n502\r\n";
  REQUIRE(::write(writer, lines.data(), lines.size()) == static_cast<ssize_t>(lines.size()));
  run_until(clock, mgr, 100);
  auto snap = mgr.snapshot(id);
  CHECK(snap.phase == Phase::PreRest);
  CHECK(snap.samples == 3);
  CHECK(snap.gaps == 1);
  ::close(writer);
  run_until(clock, mgr, 200);
  snap = mgr.snapshot(id);
  CHECK(snap.phase == Phase::Aborted);
  CHECK(snap.abort_reason.rfind("SourceLost", 0) == 0);

  cfg.source.port = (dir / "missing").string();
  CHECK(code_of([&] { mgr.create(cfg); }) == ErrorCode::SourceUnavailable);
}

TEST_CASE("HTTP API") {
  ManualClock clock;
  const auto dir = testsupport::temp_dir("service_http");
  SessionManager mgr(clock, dir);
  ServerOptions opt;
  opt.port = 0;
  opt.tick_interval_ms = 1;
  opt.stream_interval_ms = 1;
  SessionServer server(mgr, opt);
  const int port = server.start();
  REQUIRE(port > 0);
  httplib::Client cli("127.0.0.1", port);

  auto res = cli.Post("/sessions", R"({"user_id":"u7","condition":"fixed","label":"relaxed",
      "script_text":"ok","source":{"type":"simulator","sample_rate_hz":100,"seed":3}})",
                      "application/json");
  REQUIRE(res);
  CHECK(res->status == 201);
  CHECK(res->get_header_value("Access-Control-Allow-Origin") == "*");
  const std::string id = json::parse(res->body).at("id");

  res = cli.Post("/sessions", R"({"user_id":"u7","condition":"fixed"})", "application/json");
  REQUIRE(res);
  CHECK(res->status == 400);
  CHECK(json::parse(res->body).at("code") == "InvalidConfig");
  res = cli.Post("/sessions", "{not json", "application/json");
  REQUIRE(res);
  CHECK(res->status == 400);

  res = cli.Get("/sessions/zzz");
  REQUIRE(res);
  CHECK(res->status == 404);
  CHECK(json::parse(res->body).at("code") == "UnknownSession");

  res = cli.Post("/sessions/" + id + "/start", "", "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(json::parse(res->body).at("phase") == "pre_rest");
  res = cli.Post("/sessions/" + id + "/start", "", "application/json");
  REQUIRE(res);
  CHECK(res->status == 409);
  res = cli.Post("/sessions/" + id + "/keys", R"({"key":"o"})", "application/json");
  REQUIRE(res);
  CHECK(res->status == 409);
  CHECK(json::parse(res->body).at("code") == "InvalidPhase");

  clock.set(10000);
  auto wait_phase = [&](const std::string& phase) {
    for (int i = 0; i < 2000; ++i) {
      auto r = cli.Get("/sessions/" + id);
      if (r && json::parse(r->body).at("phase") == phase) return true;
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
    return false;
  };
  REQUIRE(wait_phase("typing"));
  res = cli.Post("/sessions/" + id + "/keys", R"({"events":[{"key":"o"},{"key":"k"}]})", "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(json::parse(res->body).at("phase") == "post_rest");
  res = cli.Post("/sessions/" + id + "/finish", "", "application/json");
  REQUIRE(res);
  CHECK(res->status == 409);

  clock.set(15000);
  REQUIRE(wait_phase("finished"));

  // The stream replays everything captured and closes on a terminal phase.
  res = cli.Get("/sessions/" + id + "/stream");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->get_header_value("Content-Type") == "text/event-stream");
  std::size_t frames = 0;
  std::string last_phase;
  std::size_t pos = 0;
  while ((pos = res->body.find("data: ", pos)) != std::string::npos) {
    const auto end = res->body.find("\n\n", pos);
    REQUIRE(end != std::string::npos);
    const auto frame = json::parse(res->body.substr(pos + 6, end - pos - 6));
    CHECK(frame.contains("t_ms"));
    CHECK(frame.contains("values"));
    CHECK(frame.contains("remaining_s"));
    last_phase = frame.at("phase");
    ++frames;
    pos = end;
  }
  CHECK(frames >= 1);
  CHECK(last_phase == "finished");

  res = cli.Post("/sessions/" + id + "/finish", "", "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  const std::string path = json::parse(res->body).at("path");
  const auto rec = read_recording(path);
  CHECK(rec.values.size() == 1500);
  CHECK(rec.meta.user_id == "u7");
  res = cli.Get("/sessions/" + id);
  CHECK(json::parse(res->body).at("recording_path") == path);
  server.stop();
}
