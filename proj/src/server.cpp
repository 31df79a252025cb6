#include "emg_affect/server.hpp"

#include <chrono>

#include <httplib.h>
#include <json.hpp>

#include "emg_affect/error.hpp"

namespace emg {

using nlohmann::json;

namespace {

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownSession: return 404;
    case ErrorCode::InvalidPhase: return 409;
    case ErrorCode::SourceUnavailable:
    case ErrorCode::SourceLost: return 503;
    case ErrorCode::IoError: return 500;
    default: return 400;
  }
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& message) {
  res.status = http_status(code);
  res.set_content(json{{"code", std::string(to_string(code))}, {"message", message}}.dump(),
                  "application/json");
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    send_error(res, e.code(), e.detail());
  } catch (const json::exception& e) {
    send_error(res, ErrorCode::ParseError, e.what());
  } catch (const std::exception& e) {
    res.status = 500;
    res.set_content(json{{"code", "Internal"}, {"message", e.what()}}.dump(), "application/json");
  }
}

json snapshot_to_json(const SessionSnapshot& s) {
  json j{{"id", s.id},
         {"phase", std::string(to_string(s.phase))},
         {"elapsed_ms", s.elapsed_ms},
         {"phase_entered_at_ms", s.phase_entered_at_ms},
         {"remaining_s", s.remaining_s},
         {"samples", s.samples},
         {"gaps", s.gaps},
         {"keystrokes", s.keystrokes},
         {"typed_text", s.typed_text}};
  if (!s.abort_reason.empty()) j["abort_reason"] = s.abort_reason;
  if (s.recording_path) j["recording_path"] = *s.recording_path;
  return j;
}

}  // namespace

std::string snapshot_json(const SessionSnapshot& snapshot) { return snapshot_to_json(snapshot).dump(); }

std::string frame_json(const StreamFrame& frame) {
  return json{{"t_ms", frame.t_ms},
              {"values", frame.values},
              {"phase", std::string(to_string(frame.phase))},
              {"remaining_s", frame.remaining_s}}
      .dump();
}

SessionConfig parse_session_config(const std::string& json_text) {
  const json j = json::parse(json_text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(ErrorCode::ParseError, "session config must be a JSON object");
  }
  SessionConfig cfg;
  try {
    cfg.user_id = j.at("user_id").get<std::string>();
    cfg.condition = parse_condition(j.value("condition", std::string("fixed")));
    cfg.target_label = parse_label(j.value("label", std::string("relaxed")));
    cfg.script_text = j.value("script_text", std::string());
    cfg.typing_limit_s = j.value("typing_limit_s", cfg.typing_limit_s);
    cfg.fixed_cap_s = j.value("fixed_cap_s", cfg.fixed_cap_s);
    cfg.pre_rest_s = j.value("pre_rest_s", cfg.pre_rest_s);
    cfg.post_rest_s = j.value("post_rest_s", cfg.post_rest_s);

    const json src = j.value("source", json::object());
    const std::string type = src.value("type", std::string("simulator"));
    cfg.source.sample_rate_hz = src.value("sample_rate_hz", cfg.source.sample_rate_hz);
    if (type == "serial") {
      cfg.source.kind = SourceSpec::Kind::Serial;
      cfg.source.port = src.value("port", std::string());
      cfg.source.baud = src.value("baud", cfg.source.baud);
    } else if (type == "simulator") {
      cfg.source.kind = SourceSpec::Kind::Simulator;
      auto& p = cfg.source.profile;
      p = SynthProfile::defaults_for(cfg.target_label, src.value("seed", std::uint64_t{0}));
      const json overrides = src.value("profile", json::object());
      p.baseline = overrides.value("baseline", p.baseline);
      p.noise_sd = overrides.value("noise_sd", p.noise_sd);
      p.spike_rate_hz = overrides.value("spike_rate_hz", p.spike_rate_hz);
      p.spike_amplitude_mean = overrides.value("spike_amplitude_mean", p.spike_amplitude_mean);
      p.spike_duration_ms = overrides.value("spike_duration_ms", p.spike_duration_ms);
    } else {
      throw Error(ErrorCode::InvalidConfig, "unknown source type '" + type + "'");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  cfg.validate();
  return cfg;
}

SessionServer::SessionServer(SessionManager& manager, ServerOptions options)
    : manager_(manager), options_(std::move(options)), http_(std::make_unique<httplib::Server>()) {
  install_routes();
}

SessionServer::~SessionServer() { stop(); }

void SessionServer::install_routes() {
  auto& srv = *http_;
  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  srv.Options(R"(/sessions.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
  if (!options_.static_dir.empty()) srv.set_mount_point("/", options_.static_dir);

  srv.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto id = manager_.create(parse_session_config(req.body));
      res.status = 201;
      res.set_content(json{{"id", id}}.dump(), "application/json");
    });
  });
  srv.Post(R"(/sessions/([^/]+)/start)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1];
      manager_.start(id);
      res.set_content(snapshot_json(manager_.snapshot(id)), "application/json");
    });
  });
  srv.Post(R"(/sessions/([^/]+)/keys)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1];
      const json body = json::parse(req.body);
      auto one = [&](const json& e) {
        KeyInput input;
        input.key = e.value("key", std::string());
        if (e.contains("text")) input.text = e.at("text").get<std::string>();
        if (input.key.empty() && !input.text) {
          throw Error(ErrorCode::InvalidConfig, "key event needs 'key' or 'text'");
        }
        manager_.key_event(id, input);
      };
      if (body.contains("events")) {
        for (const auto& e : body.at("events")) one(e);
      } else {
        one(body);
      }
      res.set_content(snapshot_json(manager_.snapshot(id)), "application/json");
    });
  });
  srv.Post(R"(/sessions/([^/]+)/finish)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto path = manager_.finish(req.matches[1]);
      res.set_content(json{{"path", path.string()}}.dump(), "application/json");
    });
  });
  srv.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { res.set_content(snapshot_json(manager_.snapshot(req.matches[1])), "application/json"); });
  });
  srv.Get(R"(/sessions/([^/]+)/stream)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1];
      auto session = manager_.get(id);
      auto cursor = std::make_shared<std::size_t>(0);
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider(
          "text/event-stream",
          [this, id, cursor](std::size_t, httplib::DataSink& sink) {
            if (!running_.load()) {
              sink.done();
              return true;
            }
            StreamFrame frame;
            try {
              frame = manager_.frame_since(id, *cursor);
            } catch (const Error&) {
              sink.done();
              return true;
            }
            *cursor = frame.next_cursor;
            const std::string event = "data: " + frame_json(frame) + "\n\n";
            if (!sink.write(event.data(), event.size())) return false;
            if (frame.phase == Phase::Finished || frame.phase == Phase::Aborted) {
              sink.done();
              return true;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(options_.stream_interval_ms));
            return true;
          });
    });
  });
}

int SessionServer::bind() {
  if (options_.port == 0) {
    port_ = http_->bind_to_any_port(options_.host);
  } else {
    port_ = http_->bind_to_port(options_.host, options_.port) ? options_.port : -1;
  }
  if (port_ <= 0) {
    throw Error(ErrorCode::IoError,
                "cannot bind " + options_.host + ":" + std::to_string(options_.port));
  }
  running_.store(true);
  ticker_ = std::thread([this] {
    while (running_.load()) {
      manager_.tick();
      std::this_thread::sleep_for(std::chrono::milliseconds(options_.tick_interval_ms));
    }
  });
  return port_;
}

int SessionServer::start() {
  bind();
  listener_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
  return port_;
}

void SessionServer::run() {
  bind();
  http_->listen_after_bind();
  stop();
}

void SessionServer::stop() {
  running_.store(false);
  if (http_) http_->stop();
  if (listener_.joinable()) listener_.join();
  if (ticker_.joinable()) ticker_.join();
}

}  // namespace emg
