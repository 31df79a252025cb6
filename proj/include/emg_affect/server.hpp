#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <thread>

#include "emg_affect/session.hpp"

namespace httplib {
class Server;
}

namespace emg {

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;                 // 0 picks a free port
  int tick_interval_ms = 10;
  int stream_interval_ms = 100;    // 10 Hz display frames
  std::string static_dir;          // optional UI bundle served at "/"
};

/// JSON over HTTP:
///   POST /sessions                 config -> {"id": ...}
///   POST /sessions/{id}/start      -> snapshot
///   POST /sessions/{id}/keys       {"key": "a"} | {"text": "..."} | {"events": [...]}
///   POST /sessions/{id}/finish     -> {"path": ...}
///   GET  /sessions/{id}            -> snapshot
///   GET  /sessions/{id}/stream     server-sent events, one JSON frame each
/// Errors are {"code": ..., "message": ...} with a matching HTTP status.
class SessionServer {
 public:
  SessionServer(SessionManager& manager, ServerOptions options);
  ~SessionServer();
  SessionServer(const SessionServer&) = delete;
  SessionServer& operator=(const SessionServer&) = delete;

  /// Binds and serves on a background thread. Returns the bound port.
  int start();
  /// Serves on the calling thread until stop().
  void run();
  void stop();
  int port() const { return port_; }

 private:
  void install_routes();
  int bind();

  SessionManager& manager_;
  ServerOptions options_;
  std::unique_ptr<httplib::Server> http_;
  std::atomic<bool> running_{false};
  std::thread ticker_;
  std::thread listener_;
  int port_ = 0;
};

/// Parses the POST /sessions body. Throws InvalidConfig / ParseError.
SessionConfig parse_session_config(const std::string& json_text);
std::string snapshot_json(const SessionSnapshot& snapshot);
std::string frame_json(const StreamFrame& frame);

}  // namespace emg
