#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "traitgrid/session.hpp"

namespace traitgrid {

struct GatewayOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;  // 0 picks a free port
  int threads = 2;
  // Ticks start when the first client joins; false leaves pacing to advance_session().
  bool real_time = true;
};

// HTTP and WebSocket front end over a SessionManager.
//   POST /sessions           {"participant": "...", "seed": n}  -> {"session_id": "..."}
//   GET  /report/<id>        FactorReport JSON once the session is finalized
//   GET  /health
//   WS   /play/<id>          one ProtocolMessage JSON document per text frame
class GatewayServer {
 public:
  GatewayServer(std::shared_ptr<SessionManager> manager, GatewayOptions options);
  ~GatewayServer();
  GatewayServer(const GatewayServer&) = delete;
  GatewayServer& operator=(const GatewayServer&) = delete;

  // Binds and starts the worker threads. Returns the bound port.
  std::uint16_t start();
  // Blocks until stop() is called from another thread.
  void wait();
  void stop();
  std::uint16_t port() const;

  // Runs one tick of a session on its strand and broadcasts the result; for
  // tests that drive time by hand. Blocks until the tick is done.
  void advance_session(const std::string& session_id);

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

}  // namespace traitgrid
