#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "shmpose/hub.hpp"

// WebSocket front end of the hub: GET /api/v1/stream upgrades, the client
// sends {"type":"subscribe","structure_id":...} and then receives
// pose_update / warning / error events as JSON text frames.

namespace shmpose {

class StreamServer {
 public:
  explicit StreamServer(StreamHub& hub);
  ~StreamServer();

  // Binds and starts accepting; port 0 picks an ephemeral port.
  void start(const std::string& address, uint16_t port);
  void stop();

  uint16_t port() const { return port_; }

 private:
  struct Impl;

  void accept_loop();
  void serve_connection(int connection_index);

  StreamHub& hub_;
  std::unique_ptr<Impl> impl_;
  std::atomic<bool> running_{false};
  std::thread accept_thread_;
  uint16_t port_ = 0;
};

}  // namespace shmpose
