#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "shmpose/engine.hpp"
#include "shmpose/registry.hpp"

// HTTP front door: batched sample ingestion plus admin CRUD over the
// registry. Routes live under /api/v1.

namespace shmpose {

class Gateway {
 public:
  Gateway(Registry& registry, MonitoringEngine& engine);
  ~Gateway();

  // Binds and serves on a background thread; port 0 picks an ephemeral port.
  void start(const std::string& address, uint16_t port);
  void stop();
  uint16_t port() const { return port_; }

  // Per-request ingest handling durations, nanoseconds.
  std::vector<int64_t> ingest_latencies_ns() const;

 private:
  struct Impl;

  Registry& registry_;
  MonitoringEngine& engine_;
  std::unique_ptr<Impl> impl_;
  std::thread server_thread_;
  uint16_t port_ = 0;

  mutable std::mutex metrics_mutex_;
  std::vector<int64_t> ingest_latencies_ns_;
};

}  // namespace shmpose
