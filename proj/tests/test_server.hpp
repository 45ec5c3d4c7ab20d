#pragma once

#include <httplib.h>

#include <filesystem>
#include <random>
#include <string>

#include "shmpose/engine.hpp"
#include "shmpose/gateway.hpp"
#include "shmpose/hub.hpp"
#include "shmpose/json_io.hpp"
#include "shmpose/stream_server.hpp"
#include "test_models.hpp"

// Full in-process server: registry + engine + hub behind real HTTP and
// WebSocket listeners on ephemeral ports.

namespace shmpose::testing {

struct ServerFixture {
  std::filesystem::path data_dir;
  Registry registry;
  StreamHub hub;
  MonitoringEngine engine;
  Gateway gateway;
  StreamServer stream_server;
  httplib::Client client;

  ServerFixture()
      : data_dir(std::filesystem::temp_directory_path() /
                 ("shmpose_srv_" + std::to_string(std::random_device{}()))),
        hub([this](const std::string& id) {
          try {
            registry.resolve_runtime_config(id);
            return true;
          } catch (const NotFoundError&) {
            return false;
          }
        }),
        engine(registry, &hub, EngineOptions{.data_dir = data_dir.string()}),
        gateway(registry, engine),
        stream_server(hub),
        client("127.0.0.1", [this] {
          gateway.start("127.0.0.1", 0);
          return gateway.port();
        }()) {
    stream_server.start("127.0.0.1", 0);
  }

  ~ServerFixture() {
    engine.stop();
    stream_server.stop();
    gateway.stop();
    std::error_code ec;
    std::filesystem::remove_all(data_dir, ec);
  }

  void setup_structure(double column_length = 3.0, double scale = 1.0,
                       const std::string& structure_id = "s1") {
    registry.upsert_structure(
        two_level_frame(structure_id, column_length, scale));
    bind_eight_devices(registry, structure_id);
  }

  static std::string batch_body(const std::string& device, int64_t t0,
                                int count, int64_t step = 50) {
    ordered_json body;
    body["device_id"] = device;
    body["samples"] = ordered_json::array();
    for (int i = 0; i < count; ++i) {
      body["samples"].push_back({{"t_ms", t0 + i * step},
                                 {"dx_m", 0.01 * i},
                                 {"dy_m", 0.0},
                                 {"dz_m", 0.0}});
    }
    return body.dump();
  }
};

}  // namespace shmpose::testing
