#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "shmpose/engine.hpp"
#include "shmpose/registry.hpp"

// Simulated sensor fleet: generates scenario displacements per bound node
// and pushes them to the ingest endpoint in batches, like the devices would.

namespace shmpose {

enum class ScenarioKind { harmonic, step, replay, raw };

struct Scenario {
  ScenarioKind kind = ScenarioKind::harmonic;
  // Kinematic kinds prescribe per-column angles and push them through the
  // forward parameterization, so every generated frame is exactly solvable.
  double amplitude_ry_rad = 0.1;
  double amplitude_tx_rad = 0.0;
  double freq_hz = 1.0;
  double phase_rad = 0.0;
  double step_time_s = 1.0;       // step kind: zero before, constant after
  Point3 raw_displacement;        // raw kind: emitted verbatim
  std::string replay_file;        // replay kind: sample log to re-send
};

class ReplayExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Prescribed (r_y, t_x) for every column at time t.
std::pair<double, double> scenario_angles(const Scenario& scenario, double t_s);

// Displacement of one node at time t, derived by running the prescribed
// angles through the chain's forward kinematics. Ground nodes and nodes
// outside any chain get zero.
Point3 scenario_sample(const Scenario& scenario, const RuntimeConfig& config,
                       const std::string& node_id, double t_s);

struct SimulationOptions {
  std::string host = "127.0.0.1";
  uint16_t port = 0;
  std::string structure_id;
  int device_count = 8;
  double rate_hz = 20.0;
  double duration_s = 60.0;
  int batch_size = 10;
  Scenario scenario;
  bool realtime = true;  // false sends as fast as possible (tests)
};

struct SimulationReport {
  uint64_t samples_sent = 0;
  uint64_t samples_accepted = 0;
  uint64_t samples_rejected = 0;
  uint64_t requests = 0;
  uint64_t request_failures = 0;
  bool complete = false;
  std::vector<int64_t> request_latencies_ns;  // sorted ascending
};

// Runs the fleet against a live server. All devices must already be bound.
SimulationReport run_simulation(const SimulationOptions& options);

// Reads the stream endpoint and returns one JSON text frame per call.
class StreamTail {
 public:
  StreamTail();
  ~StreamTail();

  void connect(const std::string& host, uint16_t port,
               const std::string& structure_id);
  // Blocks until a frame arrives; nullopt on close/error.
  std::optional<std::string> read_message();
  void close();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace shmpose
