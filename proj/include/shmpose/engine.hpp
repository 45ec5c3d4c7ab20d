#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "shmpose/kinematics.hpp"
#include "shmpose/registry.hpp"

// Turns per-device displacement streams into time-aligned frames, solves the
// chain kinematics and evaluates thresholds. One snapshot per tick.

namespace shmpose {

struct DisplacementSample {
  std::string device_id;
  int64_t t_ms = 0;  // epoch milliseconds
  double dx = 0.0;   // meters, global axes
  double dy = 0.0;
  double dz = 0.0;
};

struct NodeDisplacement {
  Point3 displacement;
  int64_t source_t_ms = 0;
  bool stale = false;
};

struct NodeDisplacementFrame {
  std::string structure_id;
  int64_t frame_t_ms = 0;
  std::map<std::string, NodeDisplacement> nodes;
  uint64_t config_version = 0;
};

struct NodePoseEntry {
  std::string node_id;
  Point3 position;  // primed (deformed) position
};

struct ColumnPoseEntry {
  std::string column_id;
  ColumnPose pose;
  double z_residual = 0.0;  // measured dz minus computed, meters
};

struct ChainFailure {
  size_t chain_index = 0;
  std::string reason;
};

struct FrameSnapshot {
  std::string structure_id;
  int64_t frame_t_ms = 0;
  std::vector<NodePoseEntry> nodes;
  std::vector<ColumnPoseEntry> columns;
  std::vector<ChainFailure> failed_chains;
  uint64_t config_version = 0;
};

struct WarningEvent {
  std::string structure_id;
  std::string node_id;
  char axis = 'x';  // 'x' | 'y' | 'z'
  double value = 0.0;
  double max = 0.0;
  int64_t frame_t_ms = 0;
};

class UnknownDeviceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Sample timestamp not strictly greater than the device's previous one.
class OutOfOrderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Where the engine hands off computed frames; the stream hub implements this.
class FrameSink {
 public:
  virtual ~FrameSink() = default;
  virtual void publish_snapshot(const FrameSnapshot& snapshot) = 0;
  virtual void publish_warning(const WarningEvent& event) = 0;
};

struct EngineOptions {
  int64_t staleness_window_ms = 200;  // 4x the 20 Hz sample period
  std::string data_dir;               // empty disables sample logging
  size_t buffer_depth = 1024;         // retained samples per device
};

struct EngineCounters {
  uint64_t samples_accepted = 0;
  uint64_t samples_dropped_out_of_order = 0;
  uint64_t frames_emitted = 0;
  uint64_t frame_errors = 0;
};

// Sorted nanosecond durations; empty when nothing was recorded.
std::vector<int64_t> percentile_sorted(std::vector<int64_t> samples);

class MonitoringEngine {
 public:
  MonitoringEngine(Registry& registry, FrameSink* sink,
                   EngineOptions options = {});
  ~MonitoringEngine();

  // Buffers and logs one sample. Throws UnknownDeviceError when the device
  // has no active binding, OutOfOrderError when the timestamp does not
  // strictly increase (the sample is dropped and counted).
  void accept_sample(const DisplacementSample& sample);

  NodeDisplacementFrame assemble_frame(const RuntimeConfig& config,
                                       int64_t frame_t_ms) const;
  FrameSnapshot compute_snapshot(const NodeDisplacementFrame& frame,
                                 const RuntimeConfig& config) const;
  static std::vector<WarningEvent> evaluate_thresholds(
      const NodeDisplacementFrame& frame, const ThresholdConfig& thresholds);

  // One full assemble -> compute -> evaluate -> publish pass. Re-resolves
  // the runtime config so registry changes apply immediately.
  FrameSnapshot tick(const std::string& structure_id, int64_t frame_t_ms);

  // Periodic ticking on a background thread at wall-clock time. One loop
  // per structure; starting an already running structure is a no-op.
  void start(const std::string& structure_id, int64_t publish_period_ms);
  void stop();

  std::vector<FrameSnapshot> recorded_frames(const std::string& structure_id,
                                             int64_t from_ms,
                                             int64_t to_ms) const;

  EngineCounters counters() const;
  // Frame pipeline latencies (tick start to publish complete), nanoseconds.
  std::vector<int64_t> frame_latencies_ns() const;

 private:
  struct DeviceStream {
    std::deque<DisplacementSample> samples;
    int64_t last_t_ms = std::numeric_limits<int64_t>::min();
    std::unique_ptr<std::ofstream> log;
  };

  void run_loop(std::string structure_id, int64_t publish_period_ms);

  Registry& registry_;
  FrameSink* sink_;
  EngineOptions options_;

  mutable std::mutex streams_mutex_;
  std::map<std::string, DeviceStream> streams_;

  mutable std::mutex frames_mutex_;
  std::map<std::string, std::vector<FrameSnapshot>> recorded_;
  std::map<std::string, int64_t> last_frame_t_;

  mutable std::mutex metrics_mutex_;
  EngineCounters counters_;
  std::vector<int64_t> frame_latencies_ns_;

  std::atomic<bool> running_{false};
  std::mutex loops_mutex_;
  std::map<std::string, std::thread> loop_threads_;
};

}  // namespace shmpose
