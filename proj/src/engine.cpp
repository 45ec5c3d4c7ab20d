#include "shmpose/engine.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>

#include "shmpose/json_io.hpp"

namespace shmpose {

namespace {

using steady_clock = std::chrono::steady_clock;

int64_t wall_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

constexpr size_t kMaxRecordedFrames = 200000;

}  // namespace

std::vector<int64_t> percentile_sorted(std::vector<int64_t> samples) {
  std::sort(samples.begin(), samples.end());
  return samples;
}

MonitoringEngine::MonitoringEngine(Registry& registry, FrameSink* sink,
                                   EngineOptions options)
    : registry_(registry), sink_(sink), options_(std::move(options)) {}

MonitoringEngine::~MonitoringEngine() { stop(); }

void MonitoringEngine::accept_sample(const DisplacementSample& sample) {
  if (!std::isfinite(sample.dx) || !std::isfinite(sample.dy) ||
      !std::isfinite(sample.dz)) {
    throw std::invalid_argument("sample components must be finite");
  }
  const auto binding = registry_.find_active_binding(sample.device_id);
  if (!binding) {
    throw UnknownDeviceError("no active binding for device " +
                             sample.device_id);
  }

  std::lock_guard lock(streams_mutex_);
  auto& stream = streams_[sample.device_id];
  if (sample.t_ms <= stream.last_t_ms) {
    {
      std::lock_guard mlock(metrics_mutex_);
      counters_.samples_dropped_out_of_order++;
    }
    throw OutOfOrderError("device " + sample.device_id + " timestamp " +
                          std::to_string(sample.t_ms) +
                          " not after previous " +
                          std::to_string(stream.last_t_ms));
  }
  stream.last_t_ms = sample.t_ms;
  stream.samples.push_back(sample);
  while (stream.samples.size() > options_.buffer_depth) {
    stream.samples.pop_front();
  }
  {
    std::lock_guard mlock(metrics_mutex_);
    counters_.samples_accepted++;
  }

  if (!options_.data_dir.empty()) {
    if (!stream.log) {
      const auto dir =
          Registry::samples_dir(options_.data_dir, binding->structure_id);
      std::error_code ec;
      std::filesystem::create_directories(dir, ec);
      stream.log = std::make_unique<std::ofstream>(
          std::filesystem::path(dir) / (sample.device_id + ".jsonl"),
          std::ios::app);
    }
    ordered_json line = {{"device_id", sample.device_id},
                         {"t_ms", sample.t_ms},
                         {"dx_m", sample.dx},
                         {"dy_m", sample.dy},
                         {"dz_m", sample.dz}};
    *stream.log << line.dump() << "\n";
    stream.log->flush();
  }
}

NodeDisplacementFrame MonitoringEngine::assemble_frame(
    const RuntimeConfig& config, int64_t frame_t_ms) const {
  NodeDisplacementFrame frame;
  frame.structure_id = config.structure_id;
  frame.frame_t_ms = frame_t_ms;
  frame.config_version = config.config_version;

  std::lock_guard lock(streams_mutex_);
  for (const auto& [node_id, device_id] : config.node_to_device) {
    NodeDisplacement entry;
    entry.stale = true;
    const auto it = streams_.find(device_id);
    if (it != streams_.end()) {
      // Latest sample at or before the frame time; devices stream in order
      // so scanning from the back terminates quickly.
      const auto& samples = it->second.samples;
      for (auto rit = samples.rbegin(); rit != samples.rend(); ++rit) {
        if (rit->t_ms <= frame_t_ms) {
          entry.displacement = {rit->dx, rit->dy, rit->dz};
          entry.source_t_ms = rit->t_ms;
          entry.stale =
              rit->t_ms < frame_t_ms - options_.staleness_window_ms;
          break;
        }
      }
    }
    frame.nodes[node_id] = entry;
  }
  for (const auto& node_id : config.unbound_nodes) {
    frame.nodes[node_id] = NodeDisplacement{{}, 0, true};
  }
  return frame;
}

FrameSnapshot MonitoringEngine::compute_snapshot(
    const NodeDisplacementFrame& frame, const RuntimeConfig& config) const {
  FrameSnapshot snapshot;
  snapshot.structure_id = frame.structure_id;
  snapshot.frame_t_ms = frame.frame_t_ms;
  snapshot.config_version = frame.config_version;

  std::map<std::string, Point3> node_positions;
  const auto displacement_of = [&](const std::string& node_id) -> Point3 {
    const auto it = frame.nodes.find(node_id);
    return it == frame.nodes.end() ? Point3{} : it->second.displacement;
  };

  for (size_t chain_idx = 0; chain_idx < config.chains.size(); ++chain_idx) {
    const auto& chain = config.chains[chain_idx];
    const Point3 base_primed =
        chain.base_rest + displacement_of(chain.base_node_id);

    std::vector<ColumnGeometry> geometries;
    std::vector<std::pair<double, double>> measured_xy;
    for (const auto& col : chain.columns) {
      geometries.push_back(col.geometry);
      const Point3 disp = displacement_of(col.top_node_id);
      measured_xy.emplace_back(col.geometry.rest_top.x + disp.x,
                               col.geometry.rest_top.y + disp.y);
    }

    std::vector<ColumnSolution> solutions;
    try {
      solutions = solve_chain(geometries, measured_xy, base_primed);
    } catch (const std::exception& e) {
      snapshot.failed_chains.push_back({chain_idx, e.what()});
      continue;
    }

    node_positions[chain.base_node_id] = base_primed;
    Point3 bottom = base_primed;
    for (size_t k = 0; k < solutions.size(); ++k) {
      const auto& col = chain.columns[k];
      const auto& sol = solutions[k];
      node_positions[col.top_node_id] = sol.top_primed;

      const Point3 bottom_shift = bottom - col.geometry.rest_bottom;
      ColumnPoseEntry entry;
      entry.column_id = col.column_id;
      entry.pose = center_pose(sol, col.geometry.length, bottom_shift);
      const double computed_dz =
          sol.top_primed.z - col.geometry.rest_top.z;
      entry.z_residual = displacement_of(col.top_node_id).z - computed_dz;
      snapshot.columns.push_back(entry);
      bottom = sol.top_primed;
    }
  }

  for (const auto& [node_id, position] : node_positions) {
    snapshot.nodes.push_back({node_id, position});
  }
  return snapshot;
}

std::vector<WarningEvent> MonitoringEngine::evaluate_thresholds(
    const NodeDisplacementFrame& frame, const ThresholdConfig& thresholds) {
  std::vector<WarningEvent> events;
  for (const auto& [node_id, entry] : frame.nodes) {
    const struct {
      char axis;
      double value;
      double max;
    } checks[] = {{'x', entry.displacement.x, thresholds.max_dx},
                  {'y', entry.displacement.y, thresholds.max_dy},
                  {'z', entry.displacement.z, thresholds.max_dz}};
    for (const auto& check : checks) {
      if (std::abs(check.value) > check.max) {
        events.push_back({frame.structure_id, node_id, check.axis, check.value,
                          check.max, frame.frame_t_ms});
      }
    }
  }
  return events;
}

FrameSnapshot MonitoringEngine::tick(const std::string& structure_id,
                                     int64_t frame_t_ms) {
  const auto start = steady_clock::now();
  const auto config = registry_.resolve_runtime_config(structure_id);

  {
    // Frame timestamps are strictly increasing per structure.
    std::lock_guard lock(frames_mutex_);
    auto& last = last_frame_t_[structure_id];
    if (frame_t_ms <= last && last != 0) frame_t_ms = last + 1;
    last = frame_t_ms;
  }

  const auto frame = assemble_frame(*config, frame_t_ms);
  auto snapshot = compute_snapshot(frame, *config);
  std::vector<WarningEvent> warnings;
  if (config->thresholds) {
    warnings = evaluate_thresholds(frame, *config->thresholds);
  }

  {
    std::lock_guard lock(frames_mutex_);
    auto& recorded = recorded_[structure_id];
    recorded.push_back(snapshot);
    if (recorded.size() > kMaxRecordedFrames) {
      recorded.erase(recorded.begin(),
                     recorded.begin() + recorded.size() - kMaxRecordedFrames);
    }
  }

  if (sink_) {
    sink_->publish_snapshot(snapshot);
    for (const auto& w : warnings) sink_->publish_warning(w);
  }

  {
    std::lock_guard lock(metrics_mutex_);
    counters_.frames_emitted++;
    if (!snapshot.failed_chains.empty()) counters_.frame_errors++;
    frame_latencies_ns_.push_back(
        std::chrono::duration_cast<std::chrono::nanoseconds>(
            steady_clock::now() - start)
            .count());
  }
  return snapshot;
}

void MonitoringEngine::start(const std::string& structure_id,
                             int64_t publish_period_ms) {
  std::lock_guard lock(loops_mutex_);
  if (loop_threads_.count(structure_id)) return;
  running_ = true;
  loop_threads_.emplace(
      structure_id, std::thread(&MonitoringEngine::run_loop, this,
                                structure_id, publish_period_ms));
}

void MonitoringEngine::stop() {
  running_ = false;
  std::lock_guard lock(loops_mutex_);
  for (auto& [_, thread] : loop_threads_) {
    if (thread.joinable()) thread.join();
  }
  loop_threads_.clear();
}

void MonitoringEngine::run_loop(std::string structure_id,
                                int64_t publish_period_ms) {
  const auto period = std::chrono::milliseconds(publish_period_ms);
  auto next = steady_clock::now() + period;
  while (running_) {
    std::this_thread::sleep_until(next);
    next += period;
    if (!running_) break;
    try {
      tick(structure_id, wall_clock_ms());
    } catch (const std::exception&) {
      // Bad data or a missing structure must not kill the loop.
      std::lock_guard lock(metrics_mutex_);
      counters_.frame_errors++;
    }
  }
}

std::vector<FrameSnapshot> MonitoringEngine::recorded_frames(
    const std::string& structure_id, int64_t from_ms, int64_t to_ms) const {
  std::lock_guard lock(frames_mutex_);
  std::vector<FrameSnapshot> out;
  const auto it = recorded_.find(structure_id);
  if (it == recorded_.end()) return out;
  for (const auto& snapshot : it->second) {
    if (snapshot.frame_t_ms >= from_ms && snapshot.frame_t_ms <= to_ms) {
      out.push_back(snapshot);
    }
  }
  return out;
}

EngineCounters MonitoringEngine::counters() const {
  std::lock_guard lock(metrics_mutex_);
  return counters_;
}

std::vector<int64_t> MonitoringEngine::frame_latencies_ns() const {
  std::lock_guard lock(metrics_mutex_);
  return frame_latencies_ns_;
}

}  // namespace shmpose
