#include "shmpose/simulator.hpp"

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numbers>
#include <thread>

#include "shmpose/json_io.hpp"

namespace shmpose {

namespace {

using steady_clock = std::chrono::steady_clock;

int64_t epoch_ms_now() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

const ResolvedChain* chain_of_node(const RuntimeConfig& config,
                                   const std::string& node_id,
                                   size_t* column_index) {
  for (const auto& chain : config.chains) {
    for (size_t k = 0; k < chain.columns.size(); ++k) {
      if (chain.columns[k].top_node_id == node_id) {
        *column_index = k;
        return &chain;
      }
    }
  }
  return nullptr;
}

}  // namespace

std::pair<double, double> scenario_angles(const Scenario& scenario,
                                          double t_s) {
  switch (scenario.kind) {
    case ScenarioKind::harmonic: {
      const double arg =
          2.0 * std::numbers::pi * scenario.freq_hz * t_s + scenario.phase_rad;
      return {scenario.amplitude_ry_rad * std::sin(arg),
              scenario.amplitude_tx_rad * std::sin(arg)};
    }
    case ScenarioKind::step:
      if (t_s < scenario.step_time_s) return {0.0, 0.0};
      return {scenario.amplitude_ry_rad, scenario.amplitude_tx_rad};
    default:
      return {0.0, 0.0};
  }
}

Point3 scenario_sample(const Scenario& scenario, const RuntimeConfig& config,
                       const std::string& node_id, double t_s) {
  if (scenario.kind == ScenarioKind::raw) return scenario.raw_displacement;
  size_t column_index = 0;
  const ResolvedChain* chain = chain_of_node(config, node_id, &column_index);
  if (!chain) return {};  // ground or unchained node: no prescribed motion

  const auto [r_y, t_x] = scenario_angles(scenario, t_s);
  Point3 primed = chain->base_rest;
  Point3 rest = chain->base_rest;
  for (size_t k = 0; k <= column_index; ++k) {
    primed = forward_column(primed, chain->columns[k].geometry, r_y, t_x);
    rest = chain->columns[k].geometry.rest_top;
  }
  return primed - rest;
}

SimulationReport run_simulation(const SimulationOptions& options) {
  SimulationReport report;
  if (options.rate_hz <= 0 || options.duration_s <= 0 ||
      options.batch_size <= 0 || options.device_count <= 0) {
    throw std::invalid_argument(
        "rate_hz, duration_s, batch_size and device count must be positive");
  }

  // Resolve the server-side view: which device sits on which node.
  RuntimeConfig config;
  {
    httplib::Client client(options.host, options.port);
    auto res = client.Get("/api/v1/structures/" + options.structure_id +
                          "/config");
    if (!res || res->status != 200) {
      report.complete = false;
      return report;
    }
    const auto doc = nlohmann::json::parse(res->body);
    config.structure_id = options.structure_id;
    for (const auto& cj : doc.at("chains")) {
      ResolvedChain chain;
      chain.base_node_id = cj.at("base_node_id").get<std::string>();
      chain.base_rest = point_from_json(cj.at("base_rest_m"));
      for (const auto& col : cj.at("columns")) {
        chain.columns.push_back(
            {col.at("column_id").get<std::string>(),
             col.at("bottom_node_id").get<std::string>(),
             col.at("top_node_id").get<std::string>(),
             ColumnGeometry{col.at("length_m").get<double>(),
                            point_from_json(col.at("rest_bottom_m")),
                            point_from_json(col.at("rest_top_m"))}});
      }
      config.chains.push_back(std::move(chain));
    }
    for (const auto& [node, device] :
         doc.at("node_to_device").get<std::map<std::string, std::string>>()) {
      config.node_to_device[node] = device;
      config.device_to_node[device] = node;
    }
  }

  std::vector<std::pair<std::string, std::string>> devices;  // device, node
  for (const auto& [device, node] : config.device_to_node) {
    devices.emplace_back(device, node);
  }
  std::sort(devices.begin(), devices.end());
  if (static_cast<int>(devices.size()) > options.device_count) {
    devices.resize(options.device_count);
  }

  // Replay input, if any, keyed by device.
  std::map<std::string, std::vector<Point3>> replay;
  if (options.scenario.kind == ScenarioKind::replay) {
    std::ifstream in(options.scenario.replay_file);
    if (!in) {
      throw IoError("cannot read replay file " + options.scenario.replay_file);
    }
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      replay[j.at("device_id").get<std::string>()].push_back(
          {j.at("dx_m").get<double>(), j.at("dy_m").get<double>(),
           j.at("dz_m").get<double>()});
    }
  }

  std::mutex report_mutex;
  std::atomic<bool> all_ok{true};
  const int total_samples =
      static_cast<int>(std::llround(options.rate_hz * options.duration_s));
  const auto sample_period = std::chrono::duration_cast<steady_clock::duration>(
      std::chrono::duration<double>(1.0 / options.rate_hz));
  const int64_t t0_ms = epoch_ms_now();
  const auto start = steady_clock::now();

  std::vector<std::thread> threads;
  for (size_t d = 0; d < devices.size(); ++d) {
    threads.emplace_back([&, d] {
      const auto& [device_id, node_id] = devices[d];
      httplib::Client client(options.host, options.port);
      client.set_keep_alive(true);

      std::vector<ordered_json> batch;
      uint64_t sent = 0, accepted = 0, rejected = 0, requests = 0,
               failures = 0;
      std::vector<int64_t> latencies;

      const auto post_batch = [&] {
        if (batch.empty()) return;
        ordered_json body;
        body["device_id"] = device_id;
        body["samples"] = batch;
        const std::string payload = body.dump();
        batch.clear();

        for (int attempt = 0; attempt < 3; ++attempt) {
          const auto req_start = steady_clock::now();
          auto res = client.Post("/api/v1/ingest", payload, "application/json");
          ++requests;
          if (res && (res->status == 202 || res->status == 422)) {
            latencies.push_back(
                std::chrono::duration_cast<std::chrono::nanoseconds>(
                    steady_clock::now() - req_start)
                    .count());
            const auto doc = nlohmann::json::parse(res->body);
            accepted += doc.value("accepted", 0);
            rejected += doc.at("rejected").size();
            return;
          }
          ++failures;
          std::this_thread::sleep_for(
              std::chrono::milliseconds(50 * (attempt + 1)));
        }
        all_ok = false;
      };

      try {
        for (int i = 0; i < total_samples; ++i) {
          if (options.realtime) {
            std::this_thread::sleep_until(start + i * sample_period);
          }
          Point3 disp;
          if (options.scenario.kind == ScenarioKind::replay) {
            const auto& samples = replay[device_id];
            if (static_cast<size_t>(i) >= samples.size()) {
              throw ReplayExhausted("replay data exhausted for " + device_id);
            }
            disp = samples[i];
          } else {
            disp = scenario_sample(options.scenario, config, node_id,
                                   static_cast<double>(i) / options.rate_hz);
          }
          const int64_t t_ms =
              t0_ms + static_cast<int64_t>(std::llround(i * 1000.0 /
                                                        options.rate_hz));
          batch.push_back({{"t_ms", t_ms},
                           {"dx_m", disp.x},
                           {"dy_m", disp.y},
                           {"dz_m", disp.z}});
          ++sent;
          if (static_cast<int>(batch.size()) >= options.batch_size) {
            post_batch();
          }
        }
        post_batch();
      } catch (const std::exception&) {
        all_ok = false;
      }

      std::lock_guard lock(report_mutex);
      report.samples_sent += sent;
      report.samples_accepted += accepted;
      report.samples_rejected += rejected;
      report.requests += requests;
      report.request_failures += failures;
      report.request_latencies_ns.insert(report.request_latencies_ns.end(),
                                         latencies.begin(), latencies.end());
    });
  }
  for (auto& t : threads) t.join();

  std::sort(report.request_latencies_ns.begin(),
            report.request_latencies_ns.end());
  report.complete = all_ok && report.samples_sent ==
                                  static_cast<uint64_t>(total_samples) *
                                      devices.size();
  return report;
}

}  // namespace shmpose
