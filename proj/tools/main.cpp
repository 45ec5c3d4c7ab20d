#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <csignal>
#include <fstream>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include "shmpose/engine.hpp"
#include "shmpose/gateway.hpp"
#include "shmpose/hub.hpp"
#include "shmpose/json_io.hpp"
#include "shmpose/registry.hpp"
#include "shmpose/simulator.hpp"
#include "shmpose/stream_server.hpp"

namespace {

std::atomic<bool> g_interrupted{false};

void handle_signal(int) { g_interrupted = true; }

struct Target {
  std::string host = "127.0.0.1";
  uint16_t port = 8080;
};

Target parse_target(std::string target) {
  if (target.rfind("http://", 0) == 0) target = target.substr(7);
  if (target.rfind("ws://", 0) == 0) target = target.substr(5);
  Target t;
  const auto colon = target.rfind(':');
  if (colon == std::string::npos) {
    t.host = target;
  } else {
    t.host = target.substr(0, colon);
    t.port = static_cast<uint16_t>(std::stoi(target.substr(colon + 1)));
  }
  return t;
}

int print_response(const httplib::Result& res) {
  if (!res) {
    std::cerr << "error: request failed: " << httplib::to_string(res.error())
              << "\n";
    return 1;
  }
  std::cout << res->body << "\n";
  return res->status < 400 ? 0 : 1;
}

int run_serve(const std::string& addr, uint16_t port, uint16_t stream_port,
              const std::string& data_dir, int64_t publish_period_ms) {
  shmpose::Registry registry;
  registry.load_all(data_dir);

  shmpose::StreamHub hub([&](const std::string& id) {
    try {
      registry.resolve_runtime_config(id);
      return true;
    } catch (const shmpose::NotFoundError&) {
      return false;
    }
  });

  shmpose::EngineOptions engine_options;
  engine_options.data_dir = data_dir;
  shmpose::MonitoringEngine engine(registry, &hub, engine_options);

  shmpose::Gateway gateway(registry, engine);
  gateway.start(addr, port);

  shmpose::StreamServer stream_server(hub);
  stream_server.start(addr, stream_port);

  std::cout << "gateway listening on " << addr << ":" << gateway.port()
            << "\n";
  std::cout << "stream endpoint ws://" << addr << ":" << stream_server.port()
            << "/api/v1/stream\n";

  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);

  // Structures added at runtime get their publish loop on the next sweep.
  while (!g_interrupted) {
    for (const auto& id : registry.structure_ids()) {
      engine.start(id, publish_period_ms);
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(500));
  }

  std::cout << "shutting down\n";
  engine.stop();
  stream_server.stop();
  gateway.stop();
  registry.save_all(data_dir);
  const auto counters = engine.counters();
  std::cout << "samples accepted: " << counters.samples_accepted
            << ", dropped out-of-order: "
            << counters.samples_dropped_out_of_order
            << ", frames: " << counters.frames_emitted << "\n";
  return 0;
}

int run_tail(const Target& target, const std::string& structure_id) {
  shmpose::StreamTail tail;
  try {
    tail.connect(target.host, target.port, structure_id);
  } catch (const std::exception& e) {
    std::cerr << "error: cannot connect to stream: " << e.what() << "\n";
    return 1;
  }
  std::signal(SIGINT, handle_signal);
  constexpr double kDegPerRad = 180.0 / std::numbers::pi;
  while (!g_interrupted) {
    const auto message = tail.read_message();
    if (!message) {
      if (g_interrupted) break;
      std::cerr << "error: stream connection lost\n";
      return 1;
    }
    const auto j = nlohmann::json::parse(*message, nullptr, false);
    if (!j.is_object()) continue;
    const std::string type = j.value("type", "");
    if (type == "pose_update") {
      std::ostringstream line;
      line << j.value("t_ms", int64_t{0});
      for (const auto& col : j.value("columns", nlohmann::json::array())) {
        line << "  " << col.value("column_id", "?") << " r_y="
             << col.value("r_y_rad", 0.0) * kDegPerRad << "deg t_x="
             << col.value("t_x_rad", 0.0) * kDegPerRad << "deg c=("
             << col["center_translation_m"][0].get<double>() << ","
             << col["center_translation_m"][1].get<double>() << ","
             << col["center_translation_m"][2].get<double>() << ")";
      }
      std::cout << line.str() << "\n";
    } else if (type == "warning") {
      std::cout << "!! WARNING " << j.value("node_id", "?") << " axis "
                << j.value("axis", "?") << " |" << j.value("value_m", 0.0)
                << "| > " << j.value("max_m", 0.0) << " at "
                << j.value("t_ms", int64_t{0}) << "\n";
    } else if (type == "error") {
      std::cerr << "error event: " << *message << "\n";
      return 1;
    }
  }
  return 0;
}

void print_report(const shmpose::SimulationReport& report) {
  nlohmann::ordered_json j;
  j["samples_sent"] = report.samples_sent;
  j["samples_accepted"] = report.samples_accepted;
  j["samples_rejected"] = report.samples_rejected;
  j["requests"] = report.requests;
  j["request_failures"] = report.request_failures;
  j["complete"] = report.complete;
  if (!report.request_latencies_ns.empty()) {
    const auto& lat = report.request_latencies_ns;
    j["latency_ms"] = {
        {"p50", lat[lat.size() / 2] / 1e6},
        {"p99", lat[std::min(lat.size() - 1, lat.size() * 99 / 100)] / 1e6},
        {"max", lat.back() / 1e6}};
  }
  std::cout << j.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Real-time structural monitoring server and device simulator"};
  app.require_subcommand(1);

  std::string target_str = "127.0.0.1:8080";
  std::string structure_id = "s1";

  // serve
  auto* serve = app.add_subcommand("serve", "Run gateway, engine and hub");
  std::string addr = "0.0.0.0";
  uint16_t port = 8080;
  uint16_t stream_port = 8081;
  std::string data_dir = "data";
  int64_t publish_period_ms = 50;
  serve->add_option("--addr", addr, "Bind address");
  serve->add_option("--port", port, "Gateway HTTP port");
  serve->add_option("--stream-port", stream_port, "Stream (WebSocket) port");
  serve->add_option("--data-dir", data_dir, "Document store directory");
  serve->add_option("--publish-period-ms", publish_period_ms,
                    "Snapshot cadence");

  // model apply
  auto* model = app.add_subcommand("model", "Structural model operations");
  auto* model_apply = model->add_subcommand("apply", "Upload a model file");
  std::string model_file;
  model_apply->add_option("file", model_file, "StructuralModel JSON document")
      ->required();
  model_apply->add_option("--target", target_str, "Gateway host:port");

  // bind
  auto* bind = app.add_subcommand("bind", "Bind a device to a node");
  std::string device_id, node_id;
  bind->add_option("device", device_id)->required();
  bind->add_option("node", node_id)->required();
  bind->add_option("--structure", structure_id, "Structure id");
  bind->add_option("--target", target_str, "Gateway host:port");

  // thresholds
  auto* thresholds = app.add_subcommand("thresholds", "Set warning maxima");
  double max_dx = 0, max_dy = 0, max_dz = 0;
  thresholds->add_option("--max-dx", max_dx, "meters")->required();
  thresholds->add_option("--max-dy", max_dy, "meters")->required();
  thresholds->add_option("--max-dz", max_dz, "meters")->required();
  thresholds->add_option("--structure", structure_id, "Structure id");
  thresholds->add_option("--target", target_str, "Gateway host:port");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Run a simulated fleet");
  shmpose::SimulationOptions sim;
  std::string scenario_kind = "harmonic";
  double raw_dx = 0, raw_dy = 0, raw_dz = 0;
  std::string replay_file;
  simulate->add_option("--target", target_str, "Gateway host:port");
  simulate->add_option("--structure", structure_id, "Structure id");
  simulate->add_option("--devices", sim.device_count, "Device count");
  simulate->add_option("--rate-hz", sim.rate_hz, "Sampling rate")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--duration-s", sim.duration_s, "Run duration")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--batch-size", sim.batch_size, "Samples per POST")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--scenario", scenario_kind,
                       "harmonic | step | replay | raw");
  simulate->add_option("--amplitude-rad", sim.scenario.amplitude_ry_rad,
                       "r_y amplitude");
  simulate->add_option("--tx-amplitude-rad", sim.scenario.amplitude_tx_rad,
                       "t_x amplitude");
  simulate->add_option("--freq-hz", sim.scenario.freq_hz, "Sway frequency")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--phase-rad", sim.scenario.phase_rad, "Phase");
  simulate->add_option("--step-time-s", sim.scenario.step_time_s,
                       "Step scenario onset");
  simulate->add_option("--raw-dx", raw_dx, "Raw scenario dx (m)");
  simulate->add_option("--raw-dy", raw_dy, "Raw scenario dy (m)");
  simulate->add_option("--raw-dz", raw_dz, "Raw scenario dz (m)");
  simulate->add_option("--replay-file", replay_file, "Sample log to replay");

  // tail
  auto* tail = app.add_subcommand("tail", "Print the live stream");
  tail->add_option("--target", target_str, "Stream host:port");
  tail->add_option("--structure", structure_id, "Structure id");

  // export
  auto* export_cmd = app.add_subcommand("export", "Dump recorded frames");
  int64_t from_ms = 0;
  int64_t to_ms = std::numeric_limits<int64_t>::max();
  export_cmd->add_option("--target", target_str, "Gateway host:port");
  export_cmd->add_option("--structure", structure_id, "Structure id");
  export_cmd->add_option("--from-ms", from_ms, "Range start (epoch ms)");
  export_cmd->add_option("--to-ms", to_ms, "Range end (epoch ms)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (serve->parsed()) {
      return run_serve(addr, port, stream_port, data_dir, publish_period_ms);
    }

    const Target target = parse_target(target_str);
    if (model_apply->parsed()) {
      std::ifstream in(model_file);
      if (!in) {
        std::cerr << "error: cannot read " << model_file << "\n";
        return 1;
      }
      nlohmann::json doc;
      try {
        in >> doc;
        shmpose::model_from_json(doc);  // local validation before sending
      } catch (const std::exception& e) {
        std::cerr << "error: invalid model file: " << e.what() << "\n";
        return 1;
      }
      httplib::Client client(target.host, target.port);
      return print_response(client.Put(
          "/api/v1/structures/" + doc.at("structure_id").get<std::string>(),
          doc.dump(), "application/json"));
    }
    if (bind->parsed()) {
      httplib::Client client(target.host, target.port);
      return print_response(client.Put(
          "/api/v1/structures/" + structure_id + "/bindings/" + device_id,
          nlohmann::json{{"node_id", node_id}}.dump(), "application/json"));
    }
    if (thresholds->parsed()) {
      httplib::Client client(target.host, target.port);
      return print_response(client.Put(
          "/api/v1/structures/" + structure_id + "/thresholds",
          nlohmann::json{{"max_dx_m", max_dx},
                         {"max_dy_m", max_dy},
                         {"max_dz_m", max_dz}}
              .dump(),
          "application/json"));
    }
    if (simulate->parsed()) {
      sim.host = target.host;
      sim.port = target.port;
      sim.structure_id = structure_id;
      if (scenario_kind == "harmonic") {
        sim.scenario.kind = shmpose::ScenarioKind::harmonic;
      } else if (scenario_kind == "step") {
        sim.scenario.kind = shmpose::ScenarioKind::step;
      } else if (scenario_kind == "raw") {
        sim.scenario.kind = shmpose::ScenarioKind::raw;
        sim.scenario.raw_displacement = {raw_dx, raw_dy, raw_dz};
      } else if (scenario_kind == "replay") {
        sim.scenario.kind = shmpose::ScenarioKind::replay;
        sim.scenario.replay_file = replay_file;
      } else {
        std::cerr << "error: unknown scenario " << scenario_kind << "\n";
        return 1;
      }
      const auto report = shmpose::run_simulation(sim);
      print_report(report);
      return report.complete ? 0 : 1;
    }
    if (tail->parsed()) {
      return run_tail(target, structure_id);
    }
    if (export_cmd->parsed()) {
      httplib::Client client(target.host, target.port);
      auto res = client.Get("/api/v1/structures/" + structure_id +
                            "/export?from_ms=" + std::to_string(from_ms) +
                            "&to_ms=" + std::to_string(to_ms));
      if (!res) {
        std::cerr << "error: request failed\n";
        return 1;
      }
      std::cout << res->body;
      return res->status < 400 ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
