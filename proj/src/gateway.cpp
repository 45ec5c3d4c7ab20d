#include "shmpose/gateway.hpp"

#include <httplib.h>

#include <chrono>

#include "shmpose/hub.hpp"
#include "shmpose/json_io.hpp"

namespace shmpose {

namespace {

void reply(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status,
                 const std::string& message) {
  reply(res, status, {{"error", message}});
}

// Maps registry exceptions onto HTTP statuses.
template <typename Fn>
void with_registry_errors(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const ValidationError& e) {
    ordered_json body = {{"error", "validation failed"},
                         {"violations", e.violations()}};
    reply(res, 400, body);
  } catch (const NotFoundError& e) {
    reply_error(res, 404, e.what());
  } catch (const ConflictError& e) {
    reply_error(res, 409, e.what());
  } catch (const nlohmann::json::exception& e) {
    reply_error(res, 400, e.what());
  } catch (const FormatError& e) {
    reply_error(res, 400, e.what());
  }
}

int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

struct Gateway::Impl {
  httplib::Server server;
};

Gateway::Gateway(Registry& registry, MonitoringEngine& engine)
    : registry_(registry), engine_(engine), impl_(std::make_unique<Impl>()) {
  auto& server = impl_->server;

  server.Post("/api/v1/ingest", [this](const httplib::Request& req,
                                       httplib::Response& res) {
    const auto start = std::chrono::steady_clock::now();
    const auto body = nlohmann::json::parse(req.body, nullptr, false);
    if (!body.is_object() || !body.contains("device_id") ||
        !body["device_id"].is_string() || !body.contains("samples") ||
        !body["samples"].is_array()) {
      reply_error(res, 400, "expected {device_id, samples[]}");
      return;
    }
    const std::string device_id = body["device_id"].get<std::string>();
    if (!registry_.find_active_binding(device_id)) {
      reply_error(res, 404, "no active binding for device " + device_id);
      return;
    }

    int accepted = 0;
    ordered_json rejected = ordered_json::array();
    int index = 0;
    for (const auto& s : body["samples"]) {
      std::string reason;
      try {
        if (!s.is_object()) throw std::invalid_argument("sample not an object");
        DisplacementSample sample{device_id, s.at("t_ms").get<int64_t>(),
                                  s.at("dx_m").get<double>(),
                                  s.at("dy_m").get<double>(),
                                  s.at("dz_m").get<double>()};
        engine_.accept_sample(sample);
        ++accepted;
      } catch (const OutOfOrderError&) {
        reason = "out_of_order";
      } catch (const UnknownDeviceError&) {
        reason = "unknown_device";
      } catch (const nlohmann::json::exception&) {
        reason = "malformed";
      } catch (const std::invalid_argument&) {
        reason = "not_finite";
      }
      if (!reason.empty()) {
        rejected.push_back({{"index", index}, {"reason", reason}});
      }
      ++index;
    }
    const int status =
        (accepted == 0 && !rejected.empty()) ? 422 : 202;
    reply(res, status, {{"accepted", accepted}, {"rejected", rejected}});

    std::lock_guard lock(metrics_mutex_);
    ingest_latencies_ns_.push_back(
        std::chrono::duration_cast<std::chrono::nanoseconds>(
            std::chrono::steady_clock::now() - start)
            .count());
  });

  server.Put(R"(/api/v1/structures/([^/]+))",
             [this](const httplib::Request& req, httplib::Response& res) {
               with_registry_errors(res, [&] {
                 const auto body = nlohmann::json::parse(req.body);
                 auto model = model_from_json(body);
                 if (model.structure_id != req.matches[1].str()) {
                   reply_error(res, 400,
                               "structure_id in body does not match path");
                   return;
                 }
                 const auto version = registry_.upsert_structure(model);
                 reply(res, 200, {{"config_version", version}});
               });
             });

  server.Get(R"(/api/v1/structures/([^/]+))",
             [this](const httplib::Request& req, httplib::Response& res) {
               with_registry_errors(res, [&] {
                 reply(res, 200,
                       model_to_json(registry_.get_model(req.matches[1].str())));
               });
             });

  server.Put(R"(/api/v1/structures/([^/]+)/bindings/([^/]+))",
             [this](const httplib::Request& req, httplib::Response& res) {
               with_registry_errors(res, [&] {
                 const auto body = nlohmann::json::parse(req.body);
                 SensorBinding binding;
                 binding.device_id = req.matches[2].str();
                 binding.structure_id = req.matches[1].str();
                 binding.node_id = body.at("node_id").get<std::string>();
                 binding.active = body.value("active", true);
                 binding.updated_at_ms = now_ms();
                 const auto version = registry_.upsert_binding(binding);
                 reply(res, 200, {{"config_version", version}});
               });
             });

  server.Put(R"(/api/v1/structures/([^/]+)/thresholds)",
             [this](const httplib::Request& req, httplib::Response& res) {
               with_registry_errors(res, [&] {
                 const auto body = nlohmann::json::parse(req.body);
                 ThresholdConfig config{req.matches[1].str(),
                                        body.at("max_dx_m").get<double>(),
                                        body.at("max_dy_m").get<double>(),
                                        body.at("max_dz_m").get<double>()};
                 const auto version = registry_.set_thresholds(config);
                 reply(res, 200, {{"config_version", version}});
               });
             });

  server.Get(R"(/api/v1/structures/([^/]+)/config)",
             [this](const httplib::Request& req, httplib::Response& res) {
               with_registry_errors(res, [&] {
                 const auto config =
                     registry_.resolve_runtime_config(req.matches[1].str());
                 reply(res, 200, runtime_config_to_json(*config));
               });
             });

  server.Get(
      R"(/api/v1/structures/([^/]+)/export)",
      [this](const httplib::Request& req, httplib::Response& res) {
        with_registry_errors(res, [&] {
          const std::string structure_id = req.matches[1].str();
          registry_.resolve_runtime_config(structure_id);  // 404 check
          int64_t from_ms = 0;
          int64_t to_ms = std::numeric_limits<int64_t>::max();
          try {
            if (req.has_param("from_ms"))
              from_ms = std::stoll(req.get_param_value("from_ms"));
            if (req.has_param("to_ms"))
              to_ms = std::stoll(req.get_param_value("to_ms"));
          } catch (const std::exception&) {
            reply_error(res, 400, "invalid time range parameter");
            return;
          }
          if (from_ms > to_ms) {
            reply_error(res, 400, "from_ms must not exceed to_ms");
            return;
          }
          std::string lines;
          for (const auto& snapshot :
               engine_.recorded_frames(structure_id, from_ms, to_ms)) {
            lines += snapshot_to_wire(snapshot).dump();
            lines += "\n";
          }
          res.status = 200;
          res.set_content(lines, "application/x-ndjson");
        });
      });
}

Gateway::~Gateway() { stop(); }

void Gateway::start(const std::string& address, uint16_t port) {
  stop();
  auto& server = impl_->server;
  if (port == 0) {
    port_ = static_cast<uint16_t>(server.bind_to_any_port(address));
  } else {
    if (!server.bind_to_port(address, port)) {
      throw IoError("cannot bind " + address + ":" + std::to_string(port));
    }
    port_ = port;
  }
  server_thread_ = std::thread([&server] { server.listen_after_bind(); });
  server.wait_until_ready();
}

void Gateway::stop() {
  impl_->server.stop();
  if (server_thread_.joinable()) server_thread_.join();
}

std::vector<int64_t> Gateway::ingest_latencies_ns() const {
  std::lock_guard lock(metrics_mutex_);
  return ingest_latencies_ns_;
}

}  // namespace shmpose
