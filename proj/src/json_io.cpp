#include "shmpose/json_io.hpp"

namespace shmpose {

ordered_json point_to_json(const Point3& p) {
  return ordered_json::array({p.x, p.y, p.z});
}

Point3 point_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw FormatError("point must be a 3-element array");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

ordered_json model_to_json(const StructuralModel& model) {
  ordered_json j;
  j["structure_id"] = model.structure_id;
  j["scale_factor"] = model.scale_factor;
  j["nodes"] = ordered_json::array();
  for (const auto& node : model.nodes) {
    j["nodes"].push_back({{"node_id", node.node_id},
                          {"rest_position_m", point_to_json(node.rest_position)},
                          {"is_ground", node.is_ground}});
  }
  j["columns"] = ordered_json::array();
  for (const auto& col : model.columns) {
    j["columns"].push_back({{"column_id", col.column_id},
                            {"bottom_node_id", col.bottom_node_id},
                            {"top_node_id", col.top_node_id}});
  }
  j["chains"] = model.chains;
  return j;
}

StructuralModel model_from_json(const nlohmann::json& j) {
  StructuralModel model;
  model.structure_id = j.at("structure_id").get<std::string>();
  model.scale_factor = j.value("scale_factor", 1.0);
  for (const auto& n : j.at("nodes")) {
    model.nodes.push_back({n.at("node_id").get<std::string>(),
                           point_from_json(n.at("rest_position_m")),
                           n.value("is_ground", false)});
  }
  for (const auto& c : j.at("columns")) {
    model.columns.push_back({c.at("column_id").get<std::string>(),
                             c.at("bottom_node_id").get<std::string>(),
                             c.at("top_node_id").get<std::string>()});
  }
  model.chains =
      j.at("chains").get<std::vector<std::vector<std::string>>>();
  return model;
}

ordered_json binding_to_json(const SensorBinding& binding) {
  return {{"device_id", binding.device_id},
          {"structure_id", binding.structure_id},
          {"node_id", binding.node_id},
          {"active", binding.active},
          {"updated_at_ms", binding.updated_at_ms}};
}

SensorBinding binding_from_json(const nlohmann::json& j) {
  return {j.at("device_id").get<std::string>(),
          j.at("structure_id").get<std::string>(),
          j.at("node_id").get<std::string>(), j.at("active").get<bool>(),
          j.at("updated_at_ms").get<int64_t>()};
}

ordered_json thresholds_to_json(const ThresholdConfig& config) {
  return {{"structure_id", config.structure_id},
          {"max_dx_m", config.max_dx},
          {"max_dy_m", config.max_dy},
          {"max_dz_m", config.max_dz}};
}

ThresholdConfig thresholds_from_json(const nlohmann::json& j) {
  return {j.at("structure_id").get<std::string>(),
          j.at("max_dx_m").get<double>(), j.at("max_dy_m").get<double>(),
          j.at("max_dz_m").get<double>()};
}

ordered_json runtime_config_to_json(const RuntimeConfig& config) {
  ordered_json j;
  j["structure_id"] = config.structure_id;
  j["config_version"] = config.config_version;
  j["scale_factor"] = config.scale_factor;
  j["chains"] = ordered_json::array();
  for (const auto& chain : config.chains) {
    ordered_json cj;
    cj["base_node_id"] = chain.base_node_id;
    cj["base_rest_m"] = point_to_json(chain.base_rest);
    cj["columns"] = ordered_json::array();
    for (const auto& col : chain.columns) {
      cj["columns"].push_back(
          {{"column_id", col.column_id},
           {"bottom_node_id", col.bottom_node_id},
           {"top_node_id", col.top_node_id},
           {"length_m", col.geometry.length},
           {"rest_bottom_m", point_to_json(col.geometry.rest_bottom)},
           {"rest_top_m", point_to_json(col.geometry.rest_top)}});
    }
    j["chains"].push_back(cj);
  }
  j["node_to_device"] = config.node_to_device;
  j["unbound_nodes"] = config.unbound_nodes;
  if (config.thresholds) {
    j["thresholds"] = thresholds_to_json(*config.thresholds);
  } else {
    j["thresholds"] = nullptr;
  }
  return j;
}

}  // namespace shmpose
