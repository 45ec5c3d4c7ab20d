#pragma once

#include <json.hpp>

#include "shmpose/registry.hpp"

// JSON document conversions shared by the store, the HTTP gateway and the
// stream hub. All documents use explicit field order so saved files are
// byte-stable.

namespace shmpose {

using ordered_json = nlohmann::ordered_json;

ordered_json point_to_json(const Point3& p);
Point3 point_from_json(const nlohmann::json& j);

ordered_json model_to_json(const StructuralModel& model);
StructuralModel model_from_json(const nlohmann::json& j);

ordered_json binding_to_json(const SensorBinding& binding);
SensorBinding binding_from_json(const nlohmann::json& j);

ordered_json thresholds_to_json(const ThresholdConfig& config);
ThresholdConfig thresholds_from_json(const nlohmann::json& j);

ordered_json runtime_config_to_json(const RuntimeConfig& config);

}  // namespace shmpose
