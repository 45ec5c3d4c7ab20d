#pragma once

#include <string>

#include "shmpose/registry.hpp"

// The two-level frame used across the integration tests: 4 ground nodes,
// 4 nodes per level, 8 vertical columns in 4 chains of 2, one device per
// non-ground joint (8 devices).

namespace shmpose::testing {

inline StructuralModel two_level_frame(const std::string& structure_id = "s1",
                                       double column_length = 3.0,
                                       double scale = 1.0) {
  StructuralModel model;
  model.structure_id = structure_id;
  model.scale_factor = 1.0;
  const double s = scale;
  const double footprint[4][2] = {{0, 0}, {4, 0}, {4, 4}, {0, 4}};
  for (int i = 0; i < 4; ++i) {
    const std::string n = std::to_string(i + 1);
    const double x = footprint[i][0] * s;
    const double y = footprint[i][1] * s;
    model.nodes.push_back({"G" + n, {x, y, 0}, true});
    model.nodes.push_back({"L1-N" + n, {x, y, column_length * s}, false});
    model.nodes.push_back({"L2-N" + n, {x, y, 2 * column_length * s}, false});
    model.columns.push_back({"c" + n + "a", "G" + n, "L1-N" + n});
    model.columns.push_back({"c" + n + "b", "L1-N" + n, "L2-N" + n});
    model.chains.push_back({"c" + n + "a", "c" + n + "b"});
  }
  return model;
}

inline std::string device_for(int index) {  // 0..7
  return "dev-00" + std::to_string(index + 1);
}

inline std::string node_for(int index) {  // 0..7 -> L1-N1..4, L2-N1..4
  const int corner = index % 4 + 1;
  const int level = index / 4 + 1;
  return "L" + std::to_string(level) + "-N" + std::to_string(corner);
}

inline void bind_eight_devices(Registry& registry,
                               const std::string& structure_id = "s1") {
  for (int i = 0; i < 8; ++i) {
    registry.upsert_binding(
        {device_for(i), structure_id, node_for(i), true, 0});
  }
}

}  // namespace shmpose::testing
