#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "shmpose/kinematics.hpp"

// Document store for structural models, sensor bindings and thresholds.
// Mutations are serialized; readers get immutable RuntimeConfig snapshots.

namespace shmpose {

struct NodeSpec {
  std::string node_id;
  Point3 rest_position;
  bool is_ground = false;

  friend bool operator==(const NodeSpec&, const NodeSpec&) = default;
};

struct ColumnSpec {
  std::string column_id;
  std::string bottom_node_id;
  std::string top_node_id;

  friend bool operator==(const ColumnSpec&, const ColumnSpec&) = default;
};

struct StructuralModel {
  std::string structure_id;
  std::vector<NodeSpec> nodes;
  std::vector<ColumnSpec> columns;
  std::vector<std::vector<std::string>> chains;  // ordered column_ids
  double scale_factor = 1.0;

  friend bool operator==(const StructuralModel&,
                         const StructuralModel&) = default;
};

struct SensorBinding {
  std::string device_id;
  std::string structure_id;
  std::string node_id;
  bool active = true;
  int64_t updated_at_ms = 0;

  friend bool operator==(const SensorBinding&, const SensorBinding&) = default;
};

struct ThresholdConfig {
  std::string structure_id;
  double max_dx = 0.0;  // meters, per-axis maxima
  double max_dy = 0.0;
  double max_dz = 0.0;

  friend bool operator==(const ThresholdConfig&,
                         const ThresholdConfig&) = default;
};

struct ResolvedColumn {
  std::string column_id;
  std::string bottom_node_id;
  std::string top_node_id;
  ColumnGeometry geometry;
};

struct ResolvedChain {
  std::string base_node_id;
  Point3 base_rest;
  std::vector<ResolvedColumn> columns;
};

// Immutable view the engine computes against.
struct RuntimeConfig {
  std::string structure_id;
  std::vector<ResolvedChain> chains;
  std::map<std::string, std::string> node_to_device;
  std::map<std::string, std::string> device_to_node;
  std::set<std::string> unbound_nodes;  // non-ground nodes without a device
  std::optional<ThresholdConfig> thresholds;
  double scale_factor = 1.0;
  uint64_t config_version = 0;
};

class RegistryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public RegistryError {
 public:
  explicit ValidationError(const std::vector<std::string>& violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

class ConflictError : public RegistryError {
 public:
  using RegistryError::RegistryError;
};

class NotFoundError : public RegistryError {
 public:
  using RegistryError::RegistryError;
};

class IoError : public RegistryError {
 public:
  using RegistryError::RegistryError;
};

class FormatError : public RegistryError {
 public:
  using RegistryError::RegistryError;
};

// Returns the list of invariant violations, empty when the model is valid.
std::vector<std::string> validate_model(const StructuralModel& model);

class Registry {
 public:
  uint64_t upsert_structure(const StructuralModel& model);
  uint64_t upsert_binding(const SensorBinding& binding);
  uint64_t set_thresholds(const ThresholdConfig& config);

  std::shared_ptr<const RuntimeConfig> resolve_runtime_config(
      const std::string& structure_id) const;

  std::vector<std::string> structure_ids() const;
  StructuralModel get_model(const std::string& structure_id) const;
  std::vector<SensorBinding> get_bindings(
      const std::string& structure_id) const;

  // Active binding lookup across all structures.
  std::optional<SensorBinding> find_active_binding(
      const std::string& device_id) const;

  // On-disk layout: <data_dir>/structures/<id>/{model.json, bindings.json,
  // thresholds.json}. Sample logs live next to them under samples/.
  void save_all(const std::string& data_dir) const;
  void load_all(const std::string& data_dir);

  static std::string samples_dir(const std::string& data_dir,
                                 const std::string& structure_id);

 private:
  struct StructureState {
    StructuralModel model;
    std::vector<SensorBinding> bindings;
    std::optional<ThresholdConfig> thresholds;
    uint64_t version = 0;
    std::shared_ptr<const RuntimeConfig> snapshot;
  };

  void rebuild_snapshot(StructureState& state);

  mutable std::mutex mutex_;
  std::map<std::string, StructureState> structures_;
  uint64_t version_counter_ = 0;
};

}  // namespace shmpose
