#include "shmpose/registry.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "shmpose/json_io.hpp"

namespace fs = std::filesystem;

namespace shmpose {

namespace {

std::string join_violations(const std::vector<std::string>& violations) {
  std::string out = "model validation failed:";
  for (const auto& v : violations) out += "\n  - " + v;
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out.flush()) throw IoError("write failed for " + path.string());
}

// Parses a whole document, mapping any parse/shape failure to a FormatError
// that names the file and line.
nlohmann::json parse_document(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    size_t line = 1;
    const size_t end = std::min(e.byte, text.size());
    for (size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') ++line;
    }
    throw FormatError(path.string() + ":" + std::to_string(line) + ": " +
                      e.what());
  }
}

}  // namespace

ValidationError::ValidationError(const std::vector<std::string>& violations)
    : RegistryError(join_violations(violations)), violations_(violations) {}

std::vector<std::string> validate_model(const StructuralModel& model) {
  std::vector<std::string> violations;
  if (model.structure_id.empty()) violations.push_back("empty structure_id");
  if (!(model.scale_factor > 0)) {
    violations.push_back("scale_factor must be positive");
  }

  std::map<std::string, const NodeSpec*> nodes;
  for (const auto& node : model.nodes) {
    if (!nodes.emplace(node.node_id, &node).second) {
      violations.push_back("duplicate node_id " + node.node_id);
    }
  }
  std::map<std::string, const ColumnSpec*> columns;
  for (const auto& col : model.columns) {
    if (!columns.emplace(col.column_id, &col).second) {
      violations.push_back("duplicate column_id " + col.column_id);
      continue;
    }
    const auto bottom = nodes.find(col.bottom_node_id);
    const auto top = nodes.find(col.top_node_id);
    if (bottom == nodes.end() || top == nodes.end()) {
      violations.push_back("column " + col.column_id +
                           " references unknown node");
      continue;
    }
    if (norm(top->second->rest_position - bottom->second->rest_position) <=
        0.0) {
      violations.push_back("column " + col.column_id + " has zero rest length");
    }
  }
  for (size_t ci = 0; ci < model.chains.size(); ++ci) {
    const auto& chain = model.chains[ci];
    const std::string label = "chain " + std::to_string(ci);
    if (chain.empty()) {
      violations.push_back(label + " is empty");
      continue;
    }
    bool resolvable = true;
    for (const auto& column_id : chain) {
      if (!columns.count(column_id)) {
        violations.push_back(label + " references unknown column " + column_id);
        resolvable = false;
      }
    }
    if (!resolvable) continue;
    for (size_t k = 0; k + 1 < chain.size(); ++k) {
      if (columns.at(chain[k])->top_node_id !=
          columns.at(chain[k + 1])->bottom_node_id) {
        violations.push_back(label + " not contiguous between " + chain[k] +
                             " and " + chain[k + 1]);
      }
    }
    const auto& base_id = columns.at(chain.front())->bottom_node_id;
    const auto base = nodes.find(base_id);
    if (base != nodes.end() && !base->second->is_ground) {
      violations.push_back(label + " base node " + base_id + " is not ground");
    }
  }
  return violations;
}

void Registry::rebuild_snapshot(StructureState& state) {
  auto config = std::make_shared<RuntimeConfig>();
  config->structure_id = state.model.structure_id;
  config->scale_factor = state.model.scale_factor;
  config->config_version = state.version;
  config->thresholds = state.thresholds;

  std::map<std::string, const NodeSpec*> nodes;
  for (const auto& node : state.model.nodes) nodes[node.node_id] = &node;
  std::map<std::string, const ColumnSpec*> columns;
  for (const auto& col : state.model.columns) columns[col.column_id] = &col;

  for (const auto& chain : state.model.chains) {
    ResolvedChain resolved;
    const auto* first = columns.at(chain.front());
    resolved.base_node_id = first->bottom_node_id;
    resolved.base_rest = nodes.at(first->bottom_node_id)->rest_position;
    for (const auto& column_id : chain) {
      const auto* col = columns.at(column_id);
      const Point3 bottom = nodes.at(col->bottom_node_id)->rest_position;
      const Point3 top = nodes.at(col->top_node_id)->rest_position;
      resolved.columns.push_back(
          {column_id, col->bottom_node_id, col->top_node_id,
           ColumnGeometry{norm(top - bottom), bottom, top}});
    }
    config->chains.push_back(std::move(resolved));
  }

  for (const auto& binding : state.bindings) {
    if (!binding.active) continue;
    config->node_to_device[binding.node_id] = binding.device_id;
    config->device_to_node[binding.device_id] = binding.node_id;
  }
  for (const auto& node : state.model.nodes) {
    if (!node.is_ground && !config->node_to_device.count(node.node_id)) {
      config->unbound_nodes.insert(node.node_id);
    }
  }
  state.snapshot = std::move(config);
}

uint64_t Registry::upsert_structure(const StructuralModel& model) {
  const auto violations = validate_model(model);
  if (!violations.empty()) throw ValidationError(violations);

  std::lock_guard lock(mutex_);
  auto& state = structures_[model.structure_id];
  state.model = model;
  state.version = ++version_counter_;
  rebuild_snapshot(state);
  return state.version;
}

uint64_t Registry::upsert_binding(const SensorBinding& binding) {
  std::lock_guard lock(mutex_);
  auto it = structures_.find(binding.structure_id);
  if (it == structures_.end()) {
    throw NotFoundError("unknown structure " + binding.structure_id);
  }
  auto& state = it->second;
  const bool node_exists =
      std::any_of(state.model.nodes.begin(), state.model.nodes.end(),
                  [&](const NodeSpec& n) { return n.node_id == binding.node_id; });
  if (!node_exists) {
    throw NotFoundError("unknown node " + binding.node_id + " in structure " +
                        binding.structure_id);
  }
  if (binding.active) {
    // A device active on another structure must be unbound there first;
    // within its own structure an upsert moves it.
    for (const auto& [sid, other] : structures_) {
      if (sid == binding.structure_id) continue;
      for (const auto& b : other.bindings) {
        if (b.active && b.device_id == binding.device_id) {
          throw ConflictError("device " + binding.device_id +
                              " already active on structure " + sid);
        }
      }
    }
    for (const auto& b : state.bindings) {
      if (b.active && b.node_id == binding.node_id &&
          b.device_id != binding.device_id) {
        throw ConflictError("node " + binding.node_id +
                            " already bound to device " + b.device_id);
      }
    }
  }
  std::erase_if(state.bindings, [&](const SensorBinding& b) {
    return b.device_id == binding.device_id;
  });
  state.bindings.push_back(binding);
  state.version = ++version_counter_;
  rebuild_snapshot(state);
  return state.version;
}

uint64_t Registry::set_thresholds(const ThresholdConfig& config) {
  if (!(config.max_dx > 0) || !(config.max_dy > 0) || !(config.max_dz > 0)) {
    throw ValidationError({"threshold maxima must be positive"});
  }
  std::lock_guard lock(mutex_);
  auto it = structures_.find(config.structure_id);
  if (it == structures_.end()) {
    throw NotFoundError("unknown structure " + config.structure_id);
  }
  it->second.thresholds = config;
  it->second.version = ++version_counter_;
  rebuild_snapshot(it->second);
  return it->second.version;
}

std::shared_ptr<const RuntimeConfig> Registry::resolve_runtime_config(
    const std::string& structure_id) const {
  std::lock_guard lock(mutex_);
  auto it = structures_.find(structure_id);
  if (it == structures_.end()) {
    throw NotFoundError("unknown structure " + structure_id);
  }
  return it->second.snapshot;
}

std::vector<std::string> Registry::structure_ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, _] : structures_) ids.push_back(id);
  return ids;
}

StructuralModel Registry::get_model(const std::string& structure_id) const {
  std::lock_guard lock(mutex_);
  auto it = structures_.find(structure_id);
  if (it == structures_.end()) {
    throw NotFoundError("unknown structure " + structure_id);
  }
  return it->second.model;
}

std::vector<SensorBinding> Registry::get_bindings(
    const std::string& structure_id) const {
  std::lock_guard lock(mutex_);
  auto it = structures_.find(structure_id);
  if (it == structures_.end()) {
    throw NotFoundError("unknown structure " + structure_id);
  }
  return it->second.bindings;
}

std::optional<SensorBinding> Registry::find_active_binding(
    const std::string& device_id) const {
  std::lock_guard lock(mutex_);
  for (const auto& [sid, state] : structures_) {
    for (const auto& b : state.bindings) {
      if (b.active && b.device_id == device_id) return b;
    }
  }
  return std::nullopt;
}

void Registry::save_all(const std::string& data_dir) const {
  std::lock_guard lock(mutex_);
  std::error_code ec;
  for (const auto& [id, state] : structures_) {
    const fs::path dir = fs::path(data_dir) / "structures" / id;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string());

    ordered_json model = model_to_json(state.model);
    model["config_version"] = state.version;
    write_file(dir / "model.json", model.dump(2) + "\n");

    ordered_json bindings;
    bindings["bindings"] = ordered_json::array();
    for (const auto& b : state.bindings) {
      bindings["bindings"].push_back(binding_to_json(b));
    }
    write_file(dir / "bindings.json", bindings.dump(2) + "\n");

    if (state.thresholds) {
      write_file(dir / "thresholds.json",
                 thresholds_to_json(*state.thresholds).dump(2) + "\n");
    }
  }
}

void Registry::load_all(const std::string& data_dir) {
  std::lock_guard lock(mutex_);
  structures_.clear();
  version_counter_ = 0;

  const fs::path root = fs::path(data_dir) / "structures";
  if (!fs::exists(root)) return;

  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    const fs::path dir = entry.path();
    const fs::path model_path = dir / "model.json";

    const auto doc = parse_document(model_path);
    StructureState state;
    try {
      state.model = model_from_json(doc);
      state.version = doc.value("config_version", uint64_t{0});
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(model_path.string() + ": " + e.what());
    }
    const auto violations = validate_model(state.model);
    if (!violations.empty()) {
      throw FormatError(model_path.string() + ": " +
                        join_violations(violations));
    }

    const fs::path bindings_path = dir / "bindings.json";
    if (fs::exists(bindings_path)) {
      const auto bdoc = parse_document(bindings_path);
      try {
        for (const auto& b : bdoc.at("bindings")) {
          state.bindings.push_back(binding_from_json(b));
        }
      } catch (const nlohmann::json::exception& e) {
        throw FormatError(bindings_path.string() + ": " + e.what());
      }
    }
    const fs::path thresholds_path = dir / "thresholds.json";
    if (fs::exists(thresholds_path)) {
      const auto tdoc = parse_document(thresholds_path);
      try {
        state.thresholds = thresholds_from_json(tdoc);
      } catch (const nlohmann::json::exception& e) {
        throw FormatError(thresholds_path.string() + ": " + e.what());
      }
    }

    version_counter_ = std::max(version_counter_, state.version);
    rebuild_snapshot(state);
    structures_[state.model.structure_id] = std::move(state);
  }
}

std::string Registry::samples_dir(const std::string& data_dir,
                                  const std::string& structure_id) {
  return (fs::path(data_dir) / "structures" / structure_id / "samples")
      .string();
}

}  // namespace shmpose
