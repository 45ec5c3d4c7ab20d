#include "shmpose/hub.hpp"

#include <chrono>

#include "shmpose/json_io.hpp"

namespace shmpose {

ordered_json snapshot_to_wire(const FrameSnapshot& snapshot) {
  ordered_json j;
  j["type"] = "pose_update";
  j["structure_id"] = snapshot.structure_id;
  j["t_ms"] = snapshot.frame_t_ms;
  j["config_version"] = snapshot.config_version;
  j["columns"] = ordered_json::array();
  for (const auto& col : snapshot.columns) {
    j["columns"].push_back(
        {{"column_id", col.column_id},
         {"r_y_rad", col.pose.r_y},
         {"t_x_rad", col.pose.t_x},
         {"center_translation_m", point_to_json(col.pose.center_translation)},
         {"z_residual_m", col.z_residual}});
  }
  j["nodes"] = ordered_json::array();
  for (const auto& node : snapshot.nodes) {
    j["nodes"].push_back(
        {{"node_id", node.node_id}, {"position_m", point_to_json(node.position)}});
  }
  if (!snapshot.failed_chains.empty()) {
    j["failed_chains"] = ordered_json::array();
    for (const auto& f : snapshot.failed_chains) {
      j["failed_chains"].push_back(
          {{"chain_index", f.chain_index}, {"reason", f.reason}});
    }
  }
  return j;
}

ordered_json warning_to_wire(const WarningEvent& event) {
  return {{"type", "warning"},
          {"structure_id", event.structure_id},
          {"node_id", event.node_id},
          {"axis", std::string(1, event.axis)},
          {"value_m", event.value},
          {"max_m", event.max},
          {"t_ms", event.frame_t_ms}};
}

std::optional<Subscription::Message> Subscription::next_message() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock,
           [&] { return closed_ || !events_.empty() || latest_pose_; });
  if (!events_.empty()) {
    Message m{std::move(events_.front()), next_sequence_++};
    events_.pop_front();
    return m;
  }
  if (latest_pose_) {
    Message m{std::move(*latest_pose_), next_sequence_++};
    latest_pose_.reset();
    return m;
  }
  return std::nullopt;  // closed and drained
}

std::optional<Subscription::Message> Subscription::next_message_for(
    std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  cv_.wait_for(lock, timeout,
               [&] { return closed_ || !events_.empty() || latest_pose_; });
  if (!events_.empty()) {
    Message m{std::move(events_.front()), next_sequence_++};
    events_.pop_front();
    return m;
  }
  if (latest_pose_) {
    Message m{std::move(*latest_pose_), next_sequence_++};
    latest_pose_.reset();
    return m;
  }
  return std::nullopt;
}

std::optional<Subscription::Message> Subscription::try_next_message() {
  std::unique_lock lock(mutex_);
  if (!events_.empty()) {
    Message m{std::move(events_.front()), next_sequence_++};
    events_.pop_front();
    return m;
  }
  if (latest_pose_) {
    Message m{std::move(*latest_pose_), next_sequence_++};
    latest_pose_.reset();
    return m;
  }
  return std::nullopt;
}

void Subscription::close() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool Subscription::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

bool Subscription::offer_pose(const std::string& text, int64_t t_ms) {
  {
    std::lock_guard lock(mutex_);
    if (closed_) return false;
    // Conflate: overwrite any undelivered pose, never go back in time.
    if (t_ms <= latest_pose_t_ms_) return true;
    latest_pose_ = text;
    latest_pose_t_ms_ = t_ms;
  }
  cv_.notify_one();
  return true;
}

bool Subscription::offer_event(const std::string& text) {
  {
    std::lock_guard lock(mutex_);
    if (closed_) return false;
    events_.push_back(text);
  }
  cv_.notify_one();
  return true;
}

StreamHub::StreamHub(std::function<bool(const std::string&)> structure_exists,
                     StreamHubOptions options)
    : structure_exists_(std::move(structure_exists)),
      options_(options) {}

std::shared_ptr<Subscription> StreamHub::subscribe(
    const std::string& structure_id) {
  auto sub = std::make_shared<Subscription>();
  sub->structure_id_ = structure_id;
  sub->connected_at_ms_ =
      std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::system_clock::now().time_since_epoch())
          .count();

  if (structure_exists_ && !structure_exists_(structure_id)) {
    sub->offer_event(ordered_json{{"type", "error"},
                                  {"structure_id", structure_id},
                                  {"message", "unknown structure"}}
                         .dump());
    std::lock_guard lock(mutex_);
    subscriptions_.push_back(sub);
    return sub;
  }

  std::lock_guard lock(mutex_);
  const auto it = last_pose_.find(structure_id);
  if (it != last_pose_.end()) {
    sub->offer_pose(it->second, last_pose_t_ms_.at(structure_id));
  }
  subscriptions_.push_back(sub);
  return sub;
}

size_t StreamHub::broadcast_snapshot(const FrameSnapshot& snapshot) {
  const std::string text = snapshot_to_wire(snapshot).dump();
  std::lock_guard lock(mutex_);
  last_pose_[snapshot.structure_id] = text;
  last_pose_t_ms_[snapshot.structure_id] = snapshot.frame_t_ms;
  size_t delivered = 0;
  for (const auto& sub : subscriptions_) {
    if (sub->structure_id() != snapshot.structure_id) continue;
    if (sub->offer_pose(text, snapshot.frame_t_ms)) ++delivered;
  }
  prune_closed();
  return delivered;
}

size_t StreamHub::broadcast_warning(const WarningEvent& event) {
  const std::string text = warning_to_wire(event).dump();
  std::lock_guard lock(mutex_);
  size_t delivered = 0;
  for (const auto& sub : subscriptions_) {
    if (sub->structure_id() != event.structure_id) continue;
    bool overflow = false;
    {
      std::lock_guard slock(sub->mutex_);
      if (sub->closed_) continue;
      if (sub->events_.size() >= options_.warning_queue_limit) {
        overflow = true;
      } else {
        sub->events_.push_back(text);
        ++delivered;
      }
    }
    if (overflow) {
      // A consumer that cannot keep up with events is cut off.
      sub->close();
    } else {
      sub->cv_.notify_one();
    }
  }
  prune_closed();
  return delivered;
}

void StreamHub::publish_snapshot(const FrameSnapshot& snapshot) {
  broadcast_snapshot(snapshot);
}

void StreamHub::publish_warning(const WarningEvent& event) {
  broadcast_warning(event);
}

size_t StreamHub::subscriber_count(const std::string& structure_id) const {
  std::lock_guard lock(mutex_);
  size_t n = 0;
  for (const auto& sub : subscriptions_) {
    if (sub->structure_id() == structure_id && !sub->closed()) ++n;
  }
  return n;
}

void StreamHub::prune_closed() {
  std::erase_if(subscriptions_, [](const std::shared_ptr<Subscription>& s) {
    return s->closed();
  });
}

}  // namespace shmpose
