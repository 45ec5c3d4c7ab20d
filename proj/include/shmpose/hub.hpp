#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "shmpose/engine.hpp"
#include "shmpose/json_io.hpp"

// Fan-out of pose snapshots and warnings to stream subscribers. Pose frames
// are conflated per subscriber (latest wins); warnings use a bounded lossless
// queue with disconnect-on-overflow.

namespace shmpose {

ordered_json snapshot_to_wire(const FrameSnapshot& snapshot);
ordered_json warning_to_wire(const WarningEvent& event);

class StreamHub;

// One subscriber's delivery state. A transport (or test) drains it by
// calling next_message, which blocks until something is available.
class Subscription {
 public:
  struct Message {
    std::string text;
    uint64_t sequence = 0;
  };

  // Blocks; nullopt means the subscription is closed.
  std::optional<Message> next_message();
  // Bounded wait; nullopt on timeout or close (check closed() to tell apart).
  std::optional<Message> next_message_for(std::chrono::milliseconds timeout);
  // Non-blocking variant.
  std::optional<Message> try_next_message();
  void close();
  bool closed() const;

  const std::string& structure_id() const { return structure_id_; }
  int64_t connected_at_ms() const { return connected_at_ms_; }

 private:
  friend class StreamHub;

  bool offer_pose(const std::string& text, int64_t t_ms);
  bool offer_event(const std::string& text);

  std::string structure_id_;
  int64_t connected_at_ms_ = 0;

  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<std::string> events_;        // warnings + errors, in order
  std::optional<std::string> latest_pose_;  // conflating slot
  int64_t latest_pose_t_ms_ = std::numeric_limits<int64_t>::min();
  uint64_t next_sequence_ = 1;
  bool closed_ = false;
};

struct StreamHubOptions {
  size_t warning_queue_limit = 256;
};

class StreamHub : public FrameSink {
 public:
  // structure_exists answers subscribe-time validation; unknown structures
  // get an "error" event and the channel stays open.
  explicit StreamHub(std::function<bool(const std::string&)> structure_exists,
                     StreamHubOptions options = {});

  std::shared_ptr<Subscription> subscribe(const std::string& structure_id);

  size_t broadcast_snapshot(const FrameSnapshot& snapshot);
  size_t broadcast_warning(const WarningEvent& event);

  // FrameSink
  void publish_snapshot(const FrameSnapshot& snapshot) override;
  void publish_warning(const WarningEvent& event) override;

  size_t subscriber_count(const std::string& structure_id) const;

 private:
  void prune_closed();

  std::function<bool(const std::string&)> structure_exists_;
  StreamHubOptions options_;

  mutable std::mutex mutex_;
  std::vector<std::shared_ptr<Subscription>> subscriptions_;
  std::map<std::string, std::string> last_pose_;  // per structure, wire text
  std::map<std::string, int64_t> last_pose_t_ms_;
};

}  // namespace shmpose
