#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <thread>

#include "shmpose/engine.hpp"
#include "shmpose/simulator.hpp"
#include "test_models.hpp"

using namespace shmpose;

namespace {

// Records everything published for inspection.
struct CaptureSink : FrameSink {
  std::mutex mutex;
  std::vector<FrameSnapshot> snapshots;
  std::vector<WarningEvent> warnings;

  void publish_snapshot(const FrameSnapshot& s) override {
    std::lock_guard lock(mutex);
    snapshots.push_back(s);
  }
  void publish_warning(const WarningEvent& w) override {
    std::lock_guard lock(mutex);
    warnings.push_back(w);
  }
};

struct EngineFixture {
  Registry registry;
  CaptureSink sink;
  MonitoringEngine engine{registry, &sink};

  EngineFixture(double column_length = 3.0) {
    registry.upsert_structure(testing::two_level_frame("s1", column_length));
    testing::bind_eight_devices(registry);
  }

  // Pushes forward-kinematics displacements for all 8 devices at one time.
  void push_scenario(const Scenario& scenario, double t_s, int64_t t_ms) {
    const auto config = registry.resolve_runtime_config("s1");
    for (int i = 0; i < 8; ++i) {
      const auto disp =
          scenario_sample(scenario, *config, testing::node_for(i), t_s);
      engine.accept_sample(
          {testing::device_for(i), t_ms, disp.x, disp.y, disp.z});
    }
  }
};

}  // namespace

TEST_CASE("accept_sample contracts") {
  EngineFixture f;
  f.engine.accept_sample({"dev-001", 1000, 0.01, 0.0, 0.0});

  CHECK_THROWS_AS(f.engine.accept_sample({"ghost", 1000, 0, 0, 0}),
                  UnknownDeviceError);
  // Equal timestamp violates strict ordering.
  CHECK_THROWS_AS(f.engine.accept_sample({"dev-001", 1000, 0.02, 0, 0}),
                  OutOfOrderError);
  CHECK_THROWS_AS(f.engine.accept_sample({"dev-001", 999, 0.02, 0, 0}),
                  OutOfOrderError);
  CHECK(f.engine.counters().samples_dropped_out_of_order == 2);
  CHECK(f.engine.counters().samples_accepted == 1);
  CHECK_THROWS_AS(
      f.engine.accept_sample({"dev-001", 1001, std::nan(""), 0, 0}),
      std::invalid_argument);
}

TEST_CASE("assemble_frame staleness and holding") {
  EngineFixture f;
  const auto config = f.registry.resolve_runtime_config("s1");

  SUBCASE("no samples at all: all-zero, all-stale rest frame") {
    const auto frame = f.engine.assemble_frame(*config, 5000);
    CHECK(frame.nodes.size() == 8);
    for (const auto& [id, entry] : frame.nodes) {
      CHECK(entry.stale);
      CHECK(entry.displacement == Point3{0, 0, 0});
    }
  }

  SUBCASE("fresh samples: zero stale nodes") {
    for (int i = 0; i < 8; ++i) {
      f.engine.accept_sample({testing::device_for(i), 4980, 0.01, 0, 0});
    }
    const auto frame = f.engine.assemble_frame(*config, 5000);
    for (const auto& [id, entry] : frame.nodes) {
      CHECK_FALSE(entry.stale);
      CHECK(entry.source_t_ms == 4980);
    }
  }

  SUBCASE("silent device goes stale but holds its last value") {
    for (int i = 0; i < 8; ++i) {
      f.engine.accept_sample({testing::device_for(i), 4000, 0.07, 0, 0});
    }
    for (int i = 1; i < 8; ++i) {  // dev-001 goes silent
      f.engine.accept_sample({testing::device_for(i), 4990, 0.07, 0, 0});
    }
    const auto frame = f.engine.assemble_frame(*config, 5000);
    CHECK(frame.nodes.at("L1-N1").stale);  // 1 s old > 200 ms window
    CHECK(frame.nodes.at("L1-N1").displacement.x == 0.07);  // held
    CHECK_FALSE(frame.nodes.at("L1-N2").stale);
  }

  SUBCASE("future samples are not selected") {
    f.engine.accept_sample({"dev-001", 6000, 0.5, 0, 0});
    const auto frame = f.engine.assemble_frame(*config, 5000);
    CHECK(frame.nodes.at("L1-N1").displacement.x == 0.0);
    CHECK(frame.nodes.at("L1-N1").stale);
  }

  SUBCASE("unbound non-ground node is stale with zero displacement") {
    Registry registry;
    registry.upsert_structure(testing::two_level_frame());
    registry.upsert_binding({"dev-001", "s1", "L1-N1", true, 0});
    MonitoringEngine engine(registry, nullptr);
    const auto cfg = registry.resolve_runtime_config("s1");
    const auto frame = engine.assemble_frame(*cfg, 1000);
    CHECK(frame.nodes.at("L2-N4").stale);
    CHECK(frame.nodes.at("L2-N4").displacement == Point3{0, 0, 0});
  }
}

TEST_CASE("compute_snapshot at rest is the identity") {
  EngineFixture f;
  const auto config = f.registry.resolve_runtime_config("s1");
  const auto frame = f.engine.assemble_frame(*config, 1000);
  const auto snapshot = f.engine.compute_snapshot(frame, *config);

  CHECK(snapshot.failed_chains.empty());
  CHECK(snapshot.columns.size() == 8);
  for (const auto& col : snapshot.columns) {
    CHECK(col.pose.r_y == doctest::Approx(0.0));
    CHECK(col.pose.t_x == doctest::Approx(0.0));
    CHECK(norm(col.pose.center_translation) == doctest::Approx(0.0));
    CHECK(col.z_residual == doctest::Approx(0.0));
  }
  const auto model = f.registry.get_model("s1");
  for (const auto& node : snapshot.nodes) {
    for (const auto& spec : model.nodes) {
      if (spec.node_id == node.node_id) {
        CHECK(norm(node.position - spec.rest_position) ==
              doctest::Approx(0.0));
      }
    }
  }
}

TEST_CASE("compute_snapshot recovers prescribed sway and keeps continuity") {
  EngineFixture f(2.0);  // L=2 columns
  Scenario scenario;
  scenario.kind = ScenarioKind::step;
  scenario.step_time_s = 0.0;
  scenario.amplitude_ry_rad = 0.5235988;  // 30 degrees
  scenario.amplitude_tx_rad = 0.0;
  f.push_scenario(scenario, 1.0, 1000);

  const auto config = f.registry.resolve_runtime_config("s1");
  const auto frame = f.engine.assemble_frame(*config, 1000);
  const auto snapshot = f.engine.compute_snapshot(frame, *config);

  CHECK(snapshot.failed_chains.empty());
  for (const auto& col : snapshot.columns) {
    CHECK(col.pose.r_y == doctest::Approx(0.5235988).epsilon(1e-9));
    CHECK(col.pose.t_x == doctest::Approx(0.0));
    // Forward-generated input: z residual vanishes.
    CHECK(std::abs(col.z_residual) < 1e-9);
  }
  // Level-2 tops are displaced twice the level-1 amount in x.
  for (const auto& node : snapshot.nodes) {
    if (node.node_id.rfind("L2-", 0) == 0) {
      const auto rest_z = 2 * 1.7320508;
      CHECK(node.position.z == doctest::Approx(rest_z).epsilon(1e-6));
    }
  }
}

TEST_CASE("partial chain failure never suppresses healthy chains") {
  EngineFixture f(2.0);
  // dev-001 (L1-N1) reports an impossible displacement, others rest.
  f.engine.accept_sample({"dev-001", 900, 5.0, 0, 0});
  for (int i = 1; i < 8; ++i) {
    f.engine.accept_sample({testing::device_for(i), 900, 0, 0, 0});
  }
  const auto config = f.registry.resolve_runtime_config("s1");
  const auto frame = f.engine.assemble_frame(*config, 1000);
  const auto snapshot = f.engine.compute_snapshot(frame, *config);

  CHECK(snapshot.failed_chains.size() == 1);
  CHECK(snapshot.columns.size() == 6);  // 3 healthy chains of 2
  CHECK(snapshot.failed_chains[0].reason.find("column 1") !=
        std::string::npos);
}

TEST_CASE("evaluate_thresholds is strict and deterministically ordered") {
  EngineFixture f;
  NodeDisplacementFrame frame;
  frame.structure_id = "s1";
  frame.frame_t_ms = 1000;
  const double trip = 3.0 * std::sin(0.1);  // 0.2995002
  frame.nodes["L1-N2"] = {{trip, 0, 0}, 1000, false};
  frame.nodes["L1-N1"] = {{0.25, -0.3, 0}, 1000, false};  // x exactly at max
  frame.nodes["L1-N3"] = {{0.1, 0.0, 0.0}, 1000, false};

  const ThresholdConfig thresholds{"s1", 0.25, 0.25, 0.10};
  const auto events =
      MonitoringEngine::evaluate_thresholds(frame, thresholds);

  REQUIRE(events.size() == 2);
  // Ordered by node_id then axis; |0.25| == max fires nothing (strict).
  CHECK(events[0].node_id == "L1-N1");
  CHECK(events[0].axis == 'y');
  CHECK(events[0].value == -0.3);
  CHECK(events[1].node_id == "L1-N2");
  CHECK(events[1].axis == 'x');
  CHECK(events[1].value == doctest::Approx(0.2995002).epsilon(1e-6));
  CHECK(events[1].max == 0.25);
}

TEST_CASE("tick publishes snapshots and applies registry changes next frame") {
  EngineFixture f;
  f.registry.set_thresholds({"s1", 0.25, 0.25, 0.10});

  const auto s1 = f.engine.tick("s1", 1000);
  const auto v1 = s1.config_version;

  // Plug and play: rebind between ticks, no restart.
  f.registry.upsert_binding({"dev-001", "s1", "L1-N1", false, 0});
  f.registry.upsert_binding({"spare-9", "s1", "L1-N1", true, 0});
  f.engine.accept_sample({"spare-9", 1400, 0.5, 0, 0});

  const auto s2 = f.engine.tick("s1", 1500);
  CHECK(s2.config_version > v1);
  CHECK(s2.frame_t_ms > s1.frame_t_ms);

  // The rerouted device's sample drives L1-N1 on the very next frame.
  bool found = false;
  for (const auto& node : s2.nodes) {
    if (node.node_id == "L1-N1") {
      CHECK(node.position.x == doctest::Approx(0.5).epsilon(1e-9));
      found = true;
    }
  }
  CHECK(found);
  // dx 0.5 > 0.25 fires a warning through the sink.
  REQUIRE_FALSE(f.sink.warnings.empty());
  CHECK(f.sink.warnings.back().node_id == "L1-N1");
  CHECK(f.sink.warnings.back().axis == 'x');
}

TEST_CASE("snapshot timestamps strictly increase even with equal tick input") {
  EngineFixture f;
  const auto a = f.engine.tick("s1", 1000);
  const auto b = f.engine.tick("s1", 1000);
  const auto c = f.engine.tick("s1", 900);
  CHECK(b.frame_t_ms > a.frame_t_ms);
  CHECK(c.frame_t_ms > b.frame_t_ms);
}

TEST_CASE("run_loop emits periodically and survives bad structure ids") {
  EngineFixture f;
  f.engine.start("s1", 10);
  f.engine.start("missing", 10);  // must not kill anything
  std::this_thread::sleep_for(std::chrono::milliseconds(200));
  f.engine.stop();

  std::lock_guard lock(f.sink.mutex);
  CHECK(f.sink.snapshots.size() >= 10);
  for (size_t i = 1; i < f.sink.snapshots.size(); ++i) {
    CHECK(f.sink.snapshots[i].frame_t_ms >
          f.sink.snapshots[i - 1].frame_t_ms);
  }
}

TEST_CASE("recorded frames honor the inclusive range") {
  EngineFixture f;
  f.engine.tick("s1", 1000);
  f.engine.tick("s1", 1050);
  f.engine.tick("s1", 1100);
  CHECK(f.engine.recorded_frames("s1", 1000, 1100).size() == 3);
  CHECK(f.engine.recorded_frames("s1", 1001, 1099).size() == 1);
  CHECK(f.engine.recorded_frames("s1", 2000, 3000).empty());
  CHECK(f.engine.recorded_frames("other", 0, 5000).empty());
}
