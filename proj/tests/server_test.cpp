#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <httplib.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "shmpose/simulator.hpp"
#include "test_server.hpp"

using namespace shmpose;
namespace fs = std::filesystem;
using testing::ServerFixture;

TEST_CASE("admin routes") {
  ServerFixture f;
  const auto model_doc = model_to_json(testing::two_level_frame()).dump();

  SUBCASE("PUT then GET structure") {
    auto res = f.client.Put("/api/v1/structures/s1", model_doc,
                            "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(nlohmann::json::parse(res->body)["config_version"] == 1);

    auto got = f.client.Get("/api/v1/structures/s1");
    REQUIRE(got);
    CHECK(got->status == 200);
    CHECK(model_from_json(nlohmann::json::parse(got->body)) ==
          testing::two_level_frame());
  }

  SUBCASE("invalid model reports violations") {
    auto bad = testing::two_level_frame();
    bad.chains[0] = {"c1a", "c2b"};
    auto res = f.client.Put("/api/v1/structures/s1",
                            model_to_json(bad).dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);
    CHECK_FALSE(
        nlohmann::json::parse(res->body)["violations"].empty());
  }

  SUBCASE("body/path structure id mismatch") {
    auto res = f.client.Put("/api/v1/structures/other", model_doc,
                            "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);
  }

  SUBCASE("bindings, thresholds, config resolution") {
    f.client.Put("/api/v1/structures/s1", model_doc, "application/json");
    auto res = f.client.Put("/api/v1/structures/s1/bindings/dev-003",
                            R"({"node_id":"L1-N2"})", "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(nlohmann::json::parse(res->body)["config_version"] == 2);

    // Occupied node: mirrored ConflictError.
    res = f.client.Put("/api/v1/structures/s1/bindings/dev-004",
                       R"({"node_id":"L1-N2"})", "application/json");
    CHECK(res->status == 409);
    // Unknown node: mirrored NotFoundError.
    res = f.client.Put("/api/v1/structures/s1/bindings/dev-005",
                       R"({"node_id":"nope"})", "application/json");
    CHECK(res->status == 404);

    res = f.client.Put("/api/v1/structures/s1/thresholds",
                       R"({"max_dx_m":0.25,"max_dy_m":0.25,"max_dz_m":0.10})",
                       "application/json");
    CHECK(res->status == 200);
    res = f.client.Put("/api/v1/structures/s1/thresholds",
                       R"({"max_dx_m":0,"max_dy_m":0.25,"max_dz_m":0.10})",
                       "application/json");
    CHECK(res->status == 400);

    res = f.client.Get("/api/v1/structures/s1/config");
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto config = nlohmann::json::parse(res->body);
    CHECK(config["chains"].size() == 4);
    CHECK(config["node_to_device"]["L1-N2"] == "dev-003");
    CHECK(config["thresholds"]["max_dx_m"] == 0.25);
  }

  SUBCASE("unknown structure is 404 everywhere") {
    CHECK(f.client.Get("/api/v1/structures/nope")->status == 404);
    CHECK(f.client.Get("/api/v1/structures/nope/config")->status == 404);
    CHECK(f.client.Get("/api/v1/structures/nope/export")->status == 404);
  }
}

TEST_CASE("ingest") {
  ServerFixture f;
  f.setup_structure();

  SUBCASE("full batch accepted") {
    auto res = f.client.Post("/api/v1/ingest",
                             ServerFixture::batch_body("dev-001", 1000, 10),
                             "application/json");
    REQUIRE(res);
    CHECK(res->status == 202);
    const auto body = nlohmann::json::parse(res->body);
    CHECK(body["accepted"] == 10);
    CHECK(body["rejected"].empty());
  }

  SUBCASE("unknown device") {
    auto res = f.client.Post("/api/v1/ingest",
                             ServerFixture::batch_body("ghost", 1000, 1),
                             "application/json");
    CHECK(res->status == 404);
  }

  SUBCASE("malformed body") {
    CHECK(f.client.Post("/api/v1/ingest", "{not json", "application/json")
              ->status == 400);
    CHECK(f.client.Post("/api/v1/ingest", R"({"device_id":"dev-001"})",
                        "application/json")
              ->status == 400);
  }

  SUBCASE("one out-of-order sample is rejected by index") {
    ordered_json body;
    body["device_id"] = "dev-001";
    body["samples"] = ordered_json::array();
    for (int i = 0; i < 10; ++i) {
      // Index 4 repeats index 3's timestamp.
      const int64_t t = 1000 + (i == 4 ? 3 : i) * 50;
      body["samples"].push_back(
          {{"t_ms", t}, {"dx_m", 0.0}, {"dy_m", 0.0}, {"dz_m", 0.0}});
    }
    auto res =
        f.client.Post("/api/v1/ingest", body.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 202);
    const auto parsed = nlohmann::json::parse(res->body);
    CHECK(parsed["accepted"] == 9);
    REQUIRE(parsed["rejected"].size() == 1);
    CHECK(parsed["rejected"][0]["index"] == 4);
    CHECK(parsed["rejected"][0]["reason"] == "out_of_order");
  }

  SUBCASE("replayed batch is fully rejected, never double-counted") {
    const auto body = ServerFixture::batch_body("dev-001", 1000, 10);
    auto first = f.client.Post("/api/v1/ingest", body, "application/json");
    CHECK(first->status == 202);
    auto replay = f.client.Post("/api/v1/ingest", body, "application/json");
    REQUIRE(replay);
    CHECK(replay->status == 422);
    const auto parsed = nlohmann::json::parse(replay->body);
    CHECK(parsed["accepted"] == 0);
    CHECK(parsed["rejected"].size() == 10);
    CHECK(f.engine.counters().samples_accepted == 10);
  }

  SUBCASE("accepted samples land in exactly one persisted log line each") {
    f.client.Post("/api/v1/ingest",
                  ServerFixture::batch_body("dev-002", 1000, 10),
                  "application/json");
    const fs::path log = fs::path(Registry::samples_dir(
                             f.data_dir.string(), "s1")) /
                         "dev-002.jsonl";
    REQUIRE(fs::exists(log));
    std::ifstream in(log);
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) {
      if (!line.empty()) {
        const auto j = nlohmann::json::parse(line);
        CHECK(j["device_id"] == "dev-002");
        ++lines;
      }
    }
    CHECK(lines == 10);
  }
}

TEST_CASE("export") {
  ServerFixture f;
  f.setup_structure();
  f.engine.tick("s1", 1000);
  f.engine.tick("s1", 1050);
  f.engine.tick("s1", 1100);

  SUBCASE("frames stream as ascending JSON lines") {
    auto res = f.client.Get(
        "/api/v1/structures/s1/export?from_ms=1000&to_ms=1100");
    REQUIRE(res);
    CHECK(res->status == 200);
    std::istringstream is(res->body);
    std::string line;
    int64_t last = 0;
    int count = 0;
    while (std::getline(is, line)) {
      const auto j = nlohmann::json::parse(line);
      CHECK(j["type"] == "pose_update");
      CHECK(j["t_ms"].get<int64_t>() > last);
      last = j["t_ms"].get<int64_t>();
      ++count;
    }
    CHECK(count == 3);
  }

  SUBCASE("empty range: 200 with empty body") {
    auto res = f.client.Get(
        "/api/v1/structures/s1/export?from_ms=5000&to_ms=6000");
    CHECK(res->status == 200);
    CHECK(res->body.empty());
  }

  SUBCASE("reversed range: 400") {
    auto res = f.client.Get(
        "/api/v1/structures/s1/export?from_ms=2000&to_ms=1000");
    CHECK(res->status == 400);
  }
}

TEST_CASE("websocket stream end to end") {
  ServerFixture f;
  f.setup_structure();

  SUBCASE("subscribe, then receive live pose updates") {
    StreamTail tail;
    tail.connect("127.0.0.1", f.stream_server.port(), "s1");
    f.engine.tick("s1", 2000);
    const auto message = tail.read_message();
    REQUIRE(message.has_value());
    const auto j = nlohmann::json::parse(*message);
    CHECK(j["type"] == "pose_update");
    CHECK(j["t_ms"] == 2000);
    CHECK(j["columns"].size() == 8);
  }

  SUBCASE("late subscriber gets the most recent snapshot first") {
    f.engine.tick("s1", 2000);
    f.engine.tick("s1", 2050);
    StreamTail tail;
    tail.connect("127.0.0.1", f.stream_server.port(), "s1");
    const auto message = tail.read_message();
    REQUIRE(message.has_value());
    CHECK(nlohmann::json::parse(*message)["t_ms"] == 2050);
  }

  SUBCASE("unknown structure gets an error event") {
    StreamTail tail;
    tail.connect("127.0.0.1", f.stream_server.port(), "missing");
    const auto message = tail.read_message();
    REQUIRE(message.has_value());
    CHECK(nlohmann::json::parse(*message)["type"] == "error");
  }

  SUBCASE("two subscribers receive identical payloads") {
    StreamTail a, b;
    a.connect("127.0.0.1", f.stream_server.port(), "s1");
    b.connect("127.0.0.1", f.stream_server.port(), "s1");
    f.engine.tick("s1", 3000);
    const auto ma = a.read_message();
    const auto mb = b.read_message();
    REQUIRE(ma.has_value());
    REQUIRE(mb.has_value());
    CHECK(*ma == *mb);
  }
}
