#include <doctest.h>
#include <httplib.h>

#include <thread>

#include "generators.hpp"
#include "hybridcep/errors.hpp"
#include "hybridcep/http_server.hpp"
#include "hybridcep/service.hpp"

using namespace hcep;

namespace {

EngineOptions quiet() {
  EngineOptions o;
  o.dispatchActions = false;
  return o;
}

struct RunningServer {
  Engine engine{quiet()};
  HttpServer server{engine};
  std::thread thread;
  int port = -1;

  RunningServer() {
    port = server.bind("127.0.0.1", 0);
    REQUIRE(port > 0);
    thread = std::thread([this] { server.run(); });
  }
  ~RunningServer() {
    server.stop();
    thread.join();
  }
};

}  // namespace

TEST_CASE("nearest-rank percentiles") {
  const std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  CHECK(nearest_rank(v, 50) == 5.0);
  CHECK(nearest_rank(v, 90) == 9.0);
  CHECK(nearest_rank(v, 99) == 10.0);
  CHECK(nearest_rank(v, 100) == 10.0);
  CHECK(nearest_rank({42}, 50) == 42.0);
  CHECK(nearest_rank({1, 2, 3}, 34) == 2.0);

  LatencyWindow w(3);
  for (double x : {10.0, 1.0, 2.0, 3.0}) w.add(x);
  const Json s = w.summary();
  CHECK(s["count"] == 4);
  CHECK(s["window"] == 3);
  CHECK(s["max"] == 3.0);
  CHECK(s["mean"] == 2.0);
}

TEST_CASE("engine cases with explicit event time") {
  Engine engine(quiet());
  CHECK_THROWS_AS(engine.create_case(), ConfigError);
  engine.load_model(testgen::load_fixture("reactor.json"));
  const std::string id = engine.create_case("c1");
  CHECK(id == "c1");
  CHECK_THROWS_AS(engine.create_case("c1"), EngineError);
  CHECK(engine.create_case() != engine.create_case());
  CHECK(engine.case_ids().size() == 3);

  engine.ingest_signal(id, "temp", 85, 10.0);
  engine.advance_watermark(id, 20);
  CHECK(engine.status(id)["constraints"][1]["state"] == "Activated");
  const TaskOutcome t = engine.attempt_task(id, "StartCooling", {}, 22.5);
  CHECK(t.accepted);
  CHECK(engine.status(id)["constraints"][1]["state"] == "Fulfilled");
  CHECK_FALSE(engine.attempt_task(id, "Restart", {{"userId", 1.0}}, 23.0).accepted);
  CHECK_THROWS_AS(engine.ingest_signal(id, "temp", 70, 5.0), StaleSample);
  CHECK_THROWS_AS(engine.status("nope"), UnknownCase);

  const Json tasks = engine.tasks(id);
  CHECK(tasks["tasks"].size() == 2);
  engine.close_case(id, 30.0);
  CHECK(engine.status(id)["closed"] == true);

  const Json m = engine.metrics();
  CHECK(m["signals"] == 2);
  CHECK(m["stale"] == 1);
  CHECK(m["accepted"] == 1);
  CHECK(m["rejected"] == 1);
  CHECK(m["obligations"]["created"] == 1);
  CHECK(m["obligations"]["fulfilled"] == 1);
  CHECK(engine.compiled_model()["constraints"].size() == 3);
}

TEST_CASE("subscribers start with a snapshot") {
  Engine engine(quiet());
  engine.load_model(testgen::load_fixture("reactor.json"));
  const std::string id = engine.create_case("s");
  auto channel = engine.subscribe(id);
  auto first = channel->pop_all(std::chrono::milliseconds(100));
  REQUIRE(first.size() == 1);
  CHECK(first[0].rfind("event: snapshot\n", 0) == 0);
  engine.ingest_signal(id, "temp", 85, 1.0);
  engine.advance_watermark(id, 11);
  CHECK_FALSE(channel->pop_all(std::chrono::milliseconds(100)).empty());
}

TEST_CASE("the ticker fires timers without input") {
  EngineOptions o = quiet();
  o.tickInterval = std::chrono::milliseconds(5);
  Engine engine(o);
  engine.load_model(testgen::compile_text(R"j({
    "variables": [{"name": "x", "kind": "continuous"}], "tasks": ["A"],
    "constraints": [{"id": "e", "template": "Existence", "target": {"pred": "dis(A)"}, "scopeWindow": 0.05}]
  })j"));
  const std::string id = engine.create_case();
  engine.start_ticker();
  for (int i = 0; i < 200 && engine.status(id)["constraints"][0]["state"] != "PermanentlyViolated"; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  engine.stop_ticker();
  CHECK(engine.status(id)["constraints"][0]["state"] == "PermanentlyViolated");
}

TEST_CASE("listen address parsing") {
  CHECK(parse_listen_address(":8080") == std::pair<std::string, int>{"0.0.0.0", 8080});
  CHECK(parse_listen_address("127.0.0.1:9") == std::pair<std::string, int>{"127.0.0.1", 9});
  CHECK_THROWS(parse_listen_address("nohost"));
}

TEST_CASE("HTTP interface") {
  RunningServer s;
  httplib::Client cli("127.0.0.1", s.port);
  cli.set_read_timeout(5, 0);

  auto r = cli.Post("/cases", "{}", "application/json");
  REQUIRE(r);
  CHECK(r->status == 400);  // no model yet

  r = cli.Post("/models", testgen::read_text(testgen::fixture_path("reactor.json")), "application/json");
  REQUIRE(r);
  CHECK(r->status == 200);
  r = cli.Post("/models", "{\"variables\": [", "application/json");
  CHECK(r->status == 400);

  r = cli.Post("/cases", R"j({"caseId":"h1"})j", "application/json");
  REQUIRE(r);
  CHECK(r->status == 201);
  CHECK(Json::parse(r->body)["caseId"] == "h1");

  r = cli.Post("/cases/h1/signals", R"j({"sensorId":"temp","value":45,"ts":10})j", "application/json");
  CHECK(r->status == 200);
  r = cli.Post("/cases/h1/signals", R"j({"sensorId":"temp","value":45,"ts":5})j", "application/json");
  CHECK(r->status == 422);
  r = cli.Post("/cases/zz/signals", R"j({"sensorId":"temp","value":45})j", "application/json");
  CHECK(r->status == 404);
  r = cli.Post("/cases/h1/signals", "not json", "application/json");
  CHECK(r->status == 400);

  r = cli.Post("/cases/h1/tasks", R"j({"activity":"Restart","payload":{"userId":3},"ts":11})j", "application/json");
  REQUIRE(r);
  CHECK(r->status == 409);
  const Json rejected = Json::parse(r->body);
  CHECK(rejected["accepted"] == false);
  CHECK(rejected["reasons"][0]["constraintId"] == "3");

  r = cli.Get("/cases/h1/tasks");
  CHECK(r->status == 200);
  r = cli.Get("/cases/h1/status");
  CHECK(Json::parse(r->body)["caseId"] == "h1");
  r = cli.Get("/models/compiled");
  CHECK(Json::parse(r->body)["constraints"].size() == 3);
  r = cli.Get("/cases");
  CHECK(Json::parse(r->body).dump().find("h1") != std::string::npos);

  std::string received;
  cli.Get("/cases/h1/events", [&](const char* data, size_t len) {
    received.append(data, len);
    return received.find("\n\n") == std::string::npos;
  });
  CHECK(received.rfind("event: snapshot", 0) == 0);

  r = cli.Post("/cases/h1/close", R"j({"ts":40})j", "application/json");
  REQUIRE(r);
  CHECK(r->status == 200);
  CHECK(Json::parse(r->body).contains("finishable"));
  r = cli.Get("/metrics");
  CHECK(Json::parse(r->body)["rejected"] == 1);
}
