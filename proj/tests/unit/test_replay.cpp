#include <doctest.h>

#include <sstream>

#include "generators.hpp"
#include "hybridcep/errors.hpp"
#include "hybridcep/replay.hpp"

using namespace hcep;

namespace {

std::string replay_text(const std::shared_ptr<const CompiledModel>& model, const std::vector<InputRecord>& records,
                        ReplayOptions options = {}) {
  std::ostringstream out;
  write_log(run_replay(model, records, options), out);
  return out.str();
}

std::vector<Json> lines_of(const std::string& text) {
  std::vector<Json> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(Json::parse(line));
  return out;
}

}  // namespace

TEST_CASE("record parsing") {
  const auto model = testgen::load_fixture("reactor.json");
  const auto recs = testgen::parse_records(
      "{\"kind\":\"signal\",\"caseId\":\"c\",\"sensorId\":\"temp\",\"value\":85,\"ts\":1}\n"
      "\n"
      "{\"kind\":\"task\",\"caseId\":\"c\",\"activity\":\"Restart\",\"ts\":2,\"payload\":{\"userId\":7}}\n"
      "{\"kind\":\"watermark\",\"ts\":3}\n"
      "{\"kind\":\"close\",\"caseId\":\"c\",\"ts\":4}\n",
      *model);
  REQUIRE(recs.size() == 4);
  CHECK(recs[0].kind == RecordKind::Signal);
  CHECK(recs[0].value == 85.0);
  CHECK(recs[1].line == 3);
  CHECK(std::get<double>(recs[1].payload.at("userId")) == 7.0);
  CHECK(recs[2].kind == RecordKind::Watermark);
  CHECK(recs[2].caseId.empty());
  CHECK(recs[3].kind == RecordKind::Close);
  CHECK(parse_record(to_json(recs[1]), 3).name == "Restart");
}

TEST_CASE("malformed and out-of-order traces report their line") {
  const auto model = testgen::load_fixture("reactor.json");
  try {
    testgen::parse_records("{\"kind\":\"close\",\"caseId\":\"c\",\"ts\":1}\n{oops\n", *model);
    FAIL("expected SyntaxError");
  } catch (const SyntaxError& e) {
    CHECK(e.line() == 2);
  }
  try {
    testgen::parse_records(testgen::read_text(testgen::fixture_path("out_of_order.ndjson")), *model);
    FAIL("expected OrderViolation");
  } catch (const OrderViolation& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(testgen::parse_records("{\"kind\":\"signal\",\"caseId\":\"c\",\"value\":1,\"ts\":1}\n", *model),
                  SyntaxError);
  CHECK_THROWS_AS(
      testgen::parse_records("{\"kind\":\"signal\",\"caseId\":\"c\",\"sensorId\":\"p\",\"value\":1,\"ts\":1}\n", *model),
      EngineError);
  CHECK_THROWS_AS(testgen::parse_records("{\"kind\":\"close\",\"caseId\":\"c\",\"ts\":1}\n"
                                         "{\"kind\":\"close\",\"caseId\":\"c\",\"ts\":2}\n",
                                         *model),
                  OrderViolation);
}

TEST_CASE("replaying the restart scenario") {
  const auto model = testgen::load_fixture("reactor.json");
  const auto recs = testgen::parse_records(testgen::read_text(testgen::fixture_path("restart.ndjson")), *model);
  const auto lines = lines_of(replay_text(model, recs));
  const Json& summary = lines.back();
  CHECK(summary["type"] == "summary");
  CHECK(summary["closed"] == true);
  bool rejected = false;
  for (const Json& j : lines) {
    if (j["type"] == "rejected") {
      rejected = true;
      CHECK(j["ts"] == 24.0);
    }
  }
  CHECK(rejected);
  CHECK(summary["constraints"][2]["state"] == "Fulfilled");
}

TEST_CASE("replay output is deterministic and independent of parallelism") {
  const auto model = compile_model(
      [] {
        testgen::Rng r(5);
        return testgen::random_model(r);
      }());
  testgen::Rng r(17);
  std::vector<InputRecord> records;
  std::vector<std::vector<InputRecord>> cases;
  for (int i = 0; i < 20; ++i) cases.push_back(testgen::random_case(r, "case" + std::to_string(i)));
  // Interleave cases round-robin, preserving per-case order.
  for (std::size_t k = 0;; ++k) {
    bool any = false;
    for (auto& c : cases) {
      if (k < c.size()) {
        records.push_back(c[k]);
        any = true;
      }
    }
    if (!any) break;
  }
  const std::string first = replay_text(model, records);
  CHECK(first == replay_text(model, records));
  ReplayOptions par;
  par.parallelism = 4;
  CHECK(first == replay_text(model, records, par));
}

TEST_CASE("close at end and L2 dump") {
  const auto model = testgen::load_fixture("reactor.json");
  const auto recs = testgen::parse_records(
      "{\"kind\":\"signal\",\"caseId\":\"c\",\"sensorId\":\"temp\",\"value\":85,\"ts\":0}\n"
      "{\"kind\":\"signal\",\"caseId\":\"c\",\"sensorId\":\"temp\",\"value\":85,\"ts\":12}\n",
      *model);
  ReplayOptions options;
  options.closeAtEnd = true;
  options.dumpL2 = true;
  const ReplayResult result = run_replay(model, recs, options);
  REQUIRE(result.cases.size() == 1);
  CHECK(result.cases[0].summary["closed"] == true);
  std::ostringstream dump;
  write_l2_dump(result, dump);
  const auto l2 = lines_of(dump.str());
  REQUIRE(l2.size() == 2);
  CHECK(l2[0]["op"] == "open");
  CHECK(l2[0]["kind"] == "obligation");
  CHECK(l2[0]["deadline"] == 15.0);
  CHECK(l2[1]["op"] == "resolve");
}
