#include <doctest.h>

#include "generators.hpp"
#include "hybridcep/pattern_matcher.hpp"

using namespace hcep;

namespace {

StatusEvent status(std::size_t constraint, StatusType type, Seconds ts, const std::string& id,
                   Attributes payload = {}) {
  StatusEvent e;
  e.constraintIndex = constraint;
  e.type = type;
  e.ts = ts;
  e.eventId = id;
  e.payload = std::move(payload);
  return e;
}

// Fires timers due at or before t.
std::vector<StatusEvent> fire_until(PatternMatcher& pm, Seconds t) {
  std::vector<StatusEvent> out;
  while (auto timer = pm.next_timer()) {
    if (timer->dueAt > t) break;
    for (auto& e : pm.fire_next()) out.push_back(std::move(e));
  }
  return out;
}

const char* kBinary = R"j({
  "variables": [{"name": "temp", "kind": "continuous"}],
  "tasks": [{"name": "Open", "payload": ["userId"]}, {"name": "Close", "payload": ["userId"]}],
  "constraints": [
    {"id": "nr", "template": "NotResponse", "activation": {"pred": "dis(Open)"},
     "target": {"pred": "dis(Close)"}, "responseWindow": 5,
     "correlation": "activation.payload.userId == target.payload.userId"},
    {"id": "ex", "template": "Existence", "target": {"pred": "dis(Close)"}, "scopeWindow": 10},
    {"id": "nx", "template": "NotExistence", "target": {"pred": "temp > 90"}, "scopeWindow": 10},
    {"id": "rs", "template": "Response", "activation": {"pred": "dis(Open)"},
     "target": {"pred": "dis(Close)"}, "responseWindow": 5,
     "correlation": "activation.payload.userId == target.payload.userId"}
  ]
})j";

}  // namespace

TEST_CASE("response fulfilled by a target inside the window") {
  const auto model = testgen::load_fixture("reactor.json");
  PatternMatcher pm(model.get());
  pm.open(0.0);
  CHECK(pm.on_status_event(status(1, StatusType::Activation, 20, "a1")).empty());
  CHECK(pm.open_obligations(1) == 1);
  CHECK(pm.next_timer()->dueAt == 25.0);
  const auto out = pm.on_status_event(status(1, StatusType::Target, 22.5, "b1"));
  REQUIRE(out.size() == 1);
  CHECK(out[0].type == StatusType::Fulfillment);
  CHECK(out[0].ts == 22.5);
  CHECK(out[0].activationRef == "a1");
  CHECK(pm.open_obligations(1) == 0);
  CHECK(pm.audit().fulfilled == 1);
}

TEST_CASE("response deadline without target") {
  const auto model = testgen::load_fixture("reactor.json");
  PatternMatcher pm(model.get());
  pm.open(0.0);
  pm.on_status_event(status(1, StatusType::Activation, 20, "a1"));
  CHECK(fire_until(pm, 24.999).empty());
  const auto out = fire_until(pm, 25);
  REQUIRE(out.size() == 1);
  CHECK(out[0].type == StatusType::PermanentViolation);
  CHECK(out[0].ts == 25.0);
  CHECK(out[0].reason == "response deadline missed");
  CHECK(pm.audit().violated == 1);
  CHECK(pm.audit().resolved() == pm.audit().created);
}

TEST_CASE("one target resolves every open obligation") {
  const auto model = testgen::load_fixture("reactor.json");
  PatternMatcher pm(model.get());
  pm.open(0.0);
  pm.on_status_event(status(1, StatusType::Activation, 20, "a1"));
  pm.on_status_event(status(1, StatusType::Activation, 21, "a2"));
  const auto out = pm.on_status_event(status(1, StatusType::Target, 22, "b"));
  CHECK(out.size() == 2);
  CHECK(pm.timers().empty());
}

TEST_CASE("not-existence target is an immediate permanent violation") {
  const auto model = testgen::load_fixture("reactor.json");
  PatternMatcher pm(model.get());
  pm.open(0.0);
  const auto out = pm.on_status_event(status(0, StatusType::Target, 25, "b"));
  REQUIRE(out.size() == 1);
  CHECK(out[0].type == StatusType::PermanentViolation);
  CHECK(out[0].ts == 25.0);
  CHECK(out[0].reason == "forbidden occurrence");
}

TEST_CASE("precedence with an enablement token") {
  const auto model = testgen::load_fixture("reactor.json");
  PatternMatcher pm(model.get());
  pm.open(0.0);
  auto early = pm.on_status_event(status(2, StatusType::Target, 24, "r1"));
  REQUIRE(early.size() == 1);
  CHECK(early[0].type == StatusType::Violation);
  CHECK(early[0].reason == "precedence not satisfied");

  pm.on_status_event(status(2, StatusType::Activation, 30, "a"));
  REQUIRE(pm.tokens().size() == 1);
  CHECK(pm.tokens().begin()->second.enabledAt == 30.0);
  CHECK(pm.tokens().begin()->second.validUntil == 50.0);
  auto ok = pm.on_status_event(status(2, StatusType::Target, 40, "r2"));
  REQUIRE(ok.size() == 1);
  CHECK(ok[0].type == StatusType::Fulfillment);
  CHECK(ok[0].activationRef == "a");
  // Tokens latch: a second use inside the window is fine too.
  CHECK(pm.on_status_event(status(2, StatusType::Target, 50, "r3"))[0].type == StatusType::Fulfillment);
}

TEST_CASE("expired token no longer enables") {
  const auto model = testgen::load_fixture("reactor.json");
  PatternMatcher pm(model.get());
  pm.open(0.0);
  pm.on_status_event(status(2, StatusType::Activation, 30, "a"));
  fire_until(pm, 50);
  CHECK(pm.tokens().empty());
  const auto out = pm.on_status_event(status(2, StatusType::Target, 55, "r"));
  REQUIRE(out.size() == 1);
  CHECK(out[0].type == StatusType::Violation);
  CHECK(out[0].ts == 55.0);
}

TEST_CASE("correlated not-response") {
  const auto model = testgen::compile_text(kBinary);
  PatternMatcher pm(model.get());
  pm.open(0.0);
  const std::size_t nr = *model->constraint_index("nr");
  pm.on_status_event(status(nr, StatusType::Activation, 1, "a1", {{"userId", 3.0}}));
  pm.on_status_event(status(nr, StatusType::Activation, 2, "a2", {{"userId", 4.0}}));
  const auto hit = pm.on_status_event(status(nr, StatusType::Target, 3, "b", {{"userId", 3.0}}));
  REQUIRE(hit.size() == 1);
  CHECK(hit[0].type == StatusType::PermanentViolation);
  CHECK(hit[0].activationRef == "a1");
  CHECK(hit[0].reason == "forbidden response occurred");
  const auto elapsed = fire_until(pm, 7);
  REQUIRE(elapsed.size() == 1);
  CHECK(elapsed[0].type == StatusType::Fulfillment);
  CHECK(elapsed[0].activationRef == "a2");
  CHECK(elapsed[0].ts == 7.0);
  CHECK(pm.audit().discharged == 1);
  CHECK(pm.audit().violated == 1);
}

TEST_CASE("uncorrelated targets are vacuous") {
  const auto model = testgen::compile_text(kBinary);
  PatternMatcher pm(model.get());
  pm.open(0.0);
  const std::size_t rs = *model->constraint_index("rs");
  pm.on_status_event(status(rs, StatusType::Activation, 1, "a", {{"userId", 3.0}}));
  CHECK(pm.on_status_event(status(rs, StatusType::Target, 2, "b", {{"userId", 5.0}})).empty());
  CHECK(pm.audit().vacuousTargets == 1);
  CHECK(pm.open_obligations(rs) == 1);
}

TEST_CASE("unary scopes resolve at scope end") {
  const auto model = testgen::compile_text(kBinary);
  PatternMatcher pm(model.get());
  pm.open(0.0);
  const std::size_t ex = *model->constraint_index("ex");
  const std::size_t nx = *model->constraint_index("nx");
  const auto out = fire_until(pm, 10);
  REQUIRE(out.size() == 2);
  for (const auto& e : out) {
    CHECK(e.ts == 10.0);
    if (e.constraintIndex == ex) {
      CHECK(e.type == StatusType::PermanentViolation);
      CHECK(e.reason == "no occurrence within scope");
    } else {
      CHECK(e.constraintIndex == nx);
      CHECK(e.type == StatusType::Fulfillment);
    }
  }
  // After the scope, targets no longer count.
  CHECK(pm.on_status_event(status(nx, StatusType::Target, 11, "late")).empty());
}

TEST_CASE("closing resolves what is left") {
  const auto model = testgen::compile_text(kBinary);
  PatternMatcher pm(model.get());
  pm.open(0.0);
  const std::size_t rs = *model->constraint_index("rs");
  const std::size_t nr = *model->constraint_index("nr");
  const std::size_t ex = *model->constraint_index("ex");
  pm.on_status_event(status(rs, StatusType::Activation, 1, "a", {{"userId", 1.0}}));
  pm.on_status_event(status(nr, StatusType::Activation, 1, "n", {{"userId", 1.0}}));
  pm.on_status_event(status(ex, StatusType::Target, 2, "b"));
  const auto out = pm.close(3);
  std::map<std::size_t, StatusEvent> by;
  for (const auto& e : out) by[e.constraintIndex] = e;
  CHECK(by.at(rs).type == StatusType::PermanentViolation);
  CHECK(by.at(rs).reason == "case closed with pending response");
  CHECK(by.at(nr).type == StatusType::Fulfillment);
  CHECK(by.at(nr).reason == "case closed");
  CHECK_FALSE(by.count(ex));  // already decided
  CHECK(by.at(*model->constraint_index("nx")).reason == "scope ended");
  CHECK(pm.obligations().empty());
  CHECK(pm.timers().empty());
  CHECK(pm.audit().resolved() == pm.audit().created);
}
