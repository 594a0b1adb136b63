#pragma once

// Randomized invariant checks shared by the property tests and the
// acceptance binary. Each returns an empty string on success, otherwise a
// description of the first counterexample.

#include <map>
#include <set>
#include <string>

#include "equivalence.hpp"
#include "generators.hpp"
#include "hybridcep/case_processor.hpp"

namespace hcep::testgen {

class AuditObserver : public L2Observer {
 public:
  void on_l2_change(const Json& r) override {
    if (r["kind"] != "obligation") return;
    const auto id = r["id"].get<std::uint64_t>();
    const std::string op = r["op"].get<std::string>();
    if (op == "open") {
      if (!opened.insert(id).second) error = "obligation " + std::to_string(id) + " opened twice";
    } else if (op == "resolve") {
      if (!opened.count(id)) error = "obligation " + std::to_string(id) + " resolved before opening";
      if (!resolved.insert(id).second) error = "obligation " + std::to_string(id) + " resolved twice";
    }
  }
  std::set<std::uint64_t> opened;
  std::set<std::uint64_t> resolved;
  std::string error;
};

inline std::vector<Output> feed(CaseProcessor& proc, const InputRecord& r) {
  switch (r.kind) {
    case RecordKind::Signal: return proc.ingest_signal(r.name, r.value, r.ts);
    case RecordKind::Task: return proc.attempt_task(r.name, r.payload, r.ts, r.eventId).outputs;
    case RecordKind::Close: return proc.close(r.ts);
    case RecordKind::Watermark: return proc.advance_watermark(r.ts);
  }
  return {};
}

/// Every obligation is opened once and resolved exactly once by case close.
inline std::string check_obligation_audit(Rng& r) {
  const auto model = compile_model(random_model(r));
  CaseProcessor proc(model, "c", EnforcementMode::Report);
  AuditObserver obs;
  proc.set_l2_observer(&obs);
  for (const InputRecord& rec : random_case(r, "c")) feed(proc, rec);
  const ObligationAudit& a = proc.core().l2.audit();
  if (!obs.error.empty()) return obs.error;
  if (a.created != a.resolved()) {
    return "created " + std::to_string(a.created) + " != resolved " + std::to_string(a.resolved());
  }
  if (obs.opened.size() != a.created || obs.resolved.size() != a.created) return "observer counts differ from audit";
  if (!proc.core().l2.obligations().empty()) return "obligations left after close";
  return "";
}

/// Once PermanentlyViolated, a constraint never changes state again.
inline std::string check_absorbing(Rng& r) {
  const auto model = compile_model(random_model(r));
  CaseProcessor proc(model, "c", EnforcementMode::Report);
  std::vector<bool> dead(model->constraints.size(), false);
  for (const InputRecord& rec : random_case(r, "c")) {
    for (const Output& o : feed(proc, rec)) {
      const auto* t = std::get_if<TransitionRecord>(&o);
      if (!t) continue;
      if (dead[t->constraintIndex]) return "transition out of PermanentlyViolated for " +
                                            model->constraints[t->constraintIndex].spec.id;
      if (t->to == ConstraintState::PermanentlyViolated) dead[t->constraintIndex] = true;
    }
    for (std::size_t i = 0; i < dead.size(); ++i) {
      if (dead[i] && proc.core().l3.state(i).state != ConstraintState::PermanentlyViolated) return "state left PV";
    }
  }
  return "";
}

/// The incremental finishable flag matches a recomputation and a test-side
/// reading of the status document after every input.
inline std::string check_finishable(Rng& r) {
  const auto model = compile_model(random_model(r));
  CaseProcessor proc(model, "c", EnforcementMode::Report);
  for (const InputRecord& rec : random_case(r, "c")) {
    feed(proc, rec);
    const bool incremental = proc.finishable();
    if (incremental != proc.core().l3.recompute_finishable()) return "recompute differs";
    bool expected = true;
    const Json doc = proc.snapshot(false);
    for (std::size_t i = 0; i < model->constraints.size(); ++i) {
      const Json& c = doc["constraints"][i];
      const std::string state = c["state"];
      if (state == "PermanentlyViolated") expected = false;
      if (state == "Activated" && c["openCount"].get<int>() > 0) expected = false;
      if (state == "Idle" && c["template"] == "Existence") expected = false;
    }
    if (incremental != expected) return "finishable " + std::to_string(incremental) + " at t=" + std::to_string(rec.ts);
  }
  return "";
}

/// A task rejected in prevent mode leaves the case exactly as it was.
inline std::string check_rejection_purity(Rng& r, int* rejections = nullptr) {
  ProcessModel m = random_model(r);
  m.enforcement = EnforcementMode::Prevent;
  const auto model = compile_model(m);
  CaseProcessor proc(model, "c", EnforcementMode::Prevent);
  proc.open();
  for (const InputRecord& rec : random_case(r, "c")) {
    if (rec.kind != RecordKind::Task) {
      feed(proc, rec);
      continue;
    }
    Json before = proc.snapshot(true);
    before.erase("recentEvents");
    const auto obligations = proc.core().l2.obligations().size();
    const auto tokens = proc.core().l2.tokens().size();
    const auto timers = proc.core().l2.timers();
    const auto trace = proc.trace().size();
    const TaskOutcome out = proc.attempt_task(rec.name, rec.payload, rec.ts);
    if (out.accepted) continue;
    if (rejections) ++*rejections;
    Json after = proc.snapshot(true);
    after.erase("recentEvents");
    if (before != after) return "status changed by rejected task at t=" + std::to_string(rec.ts);
    if (obligations != proc.core().l2.obligations().size() || tokens != proc.core().l2.tokens().size() ||
        timers != proc.core().l2.timers() || trace != proc.trace().size()) {
      return "L2 state changed by rejected task at t=" + std::to_string(rec.ts);
    }
  }
  return "";
}

/// The engine agrees with the oracle on one random model and case.
inline std::string check_oracle_equivalence(Rng& r) {
  const auto model = compile_model(random_model(r));
  return check_case(model, random_case(r, "c"));
}

}  // namespace hcep::testgen
