#pragma once

// Runs one case through the engine and through the oracle and compares the
// L1 emissions and final outcomes per constraint.

#include <sstream>
#include <string>
#include <vector>

#include "hybridcep/case_processor.hpp"
#include "hybridcep/oracle.hpp"
#include "hybridcep/replay.hpp"

namespace hcep::testgen {

struct CaseRun {
  /// Per constraint: (role, ts) of every ACTIVATION/TARGET in output order.
  std::vector<std::vector<std::pair<Role, Seconds>>> emissions;
  std::vector<Outcome> outcomes;
};

inline CaseRun run_engine(const std::shared_ptr<const CompiledModel>& model, const std::vector<InputRecord>& records) {
  CaseRun run;
  run.emissions.resize(model->constraints.size());
  CaseProcessor proc(model, records.empty() ? "c" : records.front().caseId, EnforcementMode::Report);
  auto collect = [&](const std::vector<Output>& out) {
    for (const Output& o : out) {
      const auto* e = std::get_if<StatusEvent>(&o);
      if (!e) continue;
      if (e->type == StatusType::Activation) run.emissions[e->constraintIndex].emplace_back(Role::Activation, e->ts);
      if (e->type == StatusType::Target) run.emissions[e->constraintIndex].emplace_back(Role::Target, e->ts);
    }
  };
  collect(proc.open());
  for (const InputRecord& r : records) {
    switch (r.kind) {
      case RecordKind::Signal: collect(proc.ingest_signal(r.name, r.value, r.ts)); break;
      case RecordKind::Task: collect(proc.attempt_task(r.name, r.payload, r.ts, r.eventId).outputs); break;
      case RecordKind::Close: collect(proc.close(r.ts)); break;
      case RecordKind::Watermark: collect(proc.advance_watermark(r.ts)); break;
    }
  }
  for (std::size_t i = 0; i < model->constraints.size(); ++i) run.outcomes.push_back(proc.core().l3.outcome(i));
  return run;
}

inline CaseRun run_oracle(const CompiledModel& model, const oracle::HybridTrace& trace) {
  CaseRun run;
  for (const CompiledConstraint& c : model.constraints) {
    std::vector<std::pair<Role, Seconds>> list;
    for (const oracle::Emission& e : oracle::emissions(c.spec, trace)) list.emplace_back(e.role, e.ts);
    run.emissions.push_back(std::move(list));
  }
  for (const oracle::Verdict& v : oracle::evaluate_all(model, trace)) run.outcomes.push_back(v.outcome);
  return run;
}

/// Empty when both agree, otherwise a description of the first difference.
inline std::string compare_runs(const CompiledModel& model, const CaseRun& engine, const CaseRun& reference) {
  for (std::size_t i = 0; i < model.constraints.size(); ++i) {
    const std::string id = model.constraints[i].spec.id;
    if (engine.emissions[i] != reference.emissions[i]) {
      std::ostringstream s;
      s << "constraint " << id << ": engine emitted " << engine.emissions[i].size() << " events, oracle "
        << reference.emissions[i].size();
      const std::size_t n = std::min(engine.emissions[i].size(), reference.emissions[i].size());
      for (std::size_t k = 0; k < n; ++k) {
        if (engine.emissions[i][k] != reference.emissions[i][k]) {
          s << "; first difference at #" << k << ": engine " << to_string(engine.emissions[i][k].first) << "@"
            << engine.emissions[i][k].second << " vs oracle " << to_string(reference.emissions[i][k].first) << "@"
            << reference.emissions[i][k].second;
          break;
        }
      }
      return s.str();
    }
    if (engine.outcomes[i] != reference.outcomes[i]) {
      return "constraint " + id + ": engine " + to_string(engine.outcomes[i]) + ", oracle " +
             to_string(reference.outcomes[i]);
    }
  }
  return "";
}

/// Compares engine and oracle on one generated case.
inline std::string check_case(const std::shared_ptr<const CompiledModel>& model, const std::vector<InputRecord>& records) {
  const auto traces = oracle::traces_from_records(records);
  if (traces.size() != 1) return "expected one case";
  return compare_runs(*model, run_engine(model, records), run_oracle(*model, traces.front()));
}

}  // namespace hcep::testgen
