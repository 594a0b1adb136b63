#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hybridcep/model.hpp"
#include "hybridcep/process_state.hpp"
#include "hybridcep/replay.hpp"
#include "hybridcep/status_event.hpp"

// Offline evaluator: decides each constraint over a complete hybrid trace by
// scanning it directly, without the incremental machinery of the runtime.
// Used as ground truth in property tests and by `engine check`.

namespace hcep::oracle {

/// A case's observations up to the horizon m. Samples and events are each
/// sorted by time; `order` interleaves them in arrival order (false = next
/// sample, true = next event). When `order` is empty, samples precede events
/// at equal timestamps.
struct HybridTrace {
  std::string caseId;
  std::vector<SignalSample> samples;
  std::vector<TaskEvent> events;
  Seconds horizon = 0.0;
  std::vector<bool> order;
};

/// Builds one trace per case from parsed input records, in first-appearance
/// order. The horizon is the case's close time, else its last timestamp.
std::vector<HybridTrace> traces_from_records(const std::vector<InputRecord>& records);

/// Throws EngineError when the trace is unsorted, non-finite or extends past
/// its horizon.
void check_trace(const HybridTrace& trace);

/// A maximal run of steps on which the predicate holds, over [from, to).
/// `emission` is from + sustainedFor when the run lasts that long (a run that
/// reaches the horizon counts up to and including it). Occurrence conditions
/// (those mentioning dis(...)) yield one instant per matching task event.
struct ConditionInterval {
  Seconds from = 0.0;
  Seconds to = 0.0;
  std::optional<Seconds> emission;
};

std::vector<ConditionInterval> condition_intervals(const Condition& c, const HybridTrace& trace);

/// An L1 emission as the oracle derives it.
struct Emission {
  Role role = Role::Target;
  Seconds ts = 0.0;
  Attributes payload;
};

/// ACTIVATION/TARGET emissions of one constraint, in processing order.
std::vector<Emission> emissions(const ConstraintSpec& spec, const HybridTrace& trace);

struct Witness {
  std::string kind;
  Seconds from = 0.0;
  Seconds to = 0.0;  // equal to `from` for instants
};

struct Verdict {
  std::string constraintId;
  Outcome outcome = Outcome::Vacuous;
  std::vector<Witness> witnesses;
};

Verdict evaluate(const ConstraintSpec& spec, const HybridTrace& trace);

/// Verdicts for every constraint of the model, in compiled order.
std::vector<Verdict> evaluate_all(const CompiledModel& model, const HybridTrace& trace);

Json to_json(const Verdict& v);

}  // namespace hcep::oracle
