#pragma once

#include <optional>
#include <vector>

#include "hybridcep/model.hpp"
#include "hybridcep/status_event.hpp"

namespace hcep {

/// Supplies truth values for payload predicates that cannot be decided
/// because the task payload is a placeholder (used by enabled-task analysis).
class Hypothesis {
 public:
  virtual ~Hypothesis() = default;
  /// `residual` mentions only payload comparisons.
  virtual bool decide(const Predicate& residual) = 0;
};

/// Current hybrid state of one case: sample-and-hold continuous values and
/// the boolean task signals (the most recent task is the only one at 1).
struct HybridSnapshot {
  std::vector<std::optional<double>> values;  // per continuous variable
  std::vector<Seconds> updatedAt;
  int lastActivity = -1;      // index into CompiledModel::activities
  Attributes lastPayload;     // payload of the most recent task event
  bool lastPayloadUnknown = false;
  Seconds caseStartTime = 0.0;

  bool dis(std::size_t activity) const { return lastActivity == static_cast<int>(activity); }
};

/// Boolean predicate semantics. Unsampled variables compare false; payload
/// comparisons read `taskPayload` when given, else the last task payload.
/// Works on bound and unbound predicates.
bool eval_predicate(const CompiledModel& model, const Predicate& p, const HybridSnapshot& snapshot,
                    const Attributes* taskPayload);

enum class DetectorPhase { Idle, Holding, Fired };

struct DetectorState {
  DetectorPhase phase = DetectorPhase::Idle;
  Seconds since = 0.0;
  std::optional<Seconds> lastEmission;
};

/// Layer L1 for one case.
class SignalRuntime {
 public:
  explicit SignalRuntime(const CompiledModel* model);

  /// Evaluates level detectors against the empty snapshot at case start.
  std::vector<StatusEvent> open(Seconds t);

  std::vector<StatusEvent> ingest_signal(std::size_t variable, double value, Seconds ts,
                                         Hypothesis* hyp = nullptr);

  /// `payload == nullptr` marks a placeholder payload; `hyp` must then be set.
  std::vector<StatusEvent> ingest_task(std::size_t activity, const Attributes* payload,
                                       const std::string& eventId, Seconds ts,
                                       Hypothesis* hyp = nullptr);

  /// Earliest sustained-hold deadline among holding detectors.
  std::optional<Seconds> next_deadline() const;

  /// Fires every holding detector whose deadline is <= t, stamped at its
  /// own deadline. Callers pass the value of next_deadline() to keep
  /// deadlines at distinct instants in separate steps.
  std::vector<StatusEvent> fire_due(Seconds t);

  const HybridSnapshot& snapshot() const { return snapshot_; }
  const std::vector<DetectorState>& detectors() const { return states_; }

 private:
  Tri evaluate(const Predicate& p, const Attributes* taskPayload, bool placeholder) const;
  bool decide(const Predicate& p, const Attributes* taskPayload, bool placeholder,
              Hypothesis* hyp) const;
  void update_levels(Seconds ts, Hypothesis* hyp, std::vector<StatusEvent>& out);
  StatusEvent emission(std::size_t detector, Seconds ts, const Attributes* taskPayload) const;
  static void sort_emissions(std::vector<StatusEvent>& out);

  const CompiledModel* model_;
  HybridSnapshot snapshot_;
  std::vector<DetectorState> states_;
};

}  // namespace hcep
