#pragma once

#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "hybridcep/model.hpp"
#include "hybridcep/pattern_matcher.hpp"
#include "hybridcep/process_state.hpp"
#include "hybridcep/signal_runtime.hpp"
#include "hybridcep/status_event.hpp"

namespace hcep {

struct ActionFiring {
  std::size_t constraintIndex = 0;
  ActionRef action;
  StatusType cause = StatusType::Violation;
  std::string causeEventId;
  Seconds ts = 0.0;
};

struct RejectReason {
  std::string constraintId;
  std::string reason;
  friend bool operator==(const RejectReason&, const RejectReason&) = default;
};

struct Rejection {
  TaskEvent task;
  std::vector<RejectReason> reasons;
};

/// Synthetic task produced by an autoTask action.
struct InjectedTask {
  TaskEvent task;
  std::string causeEventId;
};

struct CloseRecord {
  Seconds ts = 0.0;
  bool finishable = false;
};

using Output = std::variant<StatusEvent, TransitionRecord, ActionFiring, InjectedTask, Rejection, CloseRecord>;

Json to_json(const CompiledModel& model, const std::string& caseId, const Output& out);

struct TaskOutcome {
  bool accepted = true;
  std::string eventId;
  std::vector<RejectReason> reasons;
  std::vector<Output> outputs;
};

enum class TaskAvailability { Allowed, Blocked, Conditional };

const char* to_string(TaskAvailability a);

struct TaskStatus {
  std::string name;
  TaskAvailability status = TaskAvailability::Allowed;
  std::string reason;
  /// For conditional tasks: the payload condition under which the task
  /// would be rejected.
  std::optional<Predicate> restriction;
};

/// L1 + L2 + L3 for one case plus the event-time clock. Copyable so that a
/// task attempt can run on a shadow copy.
class CaseCore {
 public:
  CaseCore(const CompiledModel* model, std::string caseId);

  void open(std::vector<Output>& out);

  /// Fires sustained-hold deadlines <= t and L2 timers < t (or <= t when
  /// `inclusive`), in time order; at equal instants L1 deadlines go first.
  void fire_until(Seconds t, bool inclusive, std::vector<Output>& out);

  void signal_step(std::size_t variable, double value, Seconds ts, std::vector<Output>& out);
  void task_step(std::size_t activity, const Attributes* payload, const std::string& eventId,
                 Seconds ts, Hypothesis* hyp, std::vector<Output>& out);
  void close_step(Seconds ts, std::vector<Output>& out);

  /// Runs autoTask injections queued by actions, bounded in depth.
  void drain_injections(std::vector<Output>& out);

  const CompiledModel* model() const { return model_; }
  const std::string& case_id() const { return caseId_; }

  SignalRuntime l1;
  PatternMatcher l2;
  ProcessState l3;
  Seconds watermark = 0.0;
  bool halted = false;
  bool closed = false;

 private:
  void run_step(std::vector<StatusEvent> events, Hypothesis* hyp, std::vector<Output>& out);
  void apply_l3(const StatusEvent& e, std::vector<Output>& out);
  std::string next_event_id();

  const CompiledModel* model_;
  std::string caseId_;
  std::uint64_t seq_ = 0;
  std::uint64_t injectedSeq_ = 0;
  std::vector<InjectedTask> pending_;
};

/// Per-case processor: owns the case core, the transition history and the
/// recent-output window used by status documents. Not thread-safe; callers
/// serialize access per case.
class CaseProcessor {
 public:
  static constexpr std::size_t kHistoryLimit = 64;
  static constexpr std::size_t kRecentLimit = 50;

  CaseProcessor(std::shared_ptr<const CompiledModel> model, std::string caseId,
                EnforcementMode mode);

  /// Opens the case at t=0 on its timeline (level detectors evaluated).
  std::vector<Output> open();

  std::vector<Output> ingest_signal(const std::string& sensorId, double value, Seconds ts);
  TaskOutcome attempt_task(const std::string& activity, const Attributes& payload, Seconds ts,
                           std::string eventId = "");
  std::vector<Output> advance_watermark(Seconds t);
  std::vector<Output> close(Seconds t);

  std::vector<TaskStatus> enabled_tasks() const;

  /// Status document: constraint states, finishability, tasks, recent events.
  Json snapshot(bool includeTasks = true) const;

  /// Final summary record with per-constraint state and outcome.
  Json summary() const;

  const CaseCore& core() const { return core_; }
  const std::string& case_id() const { return core_.case_id(); }
  Seconds watermark() const { return core_.watermark; }
  bool finishable() const { return core_.l3.finishable(); }
  bool closed() const { return core_.closed; }
  bool halted() const { return core_.halted; }
  EnforcementMode mode() const { return mode_; }
  const std::vector<TaskEvent>& trace() const { return trace_; }
  const std::deque<TransitionRecord>& history(std::size_t constraint) const { return history_[constraint]; }
  const CompiledModel& model() const { return *model_; }

  void set_l2_observer(L2Observer* observer);

 private:
  void ensure_open(std::vector<Output>& out);
  void check_input(Seconds ts) const;
  void record(const std::vector<Output>& outputs);
  std::vector<RejectReason> violations_in(const std::vector<ConstraintInstanceState>& before,
                                          const std::vector<Output>& outputs) const;

  std::shared_ptr<const CompiledModel> model_;
  EnforcementMode mode_;
  CaseCore core_;
  std::vector<std::deque<TransitionRecord>> history_;
  std::deque<Output> recent_;
  std::vector<TaskEvent> trace_;
  std::uint64_t taskSeq_ = 0;
  bool opened_ = false;
  L2Observer* observer_ = nullptr;
};

}  // namespace hcep
