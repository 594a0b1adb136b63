#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hybridcep/model.hpp"
#include "hybridcep/status_event.hpp"

namespace hcep {

enum class ConstraintState { Idle, Activated, Fulfilled, Violated, PermanentlyViolated };

const char* to_string(ConstraintState s);

struct ConstraintInstanceState {
  ConstraintState state = ConstraintState::Idle;
  int openCount = 0;  // meaningful while Activated
  Seconds lastTransitionAt = 0.0;
  std::uint32_t violations = 0;  // VIOLATION or PERMANENT_VIOLATION events applied
  std::uint32_t fulfillments = 0;

  friend bool operator==(const ConstraintInstanceState&, const ConstraintInstanceState&) = default;
};

struct TransitionRecord {
  std::size_t constraintIndex = 0;
  StatusType cause = StatusType::Activation;
  std::string causeEventId;
  ConstraintState from = ConstraintState::Idle;
  ConstraintState to = ConstraintState::Idle;
  int openCount = 0;
  Seconds ts = 0.0;
};

/// Final per-constraint outcome over a trace.
enum class Outcome { Fulfilled, Violated, PermanentlyViolated, Vacuous, Pending };

const char* to_string(Outcome o);

/// Layer L3 for one case.
class ProcessState {
 public:
  explicit ProcessState(const CompiledModel* model);

  struct Applied {
    std::optional<TransitionRecord> transition;  // set when the state or count changed
    const ActionRef* action = nullptr;
  };

  Applied apply(const StatusEvent& e);

  const std::vector<ConstraintInstanceState>& states() const { return states_; }
  const ConstraintInstanceState& state(std::size_t i) const { return states_[i]; }

  /// Maintained incrementally.
  bool finishable() const;
  /// Same predicate computed from the constraint states alone.
  bool recompute_finishable() const;

  Outcome outcome(std::size_t i) const;

 private:
  void account(const ConstraintInstanceState& s, std::size_t i, int sign);

  const CompiledModel* model_;
  std::vector<ConstraintInstanceState> states_;
  int permanentlyViolated_ = 0;
  int activatedOpen_ = 0;
  int existenceUnmet_ = 0;
};

}  // namespace hcep
