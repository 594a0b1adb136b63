#include "hybridcep/process_state.hpp"

#include "hybridcep/errors.hpp"

namespace hcep {

const char* to_string(ConstraintState s) {
  switch (s) {
    case ConstraintState::Idle: return "Idle";
    case ConstraintState::Activated: return "Activated";
    case ConstraintState::Fulfilled: return "Fulfilled";
    case ConstraintState::Violated: return "Violated";
    case ConstraintState::PermanentlyViolated: return "PermanentlyViolated";
  }
  return "?";
}

const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::Fulfilled: return "fulfilled";
    case Outcome::Violated: return "violated";
    case Outcome::PermanentlyViolated: return "permanentlyViolated";
    case Outcome::Vacuous: return "vacuous";
    case Outcome::Pending: return "pending";
  }
  return "?";
}

ProcessState::ProcessState(const CompiledModel* model)
    : model_(model), states_(model->constraints.size()) {
  for (std::size_t i = 0; i < states_.size(); ++i) account(states_[i], i, +1);
}

void ProcessState::account(const ConstraintInstanceState& s, std::size_t i, int sign) {
  if (s.state == ConstraintState::PermanentlyViolated) permanentlyViolated_ += sign;
  if (s.state == ConstraintState::Activated && s.openCount > 0) activatedOpen_ += sign;
  if (s.state == ConstraintState::Idle && model_->constraints[i].spec.templ == Template::Existence) {
    existenceUnmet_ += sign;
  }
}

ProcessState::Applied ProcessState::apply(const StatusEvent& e) {
  if (e.constraintIndex >= states_.size()) throw UnknownConstraint(std::to_string(e.constraintIndex));
  const std::size_t i = e.constraintIndex;
  ConstraintInstanceState& s = states_[i];
  const ConstraintSpec& spec = model_->constraints[i].spec;
  Applied result;
  if (s.state == ConstraintState::PermanentlyViolated) return result;

  const ConstraintInstanceState before = s;
  switch (e.type) {
    case StatusType::Activation:
      if (spec.templ == Template::Response || spec.templ == Template::NotResponse) {
        s.openCount = s.state == ConstraintState::Activated ? s.openCount + 1 : 1;
        s.state = ConstraintState::Activated;
      }
      break;
    case StatusType::Target: break;
    case StatusType::Fulfillment:
      ++s.fulfillments;
      if (s.state == ConstraintState::Activated && s.openCount > 1) {
        --s.openCount;
      } else {
        s.state = ConstraintState::Fulfilled;
        s.openCount = 0;
        result.action = spec.onFulfillment ? &*spec.onFulfillment : nullptr;
      }
      break;
    case StatusType::Violation:
      ++s.violations;
      s.state = ConstraintState::Violated;
      s.openCount = 0;
      result.action = spec.onViolation ? &*spec.onViolation : nullptr;
      break;
    case StatusType::PermanentViolation:
      ++s.violations;
      s.state = ConstraintState::PermanentlyViolated;
      s.openCount = 0;
      result.action = spec.onViolation ? &*spec.onViolation : nullptr;
      break;
  }
  if (s.state != before.state || s.openCount != before.openCount) {
    s.lastTransitionAt = e.ts;
    account(before, i, -1);
    account(s, i, +1);
  }
  if (s.state != before.state || s.openCount != before.openCount || is_violation(e.type) ||
      e.type == StatusType::Fulfillment) {
    result.transition = TransitionRecord{i, e.type, e.eventId, before.state, s.state, s.openCount, e.ts};
  }
  return result;
}

bool ProcessState::finishable() const {
  return permanentlyViolated_ == 0 && activatedOpen_ == 0 && existenceUnmet_ == 0;
}

bool ProcessState::recompute_finishable() const {
  for (std::size_t i = 0; i < states_.size(); ++i) {
    const ConstraintInstanceState& s = states_[i];
    if (s.state == ConstraintState::PermanentlyViolated) return false;
    if (s.state == ConstraintState::Activated && s.openCount > 0) return false;
    if (s.state == ConstraintState::Idle && model_->constraints[i].spec.templ == Template::Existence) {
      return false;
    }
  }
  return true;
}

Outcome ProcessState::outcome(std::size_t i) const {
  const ConstraintInstanceState& s = states_[i];
  if (s.state == ConstraintState::PermanentlyViolated) return Outcome::PermanentlyViolated;
  if (s.violations > 0) return Outcome::Violated;
  switch (s.state) {
    case ConstraintState::Activated: return Outcome::Pending;
    case ConstraintState::Fulfilled: return Outcome::Fulfilled;
    case ConstraintState::Idle:
      return is_binary(model_->constraints[i].spec.templ) ? Outcome::Vacuous : Outcome::Pending;
    default: return Outcome::Violated;
  }
}

}  // namespace hcep
