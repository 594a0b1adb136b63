#include "hybridcep/signal_runtime.hpp"

#include <algorithm>
#include <cassert>

namespace hcep {

namespace {

int slot_of(const CompiledModel& model, const Predicate& p) {
  if (p.slot() >= 0) return p.slot();
  const auto idx = p.kind() == Predicate::Kind::Comparison ? model.variable_index(p.name())
                                                           : model.activity_index(p.name());
  return idx ? static_cast<int>(*idx) : -1;
}

}  // namespace

bool eval_predicate(const CompiledModel& model, const Predicate& p, const HybridSnapshot& snapshot,
                    const Attributes* taskPayload) {
  const Tri r = evaluate3(p, [&](const Predicate& leaf) {
    switch (leaf.kind()) {
      case Predicate::Kind::Comparison: {
        const int s = slot_of(model, leaf);
        if (s < 0 || static_cast<std::size_t>(s) >= snapshot.values.size() || !snapshot.values[s]) {
          return Tri::False;
        }
        return to_tri(compare_numbers(*snapshot.values[s], leaf.op(), leaf.threshold()));
      }
      case Predicate::Kind::Dis: {
        const int s = slot_of(model, leaf);
        return to_tri(s >= 0 && snapshot.dis(static_cast<std::size_t>(s)));
      }
      case Predicate::Kind::Payload: {
        const Attributes& src = taskPayload ? *taskPayload : snapshot.lastPayload;
        auto it = src.find(leaf.name());
        return to_tri(it != src.end() && compare_values(it->second, leaf.op(), leaf.value()));
      }
      default: return Tri::False;
    }
  });
  return r == Tri::True;
}

SignalRuntime::SignalRuntime(const CompiledModel* model)
    : model_(model), states_(model->detectors.size()) {
  snapshot_.values.resize(model->continuousVars.size());
  snapshot_.updatedAt.resize(model->continuousVars.size(), 0.0);
}

Tri SignalRuntime::evaluate(const Predicate& p, const Attributes* taskPayload, bool placeholder) const {
  return evaluate3(p, [&](const Predicate& leaf) {
    switch (leaf.kind()) {
      case Predicate::Kind::Comparison: {
        const auto& v = snapshot_.values[static_cast<std::size_t>(leaf.slot())];
        return v ? to_tri(compare_numbers(*v, leaf.op(), leaf.threshold())) : Tri::False;
      }
      case Predicate::Kind::Dis:
        return to_tri(snapshot_.dis(static_cast<std::size_t>(leaf.slot())));
      case Predicate::Kind::Payload: {
        if (placeholder) return Tri::Unknown;
        const Attributes& src = taskPayload ? *taskPayload : snapshot_.lastPayload;
        auto it = src.find(leaf.name());
        return to_tri(it != src.end() && compare_values(it->second, leaf.op(), leaf.value()));
      }
      default: return Tri::False;
    }
  });
}

bool SignalRuntime::decide(const Predicate& p, const Attributes* taskPayload, bool placeholder,
                           Hypothesis* hyp) const {
  const Tri r = evaluate(p, taskPayload, placeholder);
  if (r != Tri::Unknown) return r == Tri::True;
  assert(hyp != nullptr);
  const Predicate rest =
      residual(p, [&](const Predicate& leaf) { return evaluate(leaf, taskPayload, placeholder); });
  return hyp->decide(rest);
}

StatusEvent SignalRuntime::emission(std::size_t detector, Seconds ts, const Attributes* taskPayload) const {
  const DetectorSpec& d = model_->detectors[detector];
  StatusEvent e;
  e.constraintIndex = d.constraintIndex;
  e.type = d.role == Role::Activation ? StatusType::Activation : StatusType::Target;
  e.ts = ts;
  for (std::size_t i = 0; i < snapshot_.values.size(); ++i) {
    if (snapshot_.values[i]) e.payload.emplace(model_->continuousVars[i], *snapshot_.values[i]);
  }
  if (snapshot_.lastPayloadUnknown) {
    e.placeholder = true;
  } else {
    const Attributes& src = taskPayload ? *taskPayload : snapshot_.lastPayload;
    for (const auto& [k, v] : src) e.payload.insert_or_assign(k, v);
  }
  return e;
}

void SignalRuntime::sort_emissions(std::vector<StatusEvent>& out) {
  std::stable_sort(out.begin(), out.end(), [](const StatusEvent& a, const StatusEvent& b) {
    if (a.constraintIndex != b.constraintIndex) return a.constraintIndex < b.constraintIndex;
    return a.type == StatusType::Target && b.type != StatusType::Target;
  });
}

void SignalRuntime::update_levels(Seconds ts, Hypothesis* hyp,
                                  std::vector<StatusEvent>& out) {
  for (std::size_t i = 0; i < states_.size(); ++i) {
    const DetectorSpec& d = model_->detectors[i];
    if (d.occurrence) continue;
    const bool holds = decide(d.condition.predicate, nullptr, snapshot_.lastPayloadUnknown, hyp);
    DetectorState& s = states_[i];
    if (!holds) {
      s.phase = DetectorPhase::Idle;
      continue;
    }
    if (s.phase != DetectorPhase::Idle) continue;
    if (d.condition.sustainedFor == 0.0) {
      s.phase = DetectorPhase::Fired;
      s.lastEmission = ts;
      out.push_back(emission(i, ts, nullptr));
    } else {
      s.phase = DetectorPhase::Holding;
      s.since = ts;
    }
  }
}

std::vector<StatusEvent> SignalRuntime::open(Seconds t) {
  snapshot_.caseStartTime = t;
  std::vector<StatusEvent> out;
  update_levels(t, nullptr, out);
  sort_emissions(out);
  return out;
}

std::vector<StatusEvent> SignalRuntime::ingest_signal(std::size_t variable, double value, Seconds ts,
                                                      Hypothesis* hyp) {
  snapshot_.values[variable] = value;
  snapshot_.updatedAt[variable] = ts;
  std::vector<StatusEvent> out;
  update_levels(ts, hyp, out);
  sort_emissions(out);
  return out;
}

std::vector<StatusEvent> SignalRuntime::ingest_task(std::size_t activity, const Attributes* payload,
                                                    const std::string& eventId, Seconds ts,
                                                    Hypothesis* hyp) {
  const bool placeholder = payload == nullptr;
  snapshot_.lastActivity = static_cast<int>(activity);
  snapshot_.lastPayload = placeholder ? Attributes{} : *payload;
  snapshot_.lastPayloadUnknown = placeholder;

  std::vector<StatusEvent> out;
  for (std::size_t i = 0; i < states_.size(); ++i) {
    const DetectorSpec& d = model_->detectors[i];
    if (!d.occurrence) continue;
    if (!decide(d.condition.predicate, payload, placeholder, hyp)) continue;
    states_[i].lastEmission = ts;
    StatusEvent e = emission(i, ts, payload);
    e.sourceEventId = eventId;
    out.push_back(std::move(e));
  }
  update_levels(ts, hyp, out);
  for (auto& e : out) {
    if (e.sourceEventId.empty()) e.sourceEventId = eventId;
  }
  sort_emissions(out);
  return out;
}

std::optional<Seconds> SignalRuntime::next_deadline() const {
  std::optional<Seconds> best;
  for (std::size_t i = 0; i < states_.size(); ++i) {
    if (states_[i].phase != DetectorPhase::Holding) continue;
    const Seconds due = states_[i].since + model_->detectors[i].condition.sustainedFor;
    if (!best || due < *best) best = due;
  }
  return best;
}

std::vector<StatusEvent> SignalRuntime::fire_due(Seconds t) {
  std::vector<StatusEvent> out;
  for (std::size_t i = 0; i < states_.size(); ++i) {
    DetectorState& s = states_[i];
    if (s.phase != DetectorPhase::Holding) continue;
    const Seconds due = s.since + model_->detectors[i].condition.sustainedFor;
    if (due > t) continue;
    s.phase = DetectorPhase::Fired;
    s.lastEmission = due;
    out.push_back(emission(i, due, nullptr));
  }
  sort_emissions(out);
  return out;
}

}  // namespace hcep
