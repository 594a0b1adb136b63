#include "hybridcep/case_processor.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "hybridcep/errors.hpp"

namespace hcep {

namespace {

constexpr int kMaxInjectionRounds = 8;
constexpr int kMaxHypotheticalRuns = 64;

/// Holds L2 notifications of a shadow run until the run is committed.
class BufferedObserver : public L2Observer {
 public:
  void on_l2_change(const Json& record) override { records.push_back(record); }
  std::vector<Json> records;
};

}  // namespace

const char* to_string(TaskAvailability a) {
  switch (a) {
    case TaskAvailability::Allowed: return "allowed";
    case TaskAvailability::Blocked: return "blocked";
    case TaskAvailability::Conditional: return "conditional";
  }
  return "?";
}

Json to_json(const CompiledModel& model, const std::string& caseId, const Output& out) {
  struct Visitor {
    const CompiledModel& model;
    const std::string& caseId;

    Json operator()(const StatusEvent& e) const { return to_json(model, caseId, e); }
    Json operator()(const TransitionRecord& t) const {
      return Json{{"type", "transition"},
                  {"caseId", caseId},
                  {"constraintId", model.constraints[t.constraintIndex].spec.id},
                  {"from", to_string(t.from)},
                  {"to", to_string(t.to)},
                  {"openCount", t.openCount},
                  {"ts", t.ts},
                  {"cause", t.causeEventId}};
    }
    Json operator()(const ActionFiring& a) const {
      Json j{{"type", "action"},
             {"caseId", caseId},
             {"constraintId", model.constraints[a.constraintIndex].spec.id},
             {"kind", to_string(a.action.kind)},
             {"target", a.action.target},
             {"ts", a.ts},
             {"cause", a.causeEventId}};
      if (!a.action.payloadTemplate.empty()) j["payload"] = to_json(a.action.payloadTemplate);
      if (a.action.halt) j["halt"] = true;
      return j;
    }
    Json operator()(const InjectedTask& t) const {
      Json j = to_json(t.task);
      j["type"] = "task";
      j["injected"] = true;
      j["cause"] = t.causeEventId;
      return j;
    }
    Json operator()(const Rejection& r) const {
      Json reasons = Json::array();
      for (const auto& x : r.reasons) reasons.push_back({{"constraintId", x.constraintId}, {"reason", x.reason}});
      Json j = to_json(r.task);
      j["type"] = "rejected";
      j["reasons"] = std::move(reasons);
      return j;
    }
    Json operator()(const CloseRecord& c) const {
      return Json{{"type", "closed"}, {"caseId", caseId}, {"ts", c.ts}, {"finishable", c.finishable}};
    }
  };
  Json j = std::visit(Visitor{model, caseId}, out);
  return j;
}

// ---------------------------------------------------------------------------
// CaseCore

CaseCore::CaseCore(const CompiledModel* model, std::string caseId)
    : l1(model), l2(model), l3(model), model_(model), caseId_(std::move(caseId)) {}

std::string CaseCore::next_event_id() { return caseId_ + ":e" + std::to_string(++seq_); }

void CaseCore::apply_l3(const StatusEvent& e, std::vector<Output>& out) {
  const ProcessState::Applied r = l3.apply(e);
  if (r.transition) out.emplace_back(*r.transition);
  if (!r.action) return;
  out.emplace_back(ActionFiring{e.constraintIndex, *r.action, e.type, e.eventId, e.ts});
  if (r.action->halt) halted = true;
  if (r.action->kind == ActionKind::AutoTask) {
    InjectedTask t;
    t.task.caseId = caseId_;
    t.task.activity = r.action->target;
    t.task.ts = e.ts;
    t.task.payload = r.action->payloadTemplate;
    t.task.eventId = caseId_ + ":auto" + std::to_string(++injectedSeq_);
    t.causeEventId = e.eventId;
    pending_.push_back(std::move(t));
  }
}

void CaseCore::run_step(std::vector<StatusEvent> events, Hypothesis* hyp, std::vector<Output>& out) {
  for (StatusEvent& e : events) {
    e.eventId = next_event_id();
    out.emplace_back(e);
    apply_l3(e, out);
    for (StatusEvent& d : l2.on_status_event(e, hyp)) {
      d.eventId = next_event_id();
      d.placeholder = e.placeholder;
      d.sourceEventId = e.sourceEventId;
      out.emplace_back(d);
      apply_l3(d, out);
    }
  }
}

void CaseCore::open(std::vector<Output>& out) {
  l2.open(0.0);
  run_step(l1.open(0.0), nullptr, out);
  drain_injections(out);
}

void CaseCore::fire_until(Seconds t, bool inclusive, std::vector<Output>& out) {
  for (;;) {
    const std::optional<Seconds> d1 = l1.next_deadline();
    const std::optional<TimerEntry> d2 = l2.next_timer();
    const bool l1Due = d1 && *d1 <= t;
    const bool l2Due = d2 && (inclusive ? d2->dueAt <= t : d2->dueAt < t);
    if (!l1Due && !l2Due) break;
    if (l1Due && (!l2Due || *d1 <= d2->dueAt)) {
      watermark = std::max(watermark, *d1);
      run_step(l1.fire_due(*d1), nullptr, out);
    } else {
      watermark = std::max(watermark, d2->dueAt);
      std::vector<StatusEvent> fired = l2.fire_next();
      for (StatusEvent& d : fired) {
        d.eventId = next_event_id();
        out.emplace_back(d);
        apply_l3(d, out);
      }
    }
    drain_injections(out);
  }
}

void CaseCore::signal_step(std::size_t variable, double value, Seconds ts, std::vector<Output>& out) {
  watermark = std::max(watermark, ts);
  run_step(l1.ingest_signal(variable, value, ts), nullptr, out);
}

void CaseCore::task_step(std::size_t activity, const Attributes* payload, const std::string& eventId,
                         Seconds ts, Hypothesis* hyp, std::vector<Output>& out) {
  watermark = std::max(watermark, ts);
  run_step(l1.ingest_task(activity, payload, eventId, ts, hyp), hyp, out);
}

void CaseCore::close_step(Seconds ts, std::vector<Output>& out) {
  watermark = std::max(watermark, ts);
  for (StatusEvent& d : l2.close(ts)) {
    d.eventId = next_event_id();
    out.emplace_back(d);
    apply_l3(d, out);
  }
  pending_.clear();
  closed = true;
  out.emplace_back(CloseRecord{ts, l3.finishable()});
}

void CaseCore::drain_injections(std::vector<Output>& out) {
  for (int round = 0; round < kMaxInjectionRounds && !pending_.empty(); ++round) {
    std::vector<InjectedTask> batch;
    batch.swap(pending_);
    for (InjectedTask& t : batch) {
      const auto activity = model_->activity_index(t.task.activity);
      if (!activity) continue;
      out.emplace_back(t);
      task_step(*activity, &t.task.payload, t.task.eventId, t.task.ts, nullptr, out);
    }
  }
  pending_.clear();
}

// ---------------------------------------------------------------------------
// CaseProcessor

CaseProcessor::CaseProcessor(std::shared_ptr<const CompiledModel> model, std::string caseId,
                             EnforcementMode mode)
    : model_(std::move(model)),
      mode_(mode),
      core_(model_.get(), std::move(caseId)),
      history_(model_->constraints.size()) {}

void CaseProcessor::set_l2_observer(L2Observer* observer) {
  observer_ = observer;
  core_.l2.set_observer(observer);
}

void CaseProcessor::ensure_open(std::vector<Output>& out) {
  if (opened_) return;
  opened_ = true;
  core_.open(out);
}

std::vector<Output> CaseProcessor::open() {
  std::vector<Output> out;
  ensure_open(out);
  record(out);
  return out;
}

void CaseProcessor::check_input(Seconds ts) const {
  if (core_.closed) throw EngineError("case '" + case_id() + "' is closed");
  if (!(ts >= core_.watermark)) throw StaleSample(ts, core_.watermark);
}

void CaseProcessor::record(const std::vector<Output>& outputs) {
  for (const Output& o : outputs) {
    if (const auto* t = std::get_if<TransitionRecord>(&o)) {
      auto& h = history_[t->constraintIndex];
      h.push_back(*t);
      if (h.size() > kHistoryLimit) h.pop_front();
    } else if (const auto* inj = std::get_if<InjectedTask>(&o)) {
      trace_.push_back(inj->task);
    }
    recent_.push_back(o);
    if (recent_.size() > kRecentLimit) recent_.pop_front();
  }
}

std::vector<Output> CaseProcessor::ingest_signal(const std::string& sensorId, double value, Seconds ts) {
  const auto var = model_->variable_index(sensorId);
  if (!var) throw UnknownSensor(sensorId);
  check_input(ts);
  std::vector<Output> out;
  ensure_open(out);
  core_.fire_until(ts, false, out);
  core_.signal_step(*var, value, ts, out);
  core_.drain_injections(out);
  record(out);
  return out;
}

std::vector<RejectReason> CaseProcessor::violations_in(const std::vector<ConstraintInstanceState>& before,
                                                       const std::vector<Output>& outputs) const {
  std::vector<RejectReason> reasons;
  for (const Output& o : outputs) {
    const auto* e = std::get_if<StatusEvent>(&o);
    if (!e || !is_violation(e->type)) continue;
    if (before[e->constraintIndex].state == ConstraintState::PermanentlyViolated) continue;
    RejectReason r{model_->constraints[e->constraintIndex].spec.id, e->reason};
    if (std::find(reasons.begin(), reasons.end(), r) == reasons.end()) reasons.push_back(std::move(r));
  }
  return reasons;
}

TaskOutcome CaseProcessor::attempt_task(const std::string& activity, const Attributes& payload,
                                        Seconds ts, std::string eventId) {
  const auto act = model_->activity_index(activity);
  if (!act) throw UnknownActivity(activity);
  if (const TaskDecl* decl = model_->model.find_task(activity)) {
    for (const auto& [k, v] : payload) {
      if (std::find(decl->payload.begin(), decl->payload.end(), k) == decl->payload.end()) {
        throw EngineError("task '" + activity + "' has no payload attribute '" + k + "'");
      }
    }
  } else if (!payload.empty()) {
    throw EngineError("activity '" + activity + "' takes no payload");
  }
  check_input(ts);

  TaskOutcome result;
  if (eventId.empty()) eventId = case_id() + ":t" + std::to_string(++taskSeq_);
  result.eventId = eventId;
  TaskEvent task{case_id(), activity, ts, payload, eventId};

  std::vector<Output> out;
  ensure_open(out);
  if (mode_ == EnforcementMode::Prevent) {
    if (core_.halted) {
      result.accepted = false;
      result.reasons.push_back({"", "case halted"});
    } else {
      BufferedObserver buffered;
      CaseCore shadow = core_;
      shadow.l2.set_observer(observer_ ? &buffered : nullptr);
      std::vector<Output> pre;
      shadow.fire_until(ts, false, pre);
      const std::vector<ConstraintInstanceState> before = shadow.l3.states();
      std::vector<Output> own;
      shadow.task_step(*act, &task.payload, eventId, ts, nullptr, own);
      result.reasons = violations_in(before, own);
      if (result.reasons.empty()) {
        core_ = std::move(shadow);
        core_.l2.set_observer(observer_);
        for (const Json& r : buffered.records) observer_->on_l2_change(r);
        out.insert(out.end(), pre.begin(), pre.end());
        out.insert(out.end(), own.begin(), own.end());
      } else {
        result.accepted = false;
      }
    }
    if (!result.accepted) {
      out.emplace_back(Rejection{task, result.reasons});
      record(out);
      result.outputs = std::move(out);
      return result;
    }
  } else {
    core_.fire_until(ts, false, out);
    core_.task_step(*act, &task.payload, eventId, ts, nullptr, out);
  }
  trace_.push_back(task);
  core_.drain_injections(out);
  record(out);
  result.outputs = std::move(out);
  return result;
}

std::vector<Output> CaseProcessor::advance_watermark(Seconds t) {
  std::vector<Output> out;
  ensure_open(out);
  if (core_.closed || !(t >= core_.watermark)) return out;
  core_.fire_until(t, true, out);
  core_.watermark = t;
  record(out);
  return out;
}

std::vector<Output> CaseProcessor::close(Seconds t) {
  check_input(t);
  std::vector<Output> out;
  ensure_open(out);
  core_.fire_until(t, true, out);
  core_.close_step(t, out);
  record(out);
  return out;
}

// ---------------------------------------------------------------------------
// Enabled-task analysis

namespace {

/// Explores one assignment of truth values to undecided payload predicates.
/// Predicates seen for the first time default to false and are reported so
/// that the caller can branch on them.
class PathResolver : public Hypothesis {
 public:
  explicit PathResolver(std::map<std::string, bool> assigned) : assigned_(std::move(assigned)) {}

  bool decide(const Predicate& residual) override {
    const std::string key = residual.to_string();
    auto it = assigned_.find(key);
    bool value = false;
    if (it == assigned_.end()) {
      assigned_.emplace(key, false);
      fresh_.push_back(key);
    } else {
      value = it->second;
    }
    if (seen_.insert(key).second) taken_.emplace_back(residual, value);
    return value;
  }

  const std::vector<std::string>& fresh() const { return fresh_; }
  const std::vector<std::pair<Predicate, bool>>& taken() const { return taken_; }

 private:
  std::map<std::string, bool> assigned_;
  std::vector<std::string> fresh_;
  std::set<std::string> seen_;
  std::vector<std::pair<Predicate, bool>> taken_;
};

}  // namespace

std::vector<TaskStatus> CaseProcessor::enabled_tasks() const {
  std::vector<TaskStatus> result;
  for (const TaskDecl& decl : model_->model.tasks) {
    TaskStatus status;
    status.name = decl.name;
    if (core_.closed) {
      status.status = TaskAvailability::Blocked;
      status.reason = "case closed";
      result.push_back(std::move(status));
      continue;
    }
    if (mode_ == EnforcementMode::Prevent && core_.halted) {
      status.status = TaskAvailability::Blocked;
      status.reason = "case halted";
      result.push_back(std::move(status));
      continue;
    }
    const std::size_t act = *model_->activity_index(decl.name);

    std::vector<std::map<std::string, bool>> work{{}};
    std::vector<Predicate> violatingPaths;
    std::vector<std::string> reasons;
    int violating = 0;
    int total = 0;
    while (!work.empty() && total < kMaxHypotheticalRuns) {
      std::map<std::string, bool> assigned = std::move(work.back());
      work.pop_back();
      PathResolver resolver(assigned);

      CaseCore shadow = core_;
      shadow.l2.set_observer(nullptr);
      std::vector<Output> pre;
      shadow.fire_until(core_.watermark, false, pre);
      const std::vector<ConstraintInstanceState> before = shadow.l3.states();
      std::vector<Output> own;
      shadow.task_step(act, nullptr, "", core_.watermark, &resolver, own);
      ++total;

      const std::vector<RejectReason> found = violations_in(before, own);
      if (!found.empty()) {
        ++violating;
        for (const auto& r : found) {
          const std::string text = r.reason + " (constraint " + r.constraintId + ")";
          if (std::find(reasons.begin(), reasons.end(), text) == reasons.end()) reasons.push_back(text);
        }
        std::optional<Predicate> path;
        for (const auto& [pred, value] : resolver.taken()) {
          Predicate lit = value ? pred : Predicate::negate(pred);
          path = path ? Predicate::conj(*path, lit) : lit;
        }
        violatingPaths.push_back(path ? *path : Predicate::truth());
      }

      const auto& fresh = resolver.fresh();
      for (std::size_t i = 0; i < fresh.size(); ++i) {
        std::map<std::string, bool> next = assigned;
        for (std::size_t j = 0; j < i; ++j) next[fresh[j]] = false;
        next[fresh[i]] = true;
        work.push_back(std::move(next));
      }
    }

    std::string joined;
    for (const auto& r : reasons) joined += (joined.empty() ? "" : "; ") + r;
    if (violating == 0) {
      status.status = TaskAvailability::Allowed;
    } else if (violating == total && work.empty()) {
      status.status = TaskAvailability::Blocked;
      status.reason = joined;
    } else {
      status.status = TaskAvailability::Conditional;
      status.reason = joined;
      Predicate restriction = violatingPaths.front();
      for (std::size_t i = 1; i < violatingPaths.size(); ++i) {
        restriction = Predicate::disj(restriction, violatingPaths[i]);
      }
      status.restriction = restriction;
    }
    result.push_back(std::move(status));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Documents

Json CaseProcessor::snapshot(bool includeTasks) const {
  Json constraints = Json::array();
  for (std::size_t i = 0; i < model_->constraints.size(); ++i) {
    const ConstraintInstanceState& s = core_.l3.state(i);
    Json history = Json::array();
    for (const TransitionRecord& t : history_[i]) {
      history.push_back({{"cause", to_string(t.cause)},
                         {"eventId", t.causeEventId},
                         {"from", to_string(t.from)},
                         {"to", to_string(t.to)},
                         {"ts", t.ts}});
    }
    constraints.push_back({{"id", model_->constraints[i].spec.id},
                           {"template", to_string(model_->constraints[i].spec.templ)},
                           {"state", to_string(s.state)},
                           {"openCount", s.openCount},
                           {"lastTransitionAt", s.lastTransitionAt},
                           {"violations", s.violations},
                           {"outcome", to_string(core_.l3.outcome(i))},
                           {"history", std::move(history)}});
  }
  Json doc{{"caseId", case_id()},
           {"watermark", core_.watermark},
           {"finishable", core_.l3.finishable()},
           {"halted", core_.halted},
           {"closed", core_.closed},
           {"enforcement", to_string(mode_)},
           {"constraints", std::move(constraints)}};
  if (includeTasks) {
    Json tasks = Json::array();
    for (const TaskStatus& t : enabled_tasks()) {
      Json j{{"name", t.name}, {"status", to_string(t.status)}};
      if (!t.reason.empty()) j["reason"] = t.reason;
      if (t.restriction) j["restriction"] = t.restriction->to_string();
      tasks.push_back(std::move(j));
    }
    doc["tasks"] = std::move(tasks);
  }
  Json recent = Json::array();
  for (const Output& o : recent_) recent.push_back(to_json(*model_, case_id(), o));
  doc["recentEvents"] = std::move(recent);
  return doc;
}

Json CaseProcessor::summary() const {
  Json constraints = Json::array();
  for (std::size_t i = 0; i < model_->constraints.size(); ++i) {
    const ConstraintInstanceState& s = core_.l3.state(i);
    constraints.push_back({{"id", model_->constraints[i].spec.id},
                           {"state", to_string(s.state)},
                           {"openCount", s.openCount},
                           {"outcome", to_string(core_.l3.outcome(i))}});
  }
  return Json{{"type", "summary"},
              {"caseId", case_id()},
              {"watermark", core_.watermark},
              {"finishable", core_.l3.finishable()},
              {"halted", core_.halted},
              {"closed", core_.closed},
              {"constraints", std::move(constraints)}};
}

}  // namespace hcep
