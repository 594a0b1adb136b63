#include "hybridcep/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "hybridcep/errors.hpp"

namespace hcep::oracle {

namespace {

/// Position on the processing order: the open step at 0, then per instant
/// sustained deadlines (phase 0) before input records (phase 1).
struct Key {
  Seconds t = 0.0;
  int phase = 0;
  std::size_t index = 0;
  friend bool operator<(const Key& a, const Key& b) {
    return std::tie(a.t, a.phase, a.index) < std::tie(b.t, b.phase, b.index);
  }
};

/// Observable state after one step.
struct Step {
  Key key;
  std::map<std::string, double> values;
  std::string lastActivity;
  Attributes lastPayload;
  const TaskEvent* task = nullptr;  // set on task steps
};

bool eval(const Predicate& p, const Step& s, const Attributes& payload) {
  switch (p.kind()) {
    case Predicate::Kind::True: return true;
    case Predicate::Kind::Comparison: {
      auto it = s.values.find(p.name());
      return it != s.values.end() && compare_numbers(it->second, p.op(), p.threshold());
    }
    case Predicate::Kind::Dis: return s.lastActivity == p.name();
    case Predicate::Kind::Payload: {
      auto it = payload.find(p.name());
      return it != payload.end() && compare_values(it->second, p.op(), p.value());
    }
    case Predicate::Kind::And: return eval(p.lhs(), s, payload) && eval(p.rhs(), s, payload);
    case Predicate::Kind::Not: return !eval(p.inner(), s, payload);
  }
  return false;
}

std::optional<AttrValue> operand(const Correlation::Operand& o, const Attributes& a, const Attributes& b) {
  if (o.side == Correlation::Side::Literal) return o.literal;
  const Attributes& src = o.side == Correlation::Side::Activation ? a : b;
  auto it = src.find(o.key);
  if (it == src.end()) return std::nullopt;
  return it->second;
}

bool correlated(const Correlation& c, const Attributes& activation, const Attributes& target) {
  switch (c.kind()) {
    case Correlation::Kind::True: return true;
    case Correlation::Kind::And:
      return correlated(c.lhs(), activation, target) && correlated(c.rhs(), activation, target);
    case Correlation::Kind::Not: return !correlated(c.inner(), activation, target);
    case Correlation::Kind::Compare: {
      const auto l = operand(c.left_operand(), activation, target);
      const auto r = operand(c.right_operand(), activation, target);
      return l && r && compare_values(*l, c.op(), *r);
    }
  }
  return false;
}

Attributes payload_of(const Step& s) {
  Attributes out;
  for (const auto& [k, v] : s.values) out.emplace(k, v);
  for (const auto& [k, v] : s.lastPayload) out.insert_or_assign(k, v);
  return out;
}

std::vector<Step> build_steps(const HybridTrace& trace) {
  std::vector<Step> steps;
  steps.push_back(Step{Key{0.0, -1, 0}, {}, {}, {}, nullptr});
  std::size_t si = 0;
  std::size_t ei = 0;
  std::size_t oi = 0;
  while (si < trace.samples.size() || ei < trace.events.size()) {
    bool takeEvent;
    if (!trace.order.empty()) {
      takeEvent = trace.order.at(oi++);
    } else if (si == trace.samples.size()) {
      takeEvent = true;
    } else if (ei == trace.events.size()) {
      takeEvent = false;
    } else {
      takeEvent = trace.events[ei].ts < trace.samples[si].ts;
    }
    Step s = steps.back();
    s.task = nullptr;
    if (takeEvent) {
      const TaskEvent& e = trace.events.at(ei++);
      s.key = Key{e.ts, 1, steps.size()};
      s.lastActivity = e.activity;
      s.lastPayload = e.payload;
      s.task = &e;
    } else {
      const SignalSample& x = trace.samples.at(si++);
      s.key = Key{x.ts, 1, steps.size()};
      s.values[x.sensorId] = x.value;
    }
    steps.push_back(std::move(s));
  }
  return steps;
}

struct Run {
  std::size_t first = 0;  // step index where the predicate became true
  Seconds to = 0.0;       // time of the falsifying step, or the horizon
  bool open = false;      // still true at the horizon
};

std::vector<Run> level_runs(const Predicate& p, const std::vector<Step>& steps, Seconds horizon) {
  std::vector<Run> runs;
  bool inRun = false;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const bool v = eval(p, steps[i], steps[i].lastPayload);
    if (v && !inRun) {
      runs.push_back(Run{i, horizon, true});
      inRun = true;
    } else if (!v && inRun) {
      runs.back().to = steps[i].key.t;
      runs.back().open = false;
      inRun = false;
    }
  }
  return runs;
}

/// Index of the last step strictly before time t (the open step at least).
std::size_t last_step_before(const std::vector<Step>& steps, Seconds t) {
  auto it = std::partition_point(steps.begin() + 1, steps.end(), [t](const Step& s) { return s.key.t < t; });
  return static_cast<std::size_t>(it - steps.begin()) - 1;
}

struct KeyedEmission {
  Key key;
  Emission e;
};

std::vector<KeyedEmission> condition_emissions(const Condition& c, Role role, const std::vector<Step>& steps,
                                               Seconds horizon) {
  std::vector<KeyedEmission> out;
  if (c.predicate.contains_dis()) {
    for (const Step& s : steps) {
      if (!s.task || !eval(c.predicate, s, s.task->payload)) continue;
      out.push_back({s.key, Emission{role, s.key.t, payload_of(s)}});
    }
    return out;
  }
  for (const Run& r : level_runs(c.predicate, steps, horizon)) {
    const Step& start = steps[r.first];
    if (c.sustainedFor == 0.0) {
      out.push_back({start.key, Emission{role, start.key.t, payload_of(start)}});
      continue;
    }
    const Seconds due = start.key.t + c.sustainedFor;
    if (due > r.to) continue;
    const Step& at = steps[last_step_before(steps, due)];
    out.push_back({Key{due, 0, 0}, Emission{role, due, payload_of(at)}});
  }
  return out;
}

Witness instant(std::string kind, Seconds t) { return Witness{std::move(kind), t, t}; }

}  // namespace

std::vector<HybridTrace> traces_from_records(const std::vector<InputRecord>& records) {
  std::vector<HybridTrace> traces;
  std::map<std::string, std::size_t> index;
  std::vector<bool> closed;
  for (const InputRecord& r : records) {
    if (r.kind == RecordKind::Watermark) continue;
    auto [it, inserted] = index.emplace(r.caseId, traces.size());
    if (inserted) {
      traces.push_back(HybridTrace{r.caseId, {}, {}, 0.0, {}});
      closed.push_back(false);
    }
    HybridTrace& t = traces[it->second];
    if (!closed[it->second]) t.horizon = std::max(t.horizon, r.ts);
    switch (r.kind) {
      case RecordKind::Signal:
        t.samples.push_back(SignalSample{r.caseId, r.name, r.value, r.ts});
        t.order.push_back(false);
        break;
      case RecordKind::Task:
        t.events.push_back(TaskEvent{r.caseId, r.name, r.ts, r.payload, r.eventId});
        t.order.push_back(true);
        break;
      case RecordKind::Close:
        t.horizon = r.ts;
        closed[it->second] = true;
        break;
      case RecordKind::Watermark: break;
    }
  }
  return traces;
}

void check_trace(const HybridTrace& trace) {
  auto bad = [&](const std::string& msg) { throw EngineError("trace '" + trace.caseId + "': " + msg); };
  if (!std::isfinite(trace.horizon)) bad("horizon must be finite");
  Seconds last = 0.0;
  for (const auto& s : trace.samples) {
    if (!std::isfinite(s.ts) || !std::isfinite(s.value) || s.ts < last) bad("samples must be sorted and finite");
    last = s.ts;
  }
  if (last > trace.horizon) bad("sample after the horizon");
  last = 0.0;
  for (const auto& e : trace.events) {
    if (!std::isfinite(e.ts) || e.ts < last) bad("events must be sorted and finite");
    last = e.ts;
  }
  if (last > trace.horizon) bad("event after the horizon");
  if (!trace.order.empty()) {
    const auto events = static_cast<std::size_t>(std::count(trace.order.begin(), trace.order.end(), true));
    if (events != trace.events.size() || trace.order.size() != trace.samples.size() + trace.events.size()) {
      bad("arrival order does not match the samples and events");
    }
  }
}

std::vector<ConditionInterval> condition_intervals(const Condition& c, const HybridTrace& trace) {
  check_trace(trace);
  const std::vector<Step> steps = build_steps(trace);
  std::vector<ConditionInterval> out;
  if (c.predicate.contains_dis()) {
    for (const Step& s : steps) {
      if (s.task && eval(c.predicate, s, s.task->payload)) out.push_back({s.key.t, s.key.t, s.key.t});
    }
    return out;
  }
  for (const Run& r : level_runs(c.predicate, steps, trace.horizon)) {
    ConditionInterval iv{steps[r.first].key.t, r.to, std::nullopt};
    const Seconds due = iv.from + c.sustainedFor;
    if (due <= r.to) iv.emission = due;
    out.push_back(iv);
  }
  return out;
}

std::vector<Emission> emissions(const ConstraintSpec& spec, const HybridTrace& trace) {
  check_trace(trace);
  const std::vector<Step> steps = build_steps(trace);
  std::vector<KeyedEmission> all = condition_emissions(spec.target, Role::Target, steps, trace.horizon);
  if (spec.activation) {
    auto acts = condition_emissions(*spec.activation, Role::Activation, steps, trace.horizon);
    all.insert(all.end(), acts.begin(), acts.end());
  }
  // Within one step a constraint's TARGET is handled before its ACTIVATION.
  std::stable_sort(all.begin(), all.end(), [](const KeyedEmission& a, const KeyedEmission& b) {
    if (a.key < b.key) return true;
    if (b.key < a.key) return false;
    return a.e.role == Role::Target && b.e.role != Role::Target;
  });
  std::vector<Emission> out;
  for (auto& k : all) out.push_back(std::move(k.e));
  return out;
}

Verdict evaluate(const ConstraintSpec& spec, const HybridTrace& trace) {
  check_trace(trace);
  const std::vector<Step> steps = build_steps(trace);
  const Seconds m = trace.horizon;
  Verdict v;
  v.constraintId = spec.id;

  const auto targets = condition_emissions(spec.target, Role::Target, steps, m);
  std::vector<KeyedEmission> activations;
  if (spec.activation) activations = condition_emissions(*spec.activation, Role::Activation, steps, m);
  const Correlation corr = spec.correlation.value_or(Correlation());
  const Seconds w = spec.responseWindow;

  switch (spec.templ) {
    case Template::Existence:
    case Template::NotExistence: {
      const Seconds scopeEnd = spec.scopeWindow ? std::min(*spec.scopeWindow, m) : m;
      const KeyedEmission* first = nullptr;
      for (const auto& t : targets) {
        if (t.e.ts <= scopeEnd) {
          first = &t;
          break;
        }
      }
      const bool existence = spec.templ == Template::Existence;
      if (first) {
        v.outcome = existence ? Outcome::Fulfilled : Outcome::PermanentlyViolated;
        v.witnesses.push_back(instant(existence ? "occurrence" : "forbidden occurrence", first->e.ts));
      } else {
        v.outcome = existence ? Outcome::PermanentlyViolated : Outcome::Fulfilled;
        v.witnesses.push_back(Witness{existence ? "no occurrence within scope" : "scope ended", 0.0, scopeEnd});
      }
      break;
    }
    case Template::Response:
    case Template::NotResponse: {
      const bool forbidden = spec.templ == Template::NotResponse;
      bool violated = false;
      for (const auto& a : activations) {
        const KeyedEmission* hit = nullptr;
        for (const auto& t : targets) {
          if (a.key < t.key && t.e.ts <= a.e.ts + w && correlated(corr, a.e.payload, t.e.payload)) {
            hit = &t;
            break;
          }
        }
        const Seconds windowEnd = std::min(a.e.ts + w, m);
        if (hit) {
          v.witnesses.push_back(Witness{forbidden ? "forbidden response" : "response", a.e.ts, hit->e.ts});
          violated = violated || forbidden;
        } else {
          v.witnesses.push_back(Witness{forbidden ? "window elapsed" : "deadline missed", a.e.ts, windowEnd});
          violated = violated || !forbidden;
        }
      }
      if (violated) {
        v.outcome = Outcome::PermanentlyViolated;
      } else {
        v.outcome = activations.empty() ? Outcome::Vacuous : Outcome::Fulfilled;
      }
      break;
    }
    case Template::Precedence: {
      bool violated = false;
      for (const auto& t : targets) {
        const KeyedEmission* enabling = nullptr;
        for (const auto& a : activations) {
          if (a.key < t.key && t.e.ts <= a.e.ts + w && correlated(corr, a.e.payload, t.e.payload)) {
            enabling = &a;
          }
        }
        if (enabling) {
          v.witnesses.push_back(Witness{"enabled occurrence", enabling->e.ts, t.e.ts});
        } else {
          v.witnesses.push_back(instant("precedence not satisfied", t.e.ts));
          violated = true;
        }
      }
      if (violated) {
        v.outcome = Outcome::Violated;
      } else {
        v.outcome = targets.empty() ? Outcome::Vacuous : Outcome::Fulfilled;
      }
      break;
    }
  }
  return v;
}

std::vector<Verdict> evaluate_all(const CompiledModel& model, const HybridTrace& trace) {
  std::vector<Verdict> out;
  out.reserve(model.constraints.size());
  for (const auto& c : model.constraints) out.push_back(evaluate(c.spec, trace));
  return out;
}

Json to_json(const Verdict& v) {
  Json witnesses = Json::array();
  for (const Witness& w : v.witnesses) {
    Json j{{"kind", w.kind}, {"from", w.from}};
    if (w.to != w.from) j["to"] = w.to;
    witnesses.push_back(std::move(j));
  }
  return Json{{"constraintId", v.constraintId}, {"outcome", to_string(v.outcome)}, {"witnesses", witnesses}};
}

}  // namespace hcep::oracle
