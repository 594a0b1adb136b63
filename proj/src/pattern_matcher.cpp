#include "hybridcep/pattern_matcher.hpp"

#include "hybridcep/errors.hpp"

namespace hcep {

const char* to_string(TimerKind k) {
  switch (k) {
    case TimerKind::ObligationDeadline: return "obligationDeadline";
    case TimerKind::ScopeEnd: return "scopeEnd";
    case TimerKind::EnablementExpiry: return "enablementExpiry";
  }
  return "?";
}

PatternMatcher::PatternMatcher(const CompiledModel* model)
    : model_(model), scopes_(model->constraints.size()) {}

void PatternMatcher::open(Seconds caseStart) {
  for (std::size_t i = 0; i < model_->constraints.size(); ++i) {
    const PatternSpec& p = model_->constraints[i].l2Pattern;
    if (!is_binary(p.templ) && p.scopeWindow) {
      timers_.insert({caseStart + *p.scopeWindow, TimerKind::ScopeEnd, i});
    }
  }
}

std::size_t PatternMatcher::open_obligations(std::size_t constraintIndex) const {
  std::size_t n = 0;
  for (const auto& [id, o] : obligations_) n += o.constraintIndex == constraintIndex;
  return n;
}

bool PatternMatcher::correlated(const CompiledConstraint& c, const Attributes& activation,
                                const StatusEvent& target, Hypothesis* hyp) const {
  if (!c.l2Pattern.correlation) return true;
  const Correlation& corr = *c.l2Pattern.correlation;
  if (!target.placeholder) return evaluate(corr, activation, &target.payload) == Tri::True;
  const Tri r = evaluate(corr, activation, nullptr);
  if (r != Tri::Unknown) return r == Tri::True;
  return hyp != nullptr && hyp->decide(target_residual(corr, activation));
}

StatusEvent PatternMatcher::derived(std::size_t constraint, StatusType type, Seconds ts,
                                    const std::string& ref, std::string reason,
                                    Attributes payload) const {
  StatusEvent e;
  e.constraintIndex = constraint;
  e.type = type;
  e.ts = ts;
  e.activationRef = ref;
  e.reason = std::move(reason);
  e.payload = std::move(payload);
  return e;
}

void PatternMatcher::notify(const char* op, const PendingObligation& o) const {
  if (!observer_) return;
  observer_->on_l2_change(Json{{"op", op},
                               {"kind", "obligation"},
                               {"id", o.id},
                               {"constraintId", model_->constraints[o.constraintIndex].spec.id},
                               {"activationEventId", o.activationEventId},
                               {"activatedAt", o.activatedAt},
                               {"deadline", o.deadline}});
}

void PatternMatcher::notify(const char* op, const EnablementToken& t) const {
  if (!observer_) return;
  observer_->on_l2_change(Json{{"op", op},
                               {"kind", "token"},
                               {"id", t.id},
                               {"constraintId", model_->constraints[t.constraintIndex].spec.id},
                               {"activationEventId", t.activationEventId},
                               {"enabledAt", t.enabledAt},
                               {"validUntil", t.validUntil}});
}

std::vector<StatusEvent> PatternMatcher::on_status_event(const StatusEvent& e, Hypothesis* hyp) {
  if (e.constraintIndex >= model_->constraints.size()) {
    throw UnknownConstraint(std::to_string(e.constraintIndex));
  }
  const CompiledConstraint& c = model_->constraints[e.constraintIndex];
  const PatternSpec& p = c.l2Pattern;
  std::vector<StatusEvent> out;

  if (e.type == StatusType::Activation) {
    if (p.templ == Template::Response || p.templ == Template::NotResponse) {
      PendingObligation o{nextId_++, e.constraintIndex, e.eventId, e.ts, e.ts + p.responseWindow,
                          e.payload};
      timers_.insert({o.deadline, TimerKind::ObligationDeadline, o.id});
      ++audit_.created;
      notify("open", o);
      obligations_.emplace(o.id, std::move(o));
    } else if (p.templ == Template::Precedence) {
      EnablementToken t{nextId_++, e.constraintIndex, e.eventId, e.ts, e.ts + p.responseWindow,
                        e.payload};
      timers_.insert({t.validUntil, TimerKind::EnablementExpiry, t.id});
      notify("open", t);
      tokens_.emplace(t.id, std::move(t));
    }
    return out;
  }
  if (e.type != StatusType::Target) return out;

  switch (p.templ) {
    case Template::Response:
    case Template::NotResponse: {
      const bool forbidden = p.templ == Template::NotResponse;
      for (auto it = obligations_.begin(); it != obligations_.end();) {
        const PendingObligation& o = it->second;
        if (o.constraintIndex != e.constraintIndex || !correlated(c, o.correlationSnapshot, e, hyp)) {
          ++it;
          continue;
        }
        if (forbidden) {
          out.push_back(derived(o.constraintIndex, StatusType::PermanentViolation, e.ts,
                                o.activationEventId, "forbidden response occurred", e.payload));
          ++audit_.violated;
        } else {
          out.push_back(derived(o.constraintIndex, StatusType::Fulfillment, e.ts,
                                o.activationEventId, "", e.payload));
          ++audit_.fulfilled;
        }
        notify("resolve", o);
        timers_.erase({o.deadline, TimerKind::ObligationDeadline, o.id});
        it = obligations_.erase(it);
      }
      if (out.empty()) ++audit_.vacuousTargets;
      break;
    }
    case Template::Existence:
    case Template::NotExistence: {
      ScopeState& s = scopes_[e.constraintIndex];
      if (s.ended || s.decided) {
        ++audit_.vacuousTargets;
        break;
      }
      s.decided = true;
      if (p.templ == Template::Existence) {
        out.push_back(derived(e.constraintIndex, StatusType::Fulfillment, e.ts, "", "", e.payload));
      } else {
        out.push_back(derived(e.constraintIndex, StatusType::PermanentViolation, e.ts, "",
                              "forbidden occurrence", e.payload));
      }
      break;
    }
    case Template::Precedence: {
      const EnablementToken* chosen = nullptr;
      for (auto it = tokens_.rbegin(); it != tokens_.rend(); ++it) {
        const EnablementToken& t = it->second;
        if (t.constraintIndex == e.constraintIndex && correlated(c, t.correlationSnapshot, e, hyp)) {
          chosen = &t;
          break;
        }
      }
      if (chosen) {
        out.push_back(derived(e.constraintIndex, StatusType::Fulfillment, e.ts,
                              chosen->activationEventId, "", e.payload));
      } else {
        out.push_back(derived(e.constraintIndex, StatusType::Violation, e.ts, "",
                              "precedence not satisfied", e.payload));
      }
      break;
    }
  }
  return out;
}

std::optional<TimerEntry> PatternMatcher::next_timer() const {
  if (timers_.empty()) return std::nullopt;
  return *timers_.begin();
}

std::vector<StatusEvent> PatternMatcher::fire_next() {
  std::vector<StatusEvent> out;
  if (timers_.empty()) return out;
  const TimerEntry t = *timers_.begin();
  timers_.erase(timers_.begin());

  switch (t.kind) {
    case TimerKind::ObligationDeadline: {
      auto it = obligations_.find(t.ref);
      if (it == obligations_.end()) break;
      const PendingObligation& o = it->second;
      if (model_->constraints[o.constraintIndex].l2Pattern.templ == Template::Response) {
        out.push_back(derived(o.constraintIndex, StatusType::PermanentViolation, t.dueAt,
                              o.activationEventId, "response deadline missed", o.correlationSnapshot));
        ++audit_.violated;
      } else {
        out.push_back(derived(o.constraintIndex, StatusType::Fulfillment, t.dueAt,
                              o.activationEventId, "response window elapsed", o.correlationSnapshot));
        ++audit_.discharged;
      }
      notify("resolve", o);
      obligations_.erase(it);
      break;
    }
    case TimerKind::EnablementExpiry: {
      auto it = tokens_.find(t.ref);
      if (it == tokens_.end()) break;
      notify("expire", it->second);
      tokens_.erase(it);
      break;
    }
    case TimerKind::ScopeEnd: {
      const auto ci = static_cast<std::size_t>(t.ref);
      ScopeState& s = scopes_[ci];
      if (s.ended) break;
      s.ended = true;
      if (s.decided) break;
      s.decided = true;
      if (model_->constraints[ci].l2Pattern.templ == Template::Existence) {
        out.push_back(derived(ci, StatusType::PermanentViolation, t.dueAt, "",
                              "no occurrence within scope", {}));
      } else {
        out.push_back(derived(ci, StatusType::Fulfillment, t.dueAt, "", "scope ended", {}));
      }
      break;
    }
  }
  return out;
}

std::vector<StatusEvent> PatternMatcher::close(Seconds m) {
  std::vector<StatusEvent> out;
  for (std::size_t ci = 0; ci < model_->constraints.size(); ++ci) {
    const Template templ = model_->constraints[ci].l2Pattern.templ;
    for (auto it = obligations_.begin(); it != obligations_.end();) {
      const PendingObligation& o = it->second;
      if (o.constraintIndex != ci) {
        ++it;
        continue;
      }
      if (templ == Template::Response) {
        out.push_back(derived(ci, StatusType::PermanentViolation, m, o.activationEventId,
                              "case closed with pending response", o.correlationSnapshot));
        ++audit_.violated;
      } else {
        out.push_back(derived(ci, StatusType::Fulfillment, m, o.activationEventId, "case closed",
                              o.correlationSnapshot));
        ++audit_.discharged;
      }
      notify("resolve", o);
      it = obligations_.erase(it);
    }
    if (!is_binary(templ)) {
      ScopeState& s = scopes_[ci];
      if (!s.ended) {
        s.ended = true;
        if (!s.decided) {
          s.decided = true;
          if (templ == Template::Existence) {
            out.push_back(derived(ci, StatusType::PermanentViolation, m, "",
                                  "no occurrence within scope", {}));
          } else {
            out.push_back(derived(ci, StatusType::Fulfillment, m, "", "scope ended", {}));
          }
        }
      }
    }
  }
  for (const auto& [id, t] : tokens_) notify("expire", t);
  tokens_.clear();
  timers_.clear();
  return out;
}

}  // namespace hcep
