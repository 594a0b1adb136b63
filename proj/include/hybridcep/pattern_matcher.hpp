#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "hybridcep/model.hpp"
#include "hybridcep/signal_runtime.hpp"
#include "hybridcep/status_event.hpp"

namespace hcep {

/// Open expectation created by an ACTIVATION (Response and NotResponse).
struct PendingObligation {
  std::uint64_t id = 0;
  std::size_t constraintIndex = 0;
  std::string activationEventId;
  Seconds activatedAt = 0.0;
  Seconds deadline = 0.0;
  Attributes correlationSnapshot;
};

/// Time-limited permission earned by a Precedence ACTIVATION.
struct EnablementToken {
  std::uint64_t id = 0;
  std::size_t constraintIndex = 0;
  std::string activationEventId;
  Seconds enabledAt = 0.0;
  Seconds validUntil = 0.0;
  Attributes correlationSnapshot;
};

enum class TimerKind { ObligationDeadline, ScopeEnd, EnablementExpiry };

const char* to_string(TimerKind k);

struct TimerEntry {
  Seconds dueAt = 0.0;
  TimerKind kind = TimerKind::ObligationDeadline;
  std::uint64_t ref = 0;  // obligation id, constraint index or token id
  friend auto operator<=>(const TimerEntry&, const TimerEntry&) = default;
};

/// Obligation bookkeeping used by the exactly-once audit.
struct ObligationAudit {
  std::uint64_t created = 0;
  std::uint64_t fulfilled = 0;
  std::uint64_t violated = 0;
  std::uint64_t discharged = 0;  // NotResponse deadline or close
  std::uint64_t vacuousTargets = 0;

  std::uint64_t resolved() const { return fulfilled + violated + discharged; }
};

/// Receives open/resolve notifications for `--dump-l2`.
class L2Observer {
 public:
  virtual ~L2Observer() = default;
  virtual void on_l2_change(const Json& record) = 0;
};

/// Layer L2 for one case. Holds only open obligations, tokens, timers and the
/// per-scope bookkeeping unary templates need; lifecycle state lives in L3.
class PatternMatcher {
 public:
  explicit PatternMatcher(const CompiledModel* model);

  /// Registers scope-end timers relative to the case start.
  void open(Seconds caseStart);

  /// Consumes an ACTIVATION or TARGET and returns derived lifecycle events
  /// (eventIds left empty). Placeholder targets consult `hyp` for
  /// correlations that depend on the unknown payload.
  std::vector<StatusEvent> on_status_event(const StatusEvent& e, Hypothesis* hyp = nullptr);

  std::optional<TimerEntry> next_timer() const;

  /// Fires the earliest timer.
  std::vector<StatusEvent> fire_next();

  /// Case closure at `m`: pending responses violate, pending NotResponse
  /// obligations discharge, unresolved unary scopes resolve.
  std::vector<StatusEvent> close(Seconds m);

  const std::map<std::uint64_t, PendingObligation>& obligations() const { return obligations_; }
  const std::map<std::uint64_t, EnablementToken>& tokens() const { return tokens_; }
  const std::set<TimerEntry>& timers() const { return timers_; }
  std::size_t open_obligations(std::size_t constraintIndex) const;
  const ObligationAudit& audit() const { return audit_; }

  void set_observer(L2Observer* observer) { observer_ = observer; }

 private:
  struct ScopeState {
    bool ended = false;
    bool decided = false;  // Existence met or NotExistence violated
  };

  bool correlated(const CompiledConstraint& c, const Attributes& activation, const StatusEvent& target,
                  Hypothesis* hyp) const;
  StatusEvent derived(std::size_t constraint, StatusType type, Seconds ts, const std::string& ref,
                      std::string reason, Attributes payload) const;
  void notify(const char* op, const PendingObligation& o) const;
  void notify(const char* op, const EnablementToken& t) const;

  const CompiledModel* model_;
  std::map<std::uint64_t, PendingObligation> obligations_;
  std::map<std::uint64_t, EnablementToken> tokens_;
  std::set<TimerEntry> timers_;
  std::vector<ScopeState> scopes_;
  std::uint64_t nextId_ = 1;
  ObligationAudit audit_;
  L2Observer* observer_ = nullptr;
};

}  // namespace hcep
