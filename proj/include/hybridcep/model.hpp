#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hybridcep/predicate.hpp"
#include "hybridcep/value.hpp"

namespace hcep {

enum class VariableKind { Discrete, Continuous };

struct VariableDecl {
  std::string name;
  VariableKind kind = VariableKind::Continuous;
  std::string unit;
  friend bool operator==(const VariableDecl&, const VariableDecl&) = default;
};

struct TaskDecl {
  std::string name;
  std::vector<std::string> payload;  // declared attribute names
  friend bool operator==(const TaskDecl&, const TaskDecl&) = default;
};

/// A predicate plus the duration it must hold before it counts.
/// `sustainedFor == 0` means the rising edge (or the task occurrence, for
/// conditions that mention `dis(...)`).
struct Condition {
  Predicate predicate;
  Seconds sustainedFor = 0.0;
  friend bool operator==(const Condition&, const Condition&) = default;
};

enum class Template { Existence, NotExistence, Response, NotResponse, Precedence };

const char* to_string(Template t);
std::optional<Template> parse_template(std::string_view s);
bool is_binary(Template t);

enum class ActionKind { Webhook, Log, AutoTask };

const char* to_string(ActionKind k);

struct ActionRef {
  ActionKind kind = ActionKind::Log;
  std::string target;  // URL, log label or activity name
  Attributes payloadTemplate;
  bool halt = false;  // marks the case halted when fired
  friend bool operator==(const ActionRef&, const ActionRef&) = default;
};

struct ConstraintSpec {
  std::string id;
  Template templ = Template::Response;
  std::optional<Condition> activation;
  Condition target;
  std::optional<Correlation> correlation;
  Seconds responseWindow = 0.0;
  std::optional<Seconds> scopeWindow;
  std::optional<ActionRef> onViolation;
  std::optional<ActionRef> onFulfillment;
  friend bool operator==(const ConstraintSpec&, const ConstraintSpec&) = default;
};

enum class EnforcementMode { Prevent, Report };

const char* to_string(EnforcementMode m);
std::optional<EnforcementMode> parse_enforcement(std::string_view s);

struct ProcessModel {
  std::vector<VariableDecl> variables;
  std::vector<TaskDecl> tasks;
  std::vector<ConstraintSpec> constraints;
  EnforcementMode enforcement = EnforcementMode::Prevent;

  const VariableDecl* find_variable(std::string_view name) const;
  const TaskDecl* find_task(std::string_view name) const;
  /// Task catalog entry or discrete variable.
  bool is_activity(std::string_view name) const;

  friend bool operator==(const ProcessModel&, const ProcessModel&) = default;
};

enum class Severity { Error, Warning };

struct Diagnostic {
  Severity severity = Severity::Error;
  std::string constraintId;  // empty for model-level problems
  std::string message;
};

/// Throws SyntaxError for malformed text and ValidationError (naming the
/// first offending constraint) when validate_model reports an error.
ProcessModel parse_model(std::string_view text);

/// Structural parse without invariant checks.
ProcessModel parse_model_unchecked(std::string_view text);

Json model_to_json(const ProcessModel& model);
std::string serialize_model(const ProcessModel& model);

std::vector<Diagnostic> validate_model(const ProcessModel& model);

// ---------------------------------------------------------------------------
// Compiled form

enum class Role { Activation, Target };

const char* to_string(Role r);

/// One L1 query: when `condition` holds (for `sustainedFor`), emit an event
/// with `role` for constraint `constraintIndex`.
struct DetectorSpec {
  std::string constraintId;
  std::size_t constraintIndex = 0;
  Role role = Role::Target;
  Condition condition;  // predicate bound to snapshot slots
  /// Occurrence detectors fire on matching task events; level detectors on
  /// rising edges of the predicate over the sampled state.
  bool occurrence = false;
  bool readsPayload = false;
};

/// The L2 query for one constraint.
struct PatternSpec {
  Template templ = Template::Response;
  Seconds responseWindow = 0.0;
  std::optional<Seconds> scopeWindow;
  std::optional<Correlation> correlation;
};

struct CompiledConstraint {
  ConstraintSpec spec;
  std::vector<DetectorSpec> l1Detectors;
  PatternSpec l2Pattern;
};

/// Standalone form: slots are left unbound.
CompiledConstraint compile_constraint(const ConstraintSpec& spec);

/// A validated model with predicates bound to dense indices. Constraints are
/// ordered by id (natural order: numeric runs compare numerically).
struct CompiledModel {
  ProcessModel model;
  std::vector<CompiledConstraint> constraints;
  std::vector<DetectorSpec> detectors;  // flattened, in constraint order
  std::vector<std::string> continuousVars;
  std::vector<std::string> activities;  // tasks, then discrete variables

  std::optional<std::size_t> constraint_index(std::string_view id) const;
  std::optional<std::size_t> variable_index(std::string_view name) const;
  std::optional<std::size_t> activity_index(std::string_view name) const;
};

std::shared_ptr<const CompiledModel> compile_model(ProcessModel model);

bool natural_less(std::string_view a, std::string_view b);

}  // namespace hcep
