#include "hybridcep/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "hybridcep/errors.hpp"

namespace hcep {

const char* to_string(Template t) {
  switch (t) {
    case Template::Existence: return "Existence";
    case Template::NotExistence: return "NotExistence";
    case Template::Response: return "Response";
    case Template::NotResponse: return "NotResponse";
    case Template::Precedence: return "Precedence";
  }
  return "?";
}

std::optional<Template> parse_template(std::string_view s) {
  for (Template t : {Template::Existence, Template::NotExistence, Template::Response,
                     Template::NotResponse, Template::Precedence}) {
    if (s == to_string(t)) return t;
  }
  return std::nullopt;
}

bool is_binary(Template t) {
  return t == Template::Response || t == Template::NotResponse || t == Template::Precedence;
}

const char* to_string(ActionKind k) {
  switch (k) {
    case ActionKind::Webhook: return "webhook";
    case ActionKind::Log: return "log";
    case ActionKind::AutoTask: return "autoTask";
  }
  return "?";
}

const char* to_string(EnforcementMode m) { return m == EnforcementMode::Prevent ? "prevent" : "report"; }

std::optional<EnforcementMode> parse_enforcement(std::string_view s) {
  if (s == "prevent") return EnforcementMode::Prevent;
  if (s == "report") return EnforcementMode::Report;
  return std::nullopt;
}

const char* to_string(Role r) { return r == Role::Activation ? "ACTIVATION" : "TARGET"; }

const VariableDecl* ProcessModel::find_variable(std::string_view name) const {
  auto it = std::find_if(variables.begin(), variables.end(), [&](const auto& v) { return v.name == name; });
  return it == variables.end() ? nullptr : &*it;
}

const TaskDecl* ProcessModel::find_task(std::string_view name) const {
  auto it = std::find_if(tasks.begin(), tasks.end(), [&](const auto& t) { return t.name == name; });
  return it == tasks.end() ? nullptr : &*it;
}

bool ProcessModel::is_activity(std::string_view name) const {
  if (find_task(name)) return true;
  const VariableDecl* v = find_variable(name);
  return v && v->kind == VariableKind::Discrete;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

struct Position {
  std::size_t line = 1;
  std::size_t column = 1;
};

Position position_of(std::string_view text, std::size_t offset) {
  Position p;
  offset = std::min(offset, text.size());
  for (std::size_t i = 0; i < offset; ++i) {
    if (text[i] == '\n') {
      ++p.line;
      p.column = 1;
    } else {
      ++p.column;
    }
  }
  return p;
}

/// Locates a JSON value in the source text so that schema errors can point
/// at a line. Falls back to the document start.
std::size_t locate(std::string_view text, const Json& value, std::size_t from = 0) {
  const std::string needle = value.dump();
  const auto at = text.find(needle, from);
  return at == std::string_view::npos ? 0 : at;
}

class DocReader {
 public:
  explicit DocReader(std::string_view text) : text_(text) {}

  [[noreturn]] void fail(const std::string& message, std::size_t offset) const {
    const Position p = position_of(text_, offset);
    throw SyntaxError(message, p.line, p.column);
  }

  std::size_t anchor_of(const Json& constraint) const {
    if (constraint.is_object() && constraint.contains("id")) {
      return locate(text_, Json(id_string(constraint["id"])));
    }
    return 0;
  }

  static std::string id_string(const Json& id) {
    if (id.is_string()) return id.get<std::string>();
    if (id.is_number_integer()) return std::to_string(id.get<long long>());
    return id.dump();
  }

  Seconds duration(const Json& obj, const char* key, Seconds fallback, const std::string& ctx,
                   std::size_t anchor) const {
    if (!obj.contains(key)) return fallback;
    const Json& v = obj[key];
    if (!v.is_number()) fail(ctx + ": '" + key + "' must be a number", anchor);
    return v.get<double>();
  }

  Condition condition(const Json& c, const std::string& ctx, std::size_t anchor) const {
    if (!c.is_object()) fail(ctx + " must be an object", anchor);
    if (!c.contains("pred") || !c["pred"].is_string()) fail(ctx + ": missing string 'pred'", anchor);
    const std::string text = c["pred"].get<std::string>();
    Condition out;
    try {
      out.predicate = parse_predicate(text);
    } catch (const SyntaxError& e) {
      const std::size_t at = locate(text_, Json(text), anchor);
      // +1 skips the opening quote of the JSON string.
      fail(ctx + ": " + e.what(), at + 1 + (e.column() > 0 ? e.column() - 1 : 0));
    }
    out.sustainedFor = duration(c, "sustainedFor", 0.0, ctx, anchor);
    return out;
  }

  ActionRef action(const Json& a, const std::string& ctx, std::size_t anchor) const {
    if (!a.is_object()) fail(ctx + " must be an object", anchor);
    ActionRef out;
    const std::string kind = a.value("kind", "");
    if (kind == "webhook") {
      out.kind = ActionKind::Webhook;
    } else if (kind == "log") {
      out.kind = ActionKind::Log;
    } else if (kind == "autoTask") {
      out.kind = ActionKind::AutoTask;
    } else {
      fail(ctx + ": unknown action kind '" + kind + "'", anchor);
    }
    if (a.contains("target")) {
      if (!a["target"].is_string()) fail(ctx + ": 'target' must be a string", anchor);
      out.target = a["target"].get<std::string>();
    }
    if (a.contains("payload")) out.payloadTemplate = attributes_from_json(a["payload"]);
    out.halt = a.value("halt", false);
    return out;
  }

  ConstraintSpec constraint(const Json& c) const {
    const std::size_t anchor = anchor_of(c);
    if (!c.is_object()) fail("constraint must be an object", anchor);
    if (!c.contains("id")) fail("constraint without 'id'", anchor);
    ConstraintSpec s;
    s.id = id_string(c["id"]);
    const std::string ctx = "constraint \"" + s.id + "\"";
    if (!c.contains("template") || !c["template"].is_string()) fail(ctx + ": missing 'template'", anchor);
    auto t = parse_template(c["template"].get<std::string>());
    if (!t) fail(ctx + ": unknown template '" + c["template"].get<std::string>() + "'", anchor);
    s.templ = *t;
    if (c.contains("activation") && !c["activation"].is_null()) {
      s.activation = condition(c["activation"], ctx + " activation", anchor);
    }
    if (!c.contains("target")) fail(ctx + ": missing 'target'", anchor);
    s.target = condition(c["target"], ctx + " target", anchor);
    if (c.contains("correlation") && !c["correlation"].is_null()) {
      if (!c["correlation"].is_string()) fail(ctx + ": 'correlation' must be a string", anchor);
      const std::string text = c["correlation"].get<std::string>();
      try {
        s.correlation = parse_correlation(text);
      } catch (const SyntaxError& e) {
        const std::size_t at = locate(text_, Json(text), anchor);
        fail(ctx + " correlation: " + e.what(), at + e.column());
      }
    }
    s.responseWindow = duration(c, "responseWindow", 0.0, ctx, anchor);
    if (c.contains("scopeWindow") && !c["scopeWindow"].is_null()) {
      s.scopeWindow = duration(c, "scopeWindow", 0.0, ctx, anchor);
    }
    if (c.contains("onViolation") && !c["onViolation"].is_null()) {
      s.onViolation = action(c["onViolation"], ctx + " onViolation", anchor);
    }
    if (c.contains("onFulfillment") && !c["onFulfillment"].is_null()) {
      s.onFulfillment = action(c["onFulfillment"], ctx + " onFulfillment", anchor);
    }
    return s;
  }

  ProcessModel model() const {
    Json doc;
    try {
      doc = Json::parse(text_);
    } catch (const Json::parse_error& e) {
      fail(std::string("malformed model document: ") + e.what(), e.byte > 0 ? e.byte - 1 : 0);
    }
    if (!doc.is_object()) fail("model document must be an object", 0);

    ProcessModel m;
    if (doc.contains("variables")) {
      if (!doc["variables"].is_array()) fail("'variables' must be an array", locate(text_, Json("variables")));
      for (const Json& v : doc["variables"]) {
        if (!v.is_object() || !v.contains("name") || !v["name"].is_string()) {
          fail("variable without a name", locate(text_, v));
        }
        VariableDecl d;
        d.name = v["name"].get<std::string>();
        const std::string kind = v.value("kind", "continuous");
        if (kind == "continuous") {
          d.kind = VariableKind::Continuous;
        } else if (kind == "discrete") {
          d.kind = VariableKind::Discrete;
        } else {
          fail("variable '" + d.name + "': unknown kind '" + kind + "'", locate(text_, Json(kind)));
        }
        d.unit = v.value("unit", "");
        m.variables.push_back(std::move(d));
      }
    }
    if (doc.contains("tasks")) {
      if (!doc["tasks"].is_array()) fail("'tasks' must be an array", locate(text_, Json("tasks")));
      for (const Json& t : doc["tasks"]) {
        TaskDecl d;
        if (t.is_string()) {
          d.name = t.get<std::string>();
        } else if (t.is_object() && t.contains("name") && t["name"].is_string()) {
          d.name = t["name"].get<std::string>();
          if (t.contains("payload")) {
            if (!t["payload"].is_array()) fail("task '" + d.name + "': 'payload' must be an array", locate(text_, t["payload"]));
            for (const Json& k : t["payload"]) {
              if (!k.is_string()) fail("task '" + d.name + "': payload names must be strings", locate(text_, k));
              d.payload.push_back(k.get<std::string>());
            }
          }
        } else {
          fail("task entry must be a name or an object with 'name'", locate(text_, t));
        }
        m.tasks.push_back(std::move(d));
      }
    }
    if (doc.contains("enforcement")) {
      auto mode = doc["enforcement"].is_string() ? parse_enforcement(doc["enforcement"].get<std::string>())
                                                 : std::nullopt;
      if (!mode) fail("'enforcement' must be \"prevent\" or \"report\"", locate(text_, Json("enforcement")));
      m.enforcement = *mode;
    }
    if (doc.contains("constraints")) {
      if (!doc["constraints"].is_array()) fail("'constraints' must be an array", locate(text_, Json("constraints")));
      for (const Json& c : doc["constraints"]) m.constraints.push_back(constraint(c));
    }
    return m;
  }

 private:
  std::string_view text_;
};

}  // namespace

ProcessModel parse_model_unchecked(std::string_view text) { return DocReader(text).model(); }

ProcessModel parse_model(std::string_view text) {
  ProcessModel m = parse_model_unchecked(text);
  for (const Diagnostic& d : validate_model(m)) {
    if (d.severity == Severity::Error) throw ValidationError(d.constraintId, d.message);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

Json condition_to_json(const Condition& c) {
  return Json{{"pred", c.predicate.to_string()}, {"sustainedFor", c.sustainedFor}};
}

Json action_to_json(const ActionRef& a) {
  Json j{{"kind", to_string(a.kind)}, {"target", a.target}};
  if (!a.payloadTemplate.empty()) j["payload"] = to_json(a.payloadTemplate);
  if (a.halt) j["halt"] = true;
  return j;
}

}  // namespace

Json model_to_json(const ProcessModel& model) {
  Json vars = Json::array();
  for (const auto& v : model.variables) {
    Json j{{"name", v.name}, {"kind", v.kind == VariableKind::Continuous ? "continuous" : "discrete"}};
    if (!v.unit.empty()) j["unit"] = v.unit;
    vars.push_back(std::move(j));
  }
  Json tasks = Json::array();
  for (const auto& t : model.tasks) {
    if (t.payload.empty()) {
      tasks.push_back(t.name);
    } else {
      tasks.push_back(Json{{"name", t.name}, {"payload", t.payload}});
    }
  }
  Json constraints = Json::array();
  for (const auto& c : model.constraints) {
    Json j{{"id", c.id}, {"template", to_string(c.templ)}};
    if (c.activation) j["activation"] = condition_to_json(*c.activation);
    j["target"] = condition_to_json(c.target);
    if (c.correlation) j["correlation"] = c.correlation->to_string();
    if (is_binary(c.templ) || c.responseWindow != 0.0) j["responseWindow"] = c.responseWindow;
    if (c.scopeWindow) j["scopeWindow"] = *c.scopeWindow;
    if (c.onViolation) j["onViolation"] = action_to_json(*c.onViolation);
    if (c.onFulfillment) j["onFulfillment"] = action_to_json(*c.onFulfillment);
    constraints.push_back(std::move(j));
  }
  return Json{{"variables", vars},
              {"tasks", tasks},
              {"enforcement", to_string(model.enforcement)},
              {"constraints", constraints}};
}

std::string serialize_model(const ProcessModel& model) { return model_to_json(model).dump(2); }

// ---------------------------------------------------------------------------
// Validation

namespace {

bool is_identifier(const std::string& s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  for (char c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  }
  static const std::set<std::string> reserved{"and", "not", "true", "false", "dis", "payload",
                                              "activation", "target"};
  return !reserved.count(s);
}

bool is_valid_url(const std::string& s) {
  std::string_view rest;
  if (s.rfind("http://", 0) == 0) {
    rest = std::string_view(s).substr(7);
  } else if (s.rfind("https://", 0) == 0) {
    rest = std::string_view(s).substr(8);
  } else {
    return false;
  }
  const auto hostEnd = rest.find_first_of("/?#");
  const std::string_view host = rest.substr(0, hostEnd);
  if (host.empty()) return false;
  for (char c : host) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == ':' ||
          c == '[' || c == ']')) {
      return false;
    }
  }
  return true;
}

class Validator {
 public:
  explicit Validator(const ProcessModel& m) : m_(m) {
    for (const auto& t : m.tasks) {
      for (const auto& k : t.payload) payloadKeys_.insert(k);
    }
  }

  std::vector<Diagnostic> run() {
    declarations();
    std::set<std::string> ids;
    for (const auto& c : m_.constraints) {
      if (c.id.empty()) error("", "constraint with empty id");
      if (!ids.insert(c.id).second) error(c.id, "duplicate constraint id");
      constraint(c);
    }
    return std::move(out_);
  }

 private:
  void error(const std::string& id, std::string msg) {
    out_.push_back({Severity::Error, id, std::move(msg)});
  }

  void declarations() {
    std::set<std::string> names;
    for (const auto& v : m_.variables) {
      if (!is_identifier(v.name)) error("", "invalid variable name '" + v.name + "'");
      if (!names.insert(v.name).second) error("", "duplicate variable '" + v.name + "'");
    }
    for (const auto& t : m_.tasks) {
      if (!is_identifier(t.name)) error("", "invalid task name '" + t.name + "'");
      if (!names.insert(t.name).second) error("", "duplicate task or variable name '" + t.name + "'");
      std::set<std::string> keys;
      for (const auto& k : t.payload) {
        if (!is_identifier(k)) error("", "task '" + t.name + "': invalid payload name '" + k + "'");
        if (!keys.insert(k).second) error("", "task '" + t.name + "': duplicate payload name '" + k + "'");
        const VariableDecl* v = m_.find_variable(k);
        if (v && v->kind == VariableKind::Continuous) {
          error("", "task '" + t.name + "': payload name '" + k + "' shadows a continuous variable");
        }
      }
    }
  }

  void predicate(const ConstraintSpec& c, const Predicate& p, const std::string& role) {
    switch (p.kind()) {
      case Predicate::Kind::True: return;
      case Predicate::Kind::Comparison: {
        const VariableDecl* v = m_.find_variable(p.name());
        if (!v) {
          error(c.id, role + " references undeclared variable '" + p.name() + "'");
        } else if (v->kind != VariableKind::Continuous) {
          error(c.id, role + " compares non-continuous variable '" + p.name() + "'");
        } else if (!std::isfinite(p.threshold())) {
          error(c.id, role + " has a non-finite threshold");
        }
        return;
      }
      case Predicate::Kind::Dis:
        if (!m_.is_activity(p.name())) {
          error(c.id, role + " references undeclared task '" + p.name() + "'");
        }
        return;
      case Predicate::Kind::Payload:
        if (!payloadKeys_.count(p.name())) {
          error(c.id, role + " reads undeclared payload attribute '" + p.name() + "'");
        }
        return;
      case Predicate::Kind::And:
        predicate(c, p.lhs(), role);
        predicate(c, p.rhs(), role);
        return;
      case Predicate::Kind::Not: predicate(c, p.inner(), role); return;
    }
  }

  void condition(const ConstraintSpec& c, const Condition& cond, const std::string& role) {
    predicate(c, cond.predicate, role);
    if (!std::isfinite(cond.sustainedFor) || cond.sustainedFor < 0) {
      error(c.id, role + " sustainedFor must be a finite duration >= 0");
    }
    if (cond.predicate.contains_dis() && cond.sustainedFor != 0.0) {
      error(c.id, role + " mentions a task occurrence (dis) and must have sustainedFor 0");
    }
  }

  bool attribute_known(const std::string& key) const {
    if (payloadKeys_.count(key)) return true;
    const VariableDecl* v = m_.find_variable(key);
    return v && v->kind == VariableKind::Continuous;
  }

  void correlation(const ConstraintSpec& c, const Correlation& e) {
    switch (e.kind()) {
      case Correlation::Kind::True: return;
      case Correlation::Kind::And:
        correlation(c, e.lhs());
        correlation(c, e.rhs());
        return;
      case Correlation::Kind::Not: correlation(c, e.inner()); return;
      case Correlation::Kind::Compare: {
        for (const auto* o : {&e.left_operand(), &e.right_operand()}) {
          if (o->side != Correlation::Side::Literal && !attribute_known(o->key)) {
            error(c.id, "correlation reads undeclared attribute '" + o->key + "'");
          }
        }
        if (e.left_operand().side == Correlation::Side::Target &&
            e.right_operand().side == Correlation::Side::Target) {
          error(c.id, "correlation compares two target attributes");
        }
        return;
      }
    }
  }

  void action(const ConstraintSpec& c, const ActionRef& a, const std::string& role) {
    switch (a.kind) {
      case ActionKind::Webhook:
        if (!is_valid_url(a.target)) error(c.id, role + " webhook target is not a valid URL");
        break;
      case ActionKind::AutoTask:
        if (!m_.find_task(a.target)) error(c.id, role + " autoTask names unknown task '" + a.target + "'");
        break;
      case ActionKind::Log: break;
    }
  }

  void constraint(const ConstraintSpec& c) {
    const bool binary = is_binary(c.templ);
    if (binary && !c.activation) error(c.id, std::string(to_string(c.templ)) + " requires an activation");
    if (!binary && c.activation) error(c.id, std::string(to_string(c.templ)) + " takes no activation");
    if (c.activation) condition(c, *c.activation, "activation");
    condition(c, c.target, "target");
    if (binary && !(c.responseWindow > 0 && std::isfinite(c.responseWindow))) {
      error(c.id, "responseWindow must be > 0");
    }
    if (c.scopeWindow) {
      if (binary) {
        error(c.id, "scopeWindow applies to unary templates only");
      } else if (!(*c.scopeWindow > 0) || !std::isfinite(*c.scopeWindow)) {
        error(c.id, "scopeWindow must be > 0");
      }
    }
    if (c.correlation) {
      if (!binary) error(c.id, "correlation requires an activation");
      correlation(c, *c.correlation);
    }
    if (c.onViolation) action(c, *c.onViolation, "onViolation");
    if (c.onFulfillment) action(c, *c.onFulfillment, "onFulfillment");
  }

  const ProcessModel& m_;
  std::set<std::string> payloadKeys_;
  std::vector<Diagnostic> out_;
};

}  // namespace

std::vector<Diagnostic> validate_model(const ProcessModel& model) { return Validator(model).run(); }

// ---------------------------------------------------------------------------
// Compilation

namespace {

DetectorSpec make_detector(const ConstraintSpec& spec, Role role, const Condition& cond) {
  DetectorSpec d;
  d.constraintId = spec.id;
  d.role = role;
  d.condition = cond;
  d.occurrence = cond.predicate.contains_dis();
  d.readsPayload = cond.predicate.contains_payload();
  return d;
}

}  // namespace

CompiledConstraint compile_constraint(const ConstraintSpec& spec) {
  CompiledConstraint out;
  out.spec = spec;
  if (spec.activation) out.l1Detectors.push_back(make_detector(spec, Role::Activation, *spec.activation));
  out.l1Detectors.push_back(make_detector(spec, Role::Target, spec.target));
  out.l2Pattern.templ = spec.templ;
  out.l2Pattern.responseWindow = spec.responseWindow;
  out.l2Pattern.scopeWindow = spec.scopeWindow;
  out.l2Pattern.correlation = spec.correlation;
  return out;
}

bool natural_less(std::string_view a, std::string_view b) {
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() && j < b.size()) {
    const bool da = std::isdigit(static_cast<unsigned char>(a[i]));
    const bool db = std::isdigit(static_cast<unsigned char>(b[j]));
    if (da && db) {
      std::size_t ie = i;
      std::size_t je = j;
      while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
      while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
      std::string_view na = a.substr(i, ie - i);
      std::string_view nb = b.substr(j, je - j);
      while (na.size() > 1 && na.front() == '0') na.remove_prefix(1);
      while (nb.size() > 1 && nb.front() == '0') nb.remove_prefix(1);
      if (na.size() != nb.size()) return na.size() < nb.size();
      if (na != nb) return na < nb;
      i = ie;
      j = je;
    } else {
      if (a[i] != b[j]) return a[i] < b[j];
      ++i;
      ++j;
    }
  }
  if (a.size() - i != b.size() - j) return a.size() - i < b.size() - j;
  return a < b;
}

std::optional<std::size_t> CompiledModel::constraint_index(std::string_view id) const {
  for (std::size_t i = 0; i < constraints.size(); ++i) {
    if (constraints[i].spec.id == id) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> CompiledModel::variable_index(std::string_view name) const {
  auto it = std::find(continuousVars.begin(), continuousVars.end(), name);
  if (it == continuousVars.end()) return std::nullopt;
  return static_cast<std::size_t>(it - continuousVars.begin());
}

std::optional<std::size_t> CompiledModel::activity_index(std::string_view name) const {
  auto it = std::find(activities.begin(), activities.end(), name);
  if (it == activities.end()) return std::nullopt;
  return static_cast<std::size_t>(it - activities.begin());
}

std::shared_ptr<const CompiledModel> compile_model(ProcessModel model) {
  for (const Diagnostic& d : validate_model(model)) {
    if (d.severity == Severity::Error) throw ValidationError(d.constraintId, d.message);
  }
  auto out = std::make_shared<CompiledModel>();
  for (const auto& v : model.variables) {
    if (v.kind == VariableKind::Continuous) out->continuousVars.push_back(v.name);
  }
  for (const auto& t : model.tasks) out->activities.push_back(t.name);
  for (const auto& v : model.variables) {
    if (v.kind == VariableKind::Discrete) out->activities.push_back(v.name);
  }

  std::vector<ConstraintSpec> specs = model.constraints;
  std::stable_sort(specs.begin(), specs.end(),
                   [](const auto& a, const auto& b) { return natural_less(a.id, b.id); });

  const auto resolve = [&](Predicate::Kind kind, const std::string& name) -> int {
    if (kind == Predicate::Kind::Comparison) return static_cast<int>(*out->variable_index(name));
    return static_cast<int>(*out->activity_index(name));
  };

  for (std::size_t i = 0; i < specs.size(); ++i) {
    CompiledConstraint cc = compile_constraint(specs[i]);
    for (auto& d : cc.l1Detectors) {
      d.constraintIndex = i;
      d.condition.predicate = d.condition.predicate.bind(resolve);
      out->detectors.push_back(d);
    }
    out->constraints.push_back(std::move(cc));
  }
  out->model = std::move(model);
  return out;
}

}  // namespace hcep
