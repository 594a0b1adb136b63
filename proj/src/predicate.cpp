#include "hybridcep/predicate.hpp"

#include <cctype>
#include <charconv>
#include <vector>

#include "hybridcep/errors.hpp"

namespace hcep {

// ---------------------------------------------------------------------------
// Predicate tree

struct Predicate::Node {
  Kind kind = Kind::True;
  std::string name;
  CmpOp op = CmpOp::Eq;
  std::string thresholdText;
  double threshold = 0.0;
  AttrValue value{0.0};
  Predicate lhs{nullptr};
  Predicate rhs{nullptr};
  int slot = -1;
};

namespace {

double parse_decimal(const std::string& text) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw SyntaxError("invalid number '" + text + "'", 1, 1);
  }
  return v;
}

}  // namespace

Predicate::Predicate()
    : node_([] {
        static const auto node = std::make_shared<const Node>();
        return node;
      }()) {}
Predicate::Predicate(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

Predicate Predicate::truth() { return Predicate(); }
Predicate Predicate::falsity() { return negate(truth()); }

Predicate Predicate::comparison(std::string variable, CmpOp op, std::string thresholdText) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Comparison;
  n->name = std::move(variable);
  n->op = op;
  n->threshold = parse_decimal(thresholdText);
  n->thresholdText = std::move(thresholdText);
  return Predicate(std::move(n));
}

Predicate Predicate::dis(std::string activity) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Dis;
  n->name = std::move(activity);
  return Predicate(std::move(n));
}

Predicate Predicate::payload(std::string key, CmpOp op, AttrValue value) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Payload;
  n->name = std::move(key);
  n->op = op;
  n->value = std::move(value);
  return Predicate(std::move(n));
}

Predicate Predicate::conj(Predicate lhs, Predicate rhs) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::And;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  return Predicate(std::move(n));
}

Predicate Predicate::negate(Predicate inner) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Not;
  n->lhs = std::move(inner);
  return Predicate(std::move(n));
}

Predicate Predicate::disj(Predicate lhs, Predicate rhs) {
  return negate(conj(negate(std::move(lhs)), negate(std::move(rhs))));
}

Predicate::Kind Predicate::kind() const { return node_->kind; }
const std::string& Predicate::name() const { return node_->name; }
CmpOp Predicate::op() const { return node_->op; }
double Predicate::threshold() const { return node_->threshold; }
const std::string& Predicate::threshold_text() const { return node_->thresholdText; }
const AttrValue& Predicate::value() const { return node_->value; }
int Predicate::slot() const { return node_->slot; }

const Predicate& Predicate::lhs() const { return node_->lhs; }
const Predicate& Predicate::rhs() const { return node_->rhs; }
const Predicate& Predicate::inner() const { return lhs(); }

Predicate Predicate::bind(const std::function<int(Kind, const std::string&)>& resolve) const {
  switch (kind()) {
    case Kind::True:
    case Kind::Payload: return *this;
    case Kind::Comparison:
    case Kind::Dis: {
      auto n = std::make_shared<Node>(*node_);
      n->slot = resolve(kind(), name());
      return Predicate(std::move(n));
    }
    case Kind::And: return conj(lhs().bind(resolve), rhs().bind(resolve));
    case Kind::Not: return negate(inner().bind(resolve));
  }
  return *this;
}

bool Predicate::contains_dis() const {
  std::set<std::string> names;
  collect(Kind::Dis, names);
  return !names.empty();
}

bool Predicate::contains_payload() const {
  std::set<std::string> names;
  collect(Kind::Payload, names);
  return !names.empty();
}

void Predicate::collect(Kind leafKind, std::set<std::string>& names) const {
  switch (kind()) {
    case Kind::And:
      lhs().collect(leafKind, names);
      rhs().collect(leafKind, names);
      return;
    case Kind::Not: inner().collect(leafKind, names); return;
    default:
      if (kind() == leafKind && leafKind != Kind::True) names.insert(name());
  }
}

std::string Predicate::to_string() const {
  switch (kind()) {
    case Kind::True: return "true";
    case Kind::Comparison: return name() + " " + hcep::to_string(op()) + " " + threshold_text();
    case Kind::Dis: return "dis(" + name() + ")";
    case Kind::Payload:
      return "payload(" + name() + ") " + hcep::to_string(op()) + " " + format_literal(value());
    case Kind::And: {
      std::string r = rhs().to_string();
      if (rhs().kind() == Kind::And) r = "(" + r + ")";
      return lhs().to_string() + " and " + r;
    }
    case Kind::Not: {
      const std::string s = inner().to_string();
      return inner().kind() == Kind::And ? "not (" + s + ")" : "not " + s;
    }
  }
  return "?";
}

bool operator==(const Predicate& a, const Predicate& b) {
  if (a.node_ == b.node_) return true;
  if (a.kind() != b.kind()) return false;
  switch (a.kind()) {
    case Predicate::Kind::True: return true;
    case Predicate::Kind::Comparison:
      return a.name() == b.name() && a.op() == b.op() && a.threshold_text() == b.threshold_text();
    case Predicate::Kind::Dis: return a.name() == b.name();
    case Predicate::Kind::Payload:
      return a.name() == b.name() && a.op() == b.op() && a.value() == b.value();
    case Predicate::Kind::And: return a.lhs() == b.lhs() && a.rhs() == b.rhs();
    case Predicate::Kind::Not: return a.inner() == b.inner();
  }
  return false;
}

Predicate residual(const Predicate& p, const std::function<Tri(const Predicate&)>& leaf) {
  switch (p.kind()) {
    case Predicate::Kind::True: return p;
    case Predicate::Kind::And: {
      Predicate l = residual(p.lhs(), leaf);
      Predicate r = residual(p.rhs(), leaf);
      const bool lFalse = l.kind() == Predicate::Kind::Not && l.inner().kind() == Predicate::Kind::True;
      const bool rFalse = r.kind() == Predicate::Kind::Not && r.inner().kind() == Predicate::Kind::True;
      if (lFalse || rFalse) return Predicate::falsity();
      if (l.kind() == Predicate::Kind::True) return r;
      if (r.kind() == Predicate::Kind::True) return l;
      return Predicate::conj(std::move(l), std::move(r));
    }
    case Predicate::Kind::Not: {
      Predicate i = residual(p.inner(), leaf);
      if (i.kind() == Predicate::Kind::True) return Predicate::falsity();
      if (i.kind() == Predicate::Kind::Not) return i.inner();
      return Predicate::negate(std::move(i));
    }
    default:
      switch (leaf(p)) {
        case Tri::True: return Predicate::truth();
        case Tri::False: return Predicate::falsity();
        case Tri::Unknown: return p;
      }
  }
  return p;
}

// ---------------------------------------------------------------------------
// Tokenizer and parsers

namespace {

enum class Tok { Ident, Number, String, Op, LParen, RParen, Dot, End };

struct Token {
  Tok type;
  std::string text;
  std::size_t pos;
};

std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const unsigned char c = static_cast<unsigned char>(s[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    if (std::isalpha(c) || c == '_') {
      while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_')) ++i;
      out.push_back({Tok::Ident, std::string(s.substr(start, i - start)), start});
    } else if (std::isdigit(c) || ((c == '-' || c == '+') && i + 1 < s.size() &&
                                   (std::isdigit(static_cast<unsigned char>(s[i + 1])) ||
                                    s[i + 1] == '.'))) {
      ++i;
      while (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '.')) ++i;
      if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
        ++i;
        if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
      }
      out.push_back({Tok::Number, std::string(s.substr(start, i - start)), start});
    } else if (c == '"') {
      ++i;
      while (i < s.size() && s[i] != '"') i += (s[i] == '\\') ? 2 : 1;
      if (i >= s.size()) throw SyntaxError("unterminated string literal", 1, start + 1);
      ++i;
      out.push_back({Tok::String, std::string(s.substr(start, i - start)), start});
    } else if (c == '<' || c == '>' || c == '=' || c == '!') {
      ++i;
      if (i < s.size() && s[i] == '=') ++i;
      out.push_back({Tok::Op, std::string(s.substr(start, i - start)), start});
    } else if (s.substr(i, 3) == "≤" || s.substr(i, 3) == "≥") {
      i += 3;
      out.push_back({Tok::Op, std::string(s.substr(start, 3)), start});
    } else if (c == '(') {
      ++i;
      out.push_back({Tok::LParen, "(", start});
    } else if (c == ')') {
      ++i;
      out.push_back({Tok::RParen, ")", start});
    } else if (c == '.') {
      ++i;
      out.push_back({Tok::Dot, ".", start});
    } else {
      throw SyntaxError(std::string("unexpected character '") + s[i] + "'", 1, start + 1);
    }
  }
  out.push_back({Tok::End, "", s.size()});
  return out;
}

bool is_keyword(const std::string& s) {
  return s == "and" || s == "not" || s == "true" || s == "false" || s == "dis" || s == "payload";
}

class Cursor {
 public:
  explicit Cursor(std::string_view text) : toks_(tokenize(text)) {}

  const Token& peek() const { return toks_[i_]; }
  Token next() { return toks_[i_ < toks_.size() - 1 ? i_++ : i_]; }
  bool at_keyword(const char* kw) const { return peek().type == Tok::Ident && peek().text == kw; }

  [[noreturn]] void fail(const std::string& msg) const {
    const Token& t = peek();
    throw SyntaxError(msg + (t.type == Tok::End ? " at end of input" : " near '" + t.text + "'"), 1,
                      t.pos + 1);
  }

  Token expect(Tok type, const char* what) {
    if (peek().type != type) fail(std::string("expected ") + what);
    return next();
  }

  std::string identifier() {
    if (peek().type != Tok::Ident || is_keyword(peek().text)) fail("expected identifier");
    return next().text;
  }

  CmpOp op() {
    if (peek().type != Tok::Op) fail("expected comparison operator");
    auto op = parse_cmp_op(peek().text);
    if (!op) fail("unsupported operator");
    next();
    return *op;
  }

  AttrValue literal() {
    const Token& t = peek();
    if (t.type == Tok::Number) {
      next();
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
      if (ec != std::errc() || ptr != t.text.data() + t.text.size()) fail("invalid number");
      return v;
    }
    if (t.type == Tok::String) {
      next();
      try {
        return Json::parse(t.text).get<std::string>();
      } catch (const Json::exception&) {
        fail("invalid string literal");
      }
    }
    if (at_keyword("true") || at_keyword("false")) return next().text == "true";
    fail("expected literal");
  }

  std::string number_text() {
    if (peek().type != Tok::Number) fail("expected number");
    std::string text = next().text;
    if (!text.empty() && text.front() == '+') text.erase(0, 1);
    return text;
  }

  void finish() {
    if (peek().type != Tok::End) fail("unexpected trailing input");
  }

 private:
  std::vector<Token> toks_;
  std::size_t i_ = 0;
};

Predicate parse_pred_expr(Cursor& c);

Predicate parse_pred_primary(Cursor& c) {
  if (c.peek().type == Tok::LParen) {
    c.next();
    Predicate p = parse_pred_expr(c);
    c.expect(Tok::RParen, "')'");
    return p;
  }
  if (c.at_keyword("true")) {
    c.next();
    return Predicate::truth();
  }
  if (c.at_keyword("dis")) {
    c.next();
    c.expect(Tok::LParen, "'('");
    std::string act = c.identifier();
    c.expect(Tok::RParen, "')'");
    return Predicate::dis(std::move(act));
  }
  if (c.at_keyword("payload")) {
    c.next();
    c.expect(Tok::LParen, "'('");
    std::string key = c.identifier();
    c.expect(Tok::RParen, "')'");
    const CmpOp op = c.op();
    return Predicate::payload(std::move(key), op, c.literal());
  }
  std::string var = c.identifier();
  const CmpOp op = c.op();
  return Predicate::comparison(std::move(var), op, c.number_text());
}

Predicate parse_pred_unary(Cursor& c) {
  if (c.at_keyword("not")) {
    c.next();
    return Predicate::negate(parse_pred_unary(c));
  }
  return parse_pred_primary(c);
}

Predicate parse_pred_expr(Cursor& c) {
  Predicate p = parse_pred_unary(c);
  while (c.at_keyword("and")) {
    c.next();
    p = Predicate::conj(std::move(p), parse_pred_unary(c));
  }
  return p;
}

}  // namespace

Predicate parse_predicate(std::string_view text) {
  Cursor c(text);
  Predicate p = parse_pred_expr(c);
  c.finish();
  return p;
}

// ---------------------------------------------------------------------------
// Correlation

struct Correlation::Node {
  Kind kind = Kind::True;
  Operand left;
  Operand right;
  CmpOp op = CmpOp::Eq;
  Correlation lhs{nullptr};
  Correlation rhs{nullptr};
};

Correlation::Correlation()
    : node_([] {
        static const auto node = std::make_shared<const Node>();
        return node;
      }()) {}
Correlation::Correlation(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

Correlation Correlation::truth() { return Correlation(); }

Correlation Correlation::compare(Operand lhs, CmpOp op, Operand rhs) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Compare;
  n->left = std::move(lhs);
  n->op = op;
  n->right = std::move(rhs);
  return Correlation(std::move(n));
}

Correlation Correlation::conj(Correlation lhs, Correlation rhs) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::And;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  return Correlation(std::move(n));
}

Correlation Correlation::negate(Correlation inner) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Not;
  n->lhs = std::move(inner);
  return Correlation(std::move(n));
}

Correlation::Kind Correlation::kind() const { return node_->kind; }
const Correlation::Operand& Correlation::left_operand() const { return node_->left; }
const Correlation::Operand& Correlation::right_operand() const { return node_->right; }
CmpOp Correlation::op() const { return node_->op; }
const Correlation& Correlation::lhs() const { return node_->lhs; }
const Correlation& Correlation::rhs() const { return node_->rhs; }
const Correlation& Correlation::inner() const { return lhs(); }

namespace {

std::string operand_text(const Correlation::Operand& o) {
  switch (o.side) {
    case Correlation::Side::Activation: return "activation.payload." + o.key;
    case Correlation::Side::Target: return "target.payload." + o.key;
    case Correlation::Side::Literal: return format_literal(o.literal);
  }
  return "?";
}

}  // namespace

std::string Correlation::to_string() const {
  switch (kind()) {
    case Kind::True: return "true";
    case Kind::Compare:
      return operand_text(left_operand()) + " " + hcep::to_string(op()) + " " +
             operand_text(right_operand());
    case Kind::And: {
      std::string r = rhs().to_string();
      if (rhs().kind() == Kind::And) r = "(" + r + ")";
      return lhs().to_string() + " and " + r;
    }
    case Kind::Not: {
      const std::string s = inner().to_string();
      return inner().kind() == Kind::And ? "not (" + s + ")" : "not " + s;
    }
  }
  return "?";
}

bool operator==(const Correlation& a, const Correlation& b) {
  if (a.node_ == b.node_) return true;
  if (a.kind() != b.kind()) return false;
  switch (a.kind()) {
    case Correlation::Kind::True: return true;
    case Correlation::Kind::Compare:
      return a.left_operand() == b.left_operand() && a.op() == b.op() &&
             a.right_operand() == b.right_operand();
    case Correlation::Kind::And: return a.lhs() == b.lhs() && a.rhs() == b.rhs();
    case Correlation::Kind::Not: return a.inner() == b.inner();
  }
  return false;
}

namespace {

Correlation::Operand parse_operand(Cursor& c) {
  Correlation::Operand o;
  if (c.at_keyword("true") || c.at_keyword("false") || c.peek().type == Tok::Number ||
      c.peek().type == Tok::String) {
    o.side = Correlation::Side::Literal;
    o.literal = c.literal();
    return o;
  }
  if (c.peek().type != Tok::Ident) c.fail("expected operand");
  const std::string side = c.next().text;
  if (side == "activation") {
    o.side = Correlation::Side::Activation;
  } else if (side == "target") {
    o.side = Correlation::Side::Target;
  } else {
    c.fail("operand must start with 'activation' or 'target'");
  }
  c.expect(Tok::Dot, "'.'");
  if (c.peek().type != Tok::Ident || c.peek().text != "payload") c.fail("expected 'payload'");
  c.next();
  c.expect(Tok::Dot, "'.'");
  if (c.peek().type != Tok::Ident) c.fail("expected attribute name");
  o.key = c.next().text;
  return o;
}

Correlation parse_corr_expr(Cursor& c);

Correlation parse_corr_unary(Cursor& c) {
  if (c.at_keyword("not")) {
    c.next();
    return Correlation::negate(parse_corr_unary(c));
  }
  if (c.peek().type == Tok::LParen) {
    c.next();
    Correlation e = parse_corr_expr(c);
    c.expect(Tok::RParen, "')'");
    return e;
  }
  if (c.at_keyword("true")) {
    // `true` alone is the trivial correlation; `true == x` is a comparison.
    Cursor probe = c;
    probe.next();
    if (probe.peek().type != Tok::Op) {
      c.next();
      return Correlation::truth();
    }
  }
  Correlation::Operand lhs = parse_operand(c);
  const CmpOp op = c.op();
  Correlation::Operand rhs = parse_operand(c);
  return Correlation::compare(std::move(lhs), op, std::move(rhs));
}

Correlation parse_corr_expr(Cursor& c) {
  Correlation e = parse_corr_unary(c);
  while (c.at_keyword("and")) {
    c.next();
    e = Correlation::conj(std::move(e), parse_corr_unary(c));
  }
  return e;
}

CmpOp flip(CmpOp op) {
  switch (op) {
    case CmpOp::Lt: return CmpOp::Gt;
    case CmpOp::Le: return CmpOp::Ge;
    case CmpOp::Ge: return CmpOp::Le;
    case CmpOp::Gt: return CmpOp::Lt;
    case CmpOp::Eq: return CmpOp::Eq;
  }
  return op;
}

// nullopt: value unavailable (placeholder target); missing key → no value.
struct Resolved {
  bool unknown = false;
  const AttrValue* value = nullptr;
};

Resolved resolve(const Correlation::Operand& o, const Attributes& activation,
                 const Attributes* target) {
  switch (o.side) {
    case Correlation::Side::Literal: return {false, &o.literal};
    case Correlation::Side::Activation: {
      auto it = activation.find(o.key);
      return {false, it == activation.end() ? nullptr : &it->second};
    }
    case Correlation::Side::Target: {
      if (!target) return {true, nullptr};
      auto it = target->find(o.key);
      return {false, it == target->end() ? nullptr : &it->second};
    }
  }
  return {};
}

}  // namespace

Correlation parse_correlation(std::string_view text) {
  Cursor c(text);
  Correlation e = parse_corr_expr(c);
  c.finish();
  return e;
}

Tri evaluate(const Correlation& c, const Attributes& activation, const Attributes* target) {
  switch (c.kind()) {
    case Correlation::Kind::True: return Tri::True;
    case Correlation::Kind::And: {
      const Tri l = evaluate(c.lhs(), activation, target);
      if (l == Tri::False) return l;
      return tri_and(l, evaluate(c.rhs(), activation, target));
    }
    case Correlation::Kind::Not: return tri_not(evaluate(c.inner(), activation, target));
    case Correlation::Kind::Compare: {
      const Resolved l = resolve(c.left_operand(), activation, target);
      const Resolved r = resolve(c.right_operand(), activation, target);
      if ((!l.unknown && !l.value) || (!r.unknown && !r.value)) return Tri::False;
      if (l.unknown || r.unknown) return Tri::Unknown;
      return to_tri(compare_values(*l.value, c.op(), *r.value));
    }
  }
  return Tri::False;
}

Predicate target_residual(const Correlation& c, const Attributes& activation) {
  switch (c.kind()) {
    case Correlation::Kind::True: return Predicate::truth();
    case Correlation::Kind::And: {
      Predicate l = target_residual(c.lhs(), activation);
      Predicate r = target_residual(c.rhs(), activation);
      return residual(Predicate::conj(std::move(l), std::move(r)),
                      [](const Predicate&) { return Tri::Unknown; });
    }
    case Correlation::Kind::Not:
      return residual(Predicate::negate(target_residual(c.inner(), activation)),
                      [](const Predicate&) { return Tri::Unknown; });
    case Correlation::Kind::Compare: {
      const auto& lo = c.left_operand();
      const auto& ro = c.right_operand();
      const bool lt = lo.side == Correlation::Side::Target;
      const bool rt = ro.side == Correlation::Side::Target;
      if (lt == rt) {
        const Tri v = evaluate(c, activation, nullptr);
        // Target-vs-target comparisons are rejected by model validation.
        return v == Tri::True ? Predicate::truth() : Predicate::falsity();
      }
      const auto& other = lt ? ro : lo;
      const Resolved known = resolve(other, activation, nullptr);
      if (!known.value) return Predicate::falsity();
      const auto& targetKey = lt ? lo.key : ro.key;
      return Predicate::payload(targetKey, lt ? c.op() : flip(c.op()), *known.value);
    }
  }
  return Predicate::truth();
}

}  // namespace hcep
