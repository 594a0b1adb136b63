#pragma once

#include <functional>
#include <memory>
#include <set>
#include <string>
#include <string_view>

#include "hybridcep/value.hpp"

namespace hcep {

/// Three-valued truth, used when a task payload is a placeholder.
enum class Tri { False, True, Unknown };

inline Tri tri_not(Tri v) {
  if (v == Tri::Unknown) return v;
  return v == Tri::True ? Tri::False : Tri::True;
}

inline Tri tri_and(Tri a, Tri b) {
  if (a == Tri::False || b == Tri::False) return Tri::False;
  if (a == Tri::True && b == Tri::True) return Tri::True;
  return Tri::Unknown;
}

inline Tri to_tri(bool b) { return b ? Tri::True : Tri::False; }

/// Immutable predicate tree over the hybrid state:
///
///   true | <var> <op> <number> | dis(<activity>) | payload(<key>) <op> <literal>
///        | <p> and <p> | not <p>
///
/// Disjunction is written `not (not a and not b)`. Copies share structure.
class Predicate {
 public:
  enum class Kind { True, Comparison, Dis, Payload, And, Not };

  static Predicate truth();
  static Predicate falsity();  // `not true`
  static Predicate comparison(std::string variable, CmpOp op, std::string thresholdText);
  static Predicate dis(std::string activity);
  static Predicate payload(std::string key, CmpOp op, AttrValue value);
  static Predicate conj(Predicate lhs, Predicate rhs);
  static Predicate negate(Predicate inner);
  /// `not (not a and not b)`
  static Predicate disj(Predicate lhs, Predicate rhs);

  Predicate();  // true

  Kind kind() const;
  /// Variable, activity or payload key for leaves.
  const std::string& name() const;
  CmpOp op() const;
  double threshold() const;
  const std::string& threshold_text() const;
  const AttrValue& value() const;
  const Predicate& lhs() const;
  const Predicate& rhs() const;
  const Predicate& inner() const;

  /// Index of the referenced variable/activity once bound by the model compiler.
  int slot() const;
  Predicate bind(const std::function<int(Kind, const std::string&)>& resolve) const;

  bool contains_dis() const;
  bool contains_payload() const;
  void collect(Kind leafKind, std::set<std::string>& names) const;

  std::string to_string() const;

  /// Structural equality; bound slots are ignored.
  friend bool operator==(const Predicate& a, const Predicate& b);

 private:
  struct Node;
  explicit Predicate(std::shared_ptr<const Node> node);
  std::shared_ptr<const Node> node_;

  friend struct Node;
};

/// Throws SyntaxError (line 1, column = 1-based offset in `text`).
Predicate parse_predicate(std::string_view text);

/// Evaluates with a caller-supplied leaf evaluator (Comparison/Dis/Payload).
template <class LeafFn>
Tri evaluate3(const Predicate& p, LeafFn&& leaf) {
  switch (p.kind()) {
    case Predicate::Kind::True: return Tri::True;
    case Predicate::Kind::And: {
      const Tri l = evaluate3(p.lhs(), leaf);
      if (l == Tri::False) return l;
      return tri_and(l, evaluate3(p.rhs(), leaf));
    }
    case Predicate::Kind::Not: return tri_not(evaluate3(p.inner(), leaf));
    default: return leaf(p);
  }
}

/// Partial evaluation: leaves with a known value are folded away, unknown
/// leaves are kept. The result holds iff `p` holds for every completion.
Predicate residual(const Predicate& p, const std::function<Tri(const Predicate&)>& leaf);

/// Relation between activation and target payloads:
///
///   true | <operand> <op> <operand> | <c> and <c> | not <c>
///   operand := activation.payload.<key> | target.payload.<key> | <literal>
class Correlation {
 public:
  enum class Kind { True, Compare, And, Not };
  enum class Side { Activation, Target, Literal };

  struct Operand {
    Side side = Side::Literal;
    std::string key;
    AttrValue literal{0.0};
    friend bool operator==(const Operand&, const Operand&) = default;
  };

  static Correlation truth();
  static Correlation compare(Operand lhs, CmpOp op, Operand rhs);
  static Correlation conj(Correlation lhs, Correlation rhs);
  static Correlation negate(Correlation inner);

  Correlation();

  Kind kind() const;
  const Operand& left_operand() const;
  const Operand& right_operand() const;
  CmpOp op() const;
  const Correlation& lhs() const;
  const Correlation& rhs() const;
  const Correlation& inner() const;

  std::string to_string() const;
  friend bool operator==(const Correlation& a, const Correlation& b);

 private:
  struct Node;
  explicit Correlation(std::shared_ptr<const Node> node);
  std::shared_ptr<const Node> node_;

  friend struct Node;
};

Correlation parse_correlation(std::string_view text);

/// `target == nullptr` stands for a placeholder payload: comparisons that
/// read it evaluate Unknown.
Tri evaluate(const Correlation& c, const Attributes& activation, const Attributes* target);

/// Rewrites the correlation, with activation values substituted, as a
/// predicate over the target payload (`payload(k) op v`).
Predicate target_residual(const Correlation& c, const Attributes& activation);

}  // namespace hcep
