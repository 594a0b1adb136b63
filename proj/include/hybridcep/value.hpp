#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include <json.hpp>

namespace hcep {

using Json = nlohmann::json;

/// Event time, in seconds on the case timeline (case start is 0).
using Seconds = double;

/// Scalar payload value carried by task events and status events.
using AttrValue = std::variant<double, std::string, bool>;

/// Ordered so that serialization is deterministic.
using Attributes = std::map<std::string, AttrValue>;

enum class CmpOp { Lt, Le, Eq, Ge, Gt };

const char* to_string(CmpOp op);
std::optional<CmpOp> parse_cmp_op(std::string_view text);

/// Numbers compare numerically, strings lexicographically, booleans only
/// under `==`. Mismatched kinds never satisfy a comparison.
bool compare_values(const AttrValue& lhs, CmpOp op, const AttrValue& rhs);

inline bool compare_numbers(double lhs, CmpOp op, double rhs) {
  switch (op) {
    case CmpOp::Lt: return lhs < rhs;
    case CmpOp::Le: return lhs <= rhs;
    case CmpOp::Eq: return lhs == rhs;
    case CmpOp::Ge: return lhs >= rhs;
    case CmpOp::Gt: return lhs > rhs;
  }
  return false;
}

Json to_json_value(const AttrValue& v);
std::optional<AttrValue> attr_from_json(const Json& j);
Json to_json(const Attributes& attrs);
Attributes attributes_from_json(const Json& j);

/// Literal text in the predicate grammar (strings quoted, numbers shortest).
std::string format_literal(const AttrValue& v);

/// Shortest decimal text that round-trips.
std::string format_number(double v);

}  // namespace hcep
