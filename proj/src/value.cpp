#include "hybridcep/value.hpp"

#include <charconv>
#include <cmath>

namespace hcep {

const char* to_string(CmpOp op) {
  switch (op) {
    case CmpOp::Lt: return "<";
    case CmpOp::Le: return "<=";
    case CmpOp::Eq: return "==";
    case CmpOp::Ge: return ">=";
    case CmpOp::Gt: return ">";
  }
  return "?";
}

std::optional<CmpOp> parse_cmp_op(std::string_view text) {
  if (text == "<") return CmpOp::Lt;
  if (text == "<=" || text == "≤") return CmpOp::Le;
  if (text == "==" || text == "=") return CmpOp::Eq;
  if (text == ">=" || text == "≥") return CmpOp::Ge;
  if (text == ">") return CmpOp::Gt;
  return std::nullopt;
}

bool compare_values(const AttrValue& lhs, CmpOp op, const AttrValue& rhs) {
  if (lhs.index() != rhs.index()) return false;
  if (const auto* l = std::get_if<double>(&lhs)) return compare_numbers(*l, op, std::get<double>(rhs));
  if (const auto* l = std::get_if<std::string>(&lhs)) {
    const int c = l->compare(std::get<std::string>(rhs));
    switch (op) {
      case CmpOp::Lt: return c < 0;
      case CmpOp::Le: return c <= 0;
      case CmpOp::Eq: return c == 0;
      case CmpOp::Ge: return c >= 0;
      case CmpOp::Gt: return c > 0;
    }
    return false;
  }
  return op == CmpOp::Eq && std::get<bool>(lhs) == std::get<bool>(rhs);
}

Json to_json_value(const AttrValue& v) {
  return std::visit([](const auto& x) { return Json(x); }, v);
}

std::optional<AttrValue> attr_from_json(const Json& j) {
  if (j.is_boolean()) return AttrValue{j.get<bool>()};
  if (j.is_number()) return AttrValue{j.get<double>()};
  if (j.is_string()) return AttrValue{j.get<std::string>()};
  return std::nullopt;
}

Json to_json(const Attributes& attrs) {
  Json out = Json::object();
  for (const auto& [k, v] : attrs) out[k] = to_json_value(v);
  return out;
}

Attributes attributes_from_json(const Json& j) {
  Attributes out;
  if (!j.is_object()) return out;
  for (const auto& [k, v] : j.items()) {
    if (auto a = attr_from_json(v)) out.emplace(k, std::move(*a));
  }
  return out;
}

std::string format_number(double v) {
  if (std::isfinite(v) && v == std::floor(v) && std::fabs(v) < 1e15) {
    return std::to_string(static_cast<long long>(v));
  }
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string format_literal(const AttrValue& v) {
  if (const auto* d = std::get_if<double>(&v)) return format_number(*d);
  if (const auto* b = std::get_if<bool>(&v)) return *b ? "true" : "false";
  return Json(std::get<std::string>(v)).dump();
}

}  // namespace hcep
