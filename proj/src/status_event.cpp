#include "hybridcep/status_event.hpp"

namespace hcep {

const char* to_string(StatusType t) {
  switch (t) {
    case StatusType::Activation: return "ACTIVATION";
    case StatusType::Target: return "TARGET";
    case StatusType::Fulfillment: return "FULFILLMENT";
    case StatusType::Violation: return "VIOLATION";
    case StatusType::PermanentViolation: return "PERMANENT_VIOLATION";
  }
  return "?";
}

std::optional<StatusType> parse_status_type(std::string_view s) {
  for (StatusType t : {StatusType::Activation, StatusType::Target, StatusType::Fulfillment,
                       StatusType::Violation, StatusType::PermanentViolation}) {
    if (s == to_string(t)) return t;
  }
  return std::nullopt;
}

Json to_json(const CompiledModel& model, const std::string& caseId, const StatusEvent& e) {
  Json j{{"type", "status"},
         {"caseId", caseId},
         {"eventId", e.eventId},
         {"constraintId", model.constraints[e.constraintIndex].spec.id},
         {"status", to_string(e.type)},
         {"ts", e.ts},
         {"payload", to_json(e.payload)}};
  if (!e.activationRef.empty()) j["activationRef"] = e.activationRef;
  if (!e.reason.empty()) j["reason"] = e.reason;
  if (!e.sourceEventId.empty()) j["sourceEventId"] = e.sourceEventId;
  return j;
}

Json to_json(const TaskEvent& e) {
  return Json{{"caseId", e.caseId},
              {"activity", e.activity},
              {"ts", e.ts},
              {"payload", to_json(e.payload)},
              {"eventId", e.eventId}};
}

}  // namespace hcep
