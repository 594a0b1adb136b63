#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "hybridcep/model.hpp"
#include "hybridcep/value.hpp"

namespace hcep {

enum class StatusType { Activation, Target, Fulfillment, Violation, PermanentViolation };

const char* to_string(StatusType t);
std::optional<StatusType> parse_status_type(std::string_view s);

inline bool is_violation(StatusType t) {
  return t == StatusType::Violation || t == StatusType::PermanentViolation;
}

/// Element of the constraintStatus stream shared by L1 (ACTIVATION, TARGET)
/// and L2 (FULFILLMENT, VIOLATION, PERMANENT_VIOLATION).
struct StatusEvent {
  std::string eventId;  // assigned by the case processor
  std::size_t constraintIndex = 0;
  StatusType type = StatusType::Activation;
  Seconds ts = 0.0;
  Attributes payload;
  std::string activationRef;  // activation resolved by this event, if any
  std::string reason;
  std::string sourceEventId;  // task event that produced it, if any
  /// Emitted during a hypothetical run with an unspecified task payload.
  bool placeholder = false;
};

struct SignalSample {
  std::string caseId;
  std::string sensorId;
  double value = 0.0;
  Seconds ts = 0.0;
};

struct TaskEvent {
  std::string caseId;
  std::string activity;
  Seconds ts = 0.0;
  Attributes payload;
  std::string eventId;
};

Json to_json(const CompiledModel& model, const std::string& caseId, const StatusEvent& e);
Json to_json(const TaskEvent& e);

}  // namespace hcep
