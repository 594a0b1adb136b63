#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hybridcep/case_processor.hpp"
#include "hybridcep/model.hpp"

namespace hcep {

class ActionDispatcher;

enum class RecordKind { Signal, Task, Close, Watermark };

/// One line of an input trace:
///   {"kind":"signal","caseId":"c1","sensorId":"temp","value":85.0,"ts":10.0}
///   {"kind":"task","caseId":"c1","activity":"StartCooling","ts":22.5,"payload":{"userId":7}}
///   {"kind":"close","caseId":"c1","ts":60}
///   {"kind":"watermark","ts":30}            (caseId optional; absent = every case seen so far)
struct InputRecord {
  RecordKind kind = RecordKind::Signal;
  std::string caseId;
  std::string name;  // sensorId or activity
  double value = 0.0;
  Seconds ts = 0.0;
  Attributes payload;
  std::string eventId;
  std::size_t line = 0;
};

InputRecord parse_record(const Json& j, std::size_t line);
Json to_json(const InputRecord& r);

/// Parses NDJSON (blank lines skipped) and checks per-case ordering and
/// names against the model. Throws SyntaxError or OrderViolation (with the
/// line number) and EngineError for unknown sensors/activities.
std::vector<InputRecord> parse_trace(std::istream& in, const CompiledModel& model);

struct ReplayOptions {
  int parallelism = 1;
  std::optional<EnforcementMode> enforcement;  // default: the model's
  bool closeAtEnd = false;  // close each case at its last timestamp
  bool dumpL2 = false;
  ActionDispatcher* dispatcher = nullptr;
};

struct CaseLog {
  std::string caseId;
  std::vector<std::string> lines;    // NDJSON output records
  std::vector<std::string> l2Lines;  // obligation/token changes when dumpL2
  Json summary;
};

struct ReplayResult {
  std::vector<CaseLog> cases;  // in order of first appearance
  std::size_t records = 0;
};

ReplayResult run_replay(std::shared_ptr<const CompiledModel> model, const std::vector<InputRecord>& records,
                        const ReplayOptions& options);

/// Per-case logs concatenated in first-appearance order, each followed by
/// its summary record.
void write_log(const ReplayResult& result, std::ostream& out);
void write_l2_dump(const ReplayResult& result, std::ostream& out);

}  // namespace hcep
