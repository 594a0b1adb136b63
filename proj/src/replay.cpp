#include "hybridcep/replay.hpp"

#include <atomic>
#include <cmath>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

#include "hybridcep/actions.hpp"
#include "hybridcep/errors.hpp"

namespace hcep {

namespace {

[[noreturn]] void bad_record(const std::string& msg, std::size_t line) { throw SyntaxError(msg, line, 1); }

Seconds read_ts(const Json& j, std::size_t line) {
  if (!j.contains("ts") || !j["ts"].is_number()) bad_record("record without numeric 'ts'", line);
  const double ts = j["ts"].get<double>();
  if (!std::isfinite(ts) || ts < 0) bad_record("'ts' must be a finite non-negative number", line);
  return ts;
}

std::string read_string(const Json& j, const char* key, std::size_t line) {
  if (!j.contains(key) || !j[key].is_string()) bad_record(std::string("record without string '") + key + "'", line);
  return j[key].get<std::string>();
}

std::string read_case(const Json& j, std::size_t line) {
  if (!j.contains("caseId")) bad_record("record without 'caseId'", line);
  const Json& c = j["caseId"];
  if (c.is_string()) return c.get<std::string>();
  if (c.is_number_integer()) return std::to_string(c.get<long long>());
  bad_record("'caseId' must be a string", line);
}

class L2Collector : public L2Observer {
 public:
  L2Collector(std::string caseId, std::vector<std::string>* lines)
      : caseId_(std::move(caseId)), lines_(lines) {}
  void on_l2_change(const Json& record) override {
    Json j = record;
    j["caseId"] = caseId_;
    lines_->push_back(j.dump());
  }

 private:
  std::string caseId_;
  std::vector<std::string>* lines_;
};

}  // namespace

InputRecord parse_record(const Json& j, std::size_t line) {
  if (!j.is_object()) bad_record("record must be an object", line);
  InputRecord r;
  r.line = line;
  const std::string kind = j.value("kind", "");
  if (kind == "signal") {
    r.kind = RecordKind::Signal;
    r.caseId = read_case(j, line);
    r.name = read_string(j, "sensorId", line);
    if (!j.contains("value") || !j["value"].is_number()) bad_record("signal without numeric 'value'", line);
    r.value = j["value"].get<double>();
    if (!std::isfinite(r.value)) bad_record("signal value must be finite", line);
  } else if (kind == "task") {
    r.kind = RecordKind::Task;
    r.caseId = read_case(j, line);
    r.name = read_string(j, "activity", line);
    if (j.contains("payload")) {
      if (!j["payload"].is_object()) bad_record("'payload' must be an object", line);
      for (const auto& [k, v] : j["payload"].items()) {
        auto a = attr_from_json(v);
        if (!a) bad_record("payload attribute '" + k + "' must be a scalar", line);
        r.payload.emplace(k, std::move(*a));
      }
    }
    if (j.contains("eventId")) r.eventId = read_string(j, "eventId", line);
  } else if (kind == "close") {
    r.kind = RecordKind::Close;
    r.caseId = read_case(j, line);
  } else if (kind == "watermark") {
    r.kind = RecordKind::Watermark;
    if (j.contains("caseId")) r.caseId = read_case(j, line);
  } else {
    bad_record("unknown record kind '" + kind + "'", line);
  }
  r.ts = read_ts(j, line);
  return r;
}

Json to_json(const InputRecord& r) {
  Json j;
  switch (r.kind) {
    case RecordKind::Signal:
      j = {{"kind", "signal"}, {"caseId", r.caseId}, {"sensorId", r.name}, {"value", r.value}, {"ts", r.ts}};
      break;
    case RecordKind::Task:
      j = {{"kind", "task"}, {"caseId", r.caseId}, {"activity", r.name}, {"ts", r.ts}};
      if (!r.payload.empty()) j["payload"] = to_json(r.payload);
      if (!r.eventId.empty()) j["eventId"] = r.eventId;
      break;
    case RecordKind::Close: j = {{"kind", "close"}, {"caseId", r.caseId}, {"ts", r.ts}}; break;
    case RecordKind::Watermark:
      j = {{"kind", "watermark"}, {"ts", r.ts}};
      if (!r.caseId.empty()) j["caseId"] = r.caseId;
      break;
  }
  return j;
}

std::vector<InputRecord> parse_trace(std::istream& in, const CompiledModel& model) {
  struct CaseInfo {
    Seconds lastTs = 0.0;
    bool closed = false;
  };
  std::map<std::string, CaseInfo> cases;
  std::vector<InputRecord> records;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(text);
    } catch (const Json::parse_error& e) {
      throw SyntaxError(std::string("malformed record: ") + e.what(), line, e.byte);
    }
    InputRecord r = parse_record(j, line);
    if (r.kind == RecordKind::Signal && !model.variable_index(r.name)) {
      throw EngineError("line " + std::to_string(line) + ": " + UnknownSensor(r.name).what());
    }
    if (r.kind == RecordKind::Task && !model.activity_index(r.name)) {
      throw EngineError("line " + std::to_string(line) + ": " + UnknownActivity(r.name).what());
    }
    if (r.kind == RecordKind::Watermark && r.caseId.empty()) {
      records.push_back(std::move(r));
      continue;
    }
    CaseInfo& info = cases[r.caseId];
    if (info.closed) throw OrderViolation(line, "record for closed case '" + r.caseId + "'");
    if (r.ts < info.lastTs) {
      throw OrderViolation(line, "timestamp " + format_number(r.ts) + " precedes " +
                                     format_number(info.lastTs) + " in case '" + r.caseId + "'");
    }
    info.lastTs = r.ts;
    if (r.kind == RecordKind::Close) info.closed = true;
    records.push_back(std::move(r));
  }
  return records;
}

ReplayResult run_replay(std::shared_ptr<const CompiledModel> model, const std::vector<InputRecord>& records,
                        const ReplayOptions& options) {
  // Partition by case, in order of first appearance. Watermarks without a
  // case apply to every case seen so far.
  std::vector<std::string> order;
  std::map<std::string, std::size_t> index;
  std::vector<std::vector<const InputRecord*>> perCase;
  for (const InputRecord& r : records) {
    if (r.kind == RecordKind::Watermark && r.caseId.empty()) {
      for (auto& list : perCase) list.push_back(&r);
      continue;
    }
    auto [it, inserted] = index.emplace(r.caseId, order.size());
    if (inserted) {
      order.push_back(r.caseId);
      perCase.emplace_back();
    }
    perCase[it->second].push_back(&r);
  }

  ReplayResult result;
  result.records = records.size();
  result.cases.resize(order.size());
  const EnforcementMode mode = options.enforcement.value_or(model->model.enforcement);

  std::mutex errorMutex;
  std::optional<std::pair<std::size_t, std::string>> firstError;

  auto runCase = [&](std::size_t ci) {
    CaseLog& log = result.cases[ci];
    log.caseId = order[ci];
    CaseProcessor proc(model, order[ci], mode);
    L2Collector collector(order[ci], &log.l2Lines);
    if (options.dumpL2) proc.set_l2_observer(&collector);

    auto emit = [&](const std::vector<Output>& outs) {
      for (const Output& o : outs) {
        Json j = to_json(*model, log.caseId, o);
        if (options.dispatcher) {
          if (const auto* a = std::get_if<ActionFiring>(&o)) options.dispatcher->submit(a->action, j);
        }
        log.lines.push_back(j.dump());
      }
    };

    std::size_t currentLine = 0;
    try {
      emit(proc.open());
      Seconds last = 0.0;
      for (const InputRecord* r : perCase[ci]) {
        currentLine = r->line;
        switch (r->kind) {
          case RecordKind::Signal: emit(proc.ingest_signal(r->name, r->value, r->ts)); break;
          case RecordKind::Task: emit(proc.attempt_task(r->name, r->payload, r->ts, r->eventId).outputs); break;
          case RecordKind::Close: emit(proc.close(r->ts)); break;
          case RecordKind::Watermark:
            if (proc.closed() || r->ts < proc.watermark()) continue;
            emit(proc.advance_watermark(r->ts));
            break;
        }
        last = std::max(last, r->ts);
      }
      if (options.closeAtEnd && !proc.closed()) emit(proc.close(std::max(last, proc.watermark())));
      log.summary = proc.summary();
    } catch (const std::exception& e) {
      std::lock_guard lock(errorMutex);
      if (!firstError || currentLine < firstError->first) {
        firstError = std::make_pair(currentLine, std::string(e.what()));
      }
    }
  };

  const int workers = std::max(1, std::min<int>(options.parallelism, static_cast<int>(order.size())));
  if (workers <= 1) {
    for (std::size_t ci = 0; ci < order.size(); ++ci) runCase(ci);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t ci = next++; ci < order.size(); ci = next++) runCase(ci);
      });
    }
    for (auto& t : pool) t.join();
  }
  if (firstError) throw EngineError("line " + std::to_string(firstError->first) + ": " + firstError->second);
  return result;
}

void write_log(const ReplayResult& result, std::ostream& out) {
  for (const CaseLog& c : result.cases) {
    for (const std::string& line : c.lines) out << line << '\n';
    out << c.summary.dump() << '\n';
  }
}

void write_l2_dump(const ReplayResult& result, std::ostream& out) {
  for (const CaseLog& c : result.cases) {
    for (const std::string& line : c.l2Lines) out << line << '\n';
  }
}

}  // namespace hcep
