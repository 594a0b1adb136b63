#include "hybridcep/service.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "hybridcep/errors.hpp"

namespace hcep {

double nearest_rank(const std::vector<double>& sorted, double p) {
  const auto n = sorted.size();
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return sorted[rank - 1];
}

void LatencyWindow::add(double ms) {
  std::lock_guard lock(mutex_);
  values_.push_back(ms);
  ++total_;
  if (values_.size() > capacity_) values_.pop_front();
}

Json LatencyWindow::summary() const {
  std::vector<double> v;
  std::uint64_t total = 0;
  {
    std::lock_guard lock(mutex_);
    v.assign(values_.begin(), values_.end());
    total = total_;
  }
  Json j{{"count", total}, {"window", v.size()}};
  if (v.empty()) return j;
  std::sort(v.begin(), v.end());
  j["mean"] = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  j["p50"] = nearest_rank(v, 50);
  j["p90"] = nearest_rank(v, 90);
  j["p99"] = nearest_rank(v, 99);
  j["max"] = v.back();
  return j;
}

void EventChannel::push(std::string text) {
  {
    std::lock_guard lock(mutex_);
    if (closed_) return;
    items_.push_back(std::move(text));
  }
  cv_.notify_all();
}

std::vector<std::string> EventChannel::pop_all(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  cv_.wait_for(lock, timeout, [this] { return closed_ || !items_.empty(); });
  std::vector<std::string> out(std::make_move_iterator(items_.begin()), std::make_move_iterator(items_.end()));
  items_.clear();
  return out;
}

void EventChannel::close() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool EventChannel::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

// ---------------------------------------------------------------------------

Engine::Engine(EngineOptions options) : options_(options) {
  if (options_.dispatchActions) dispatcher_ = std::make_unique<ActionDispatcher>();
}

Engine::~Engine() { stop_ticker(); }

void Engine::load_model(std::shared_ptr<const CompiledModel> model) {
  std::unique_lock lock(registryMutex_);
  model_ = std::move(model);
}

std::shared_ptr<const CompiledModel> Engine::model() const {
  std::shared_lock lock(registryMutex_);
  return model_;
}

std::string Engine::create_case(const std::string& id) {
  std::unique_lock lock(registryMutex_);
  if (!model_) throw ConfigError("no model loaded");
  std::string caseId = id;
  if (caseId.empty()) {
    do {
      caseId = "case-" + std::to_string(nextCase_++);
    } while (cases_.count(caseId));
  } else if (cases_.count(caseId)) {
    throw EngineError("case '" + caseId + "' already exists");
  }
  auto entry = std::make_shared<CaseEntry>(model_, caseId, options_.enforcement.value_or(model_->model.enforcement));
  {
    std::lock_guard caseLock(entry->mutex);
    count(entry->processor.open());
  }
  cases_.emplace(caseId, std::move(entry));
  return caseId;
}

std::vector<std::string> Engine::case_ids() const {
  std::shared_lock lock(registryMutex_);
  std::vector<std::string> ids;
  for (const auto& [id, e] : cases_) ids.push_back(id);
  return ids;
}

std::shared_ptr<Engine::CaseEntry> Engine::find(const std::string& caseId) const {
  std::shared_lock lock(registryMutex_);
  auto it = cases_.find(caseId);
  if (it == cases_.end()) throw UnknownCase(caseId);
  return it->second;
}

Seconds Engine::case_clock(const CaseEntry& entry) const {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - entry.start).count();
}

Seconds Engine::input_time(const CaseEntry& entry, std::optional<Seconds> ts) const {
  if (ts) return *ts;
  return std::max(case_clock(entry), entry.processor.watermark());
}

void Engine::count(const std::vector<Output>& outputs) {
  for (const Output& o : outputs) {
    if (const auto* e = std::get_if<StatusEvent>(&o)) {
      counters_.statusEvents[static_cast<int>(e->type)]++;
    } else if (std::holds_alternative<TransitionRecord>(o)) {
      counters_.transitions++;
    } else if (std::holds_alternative<ActionFiring>(o)) {
      counters_.actions++;
    }
  }
}

void Engine::publish(CaseEntry& entry, const std::vector<Output>& outputs) {
  count(outputs);
  const CompiledModel& model = entry.processor.model();
  const bool anySubscriber = !entry.subscribers.empty();
  for (const Output& o : outputs) {
    const auto* action = std::get_if<ActionFiring>(&o);
    if (!anySubscriber && !(action && dispatcher_)) continue;
    const Json j = to_json(model, entry.processor.case_id(), o);
    if (action && dispatcher_) dispatcher_->submit(action->action, j);
    if (!anySubscriber) continue;
    const std::string text = "event: " + j.value("type", std::string("record")) + "\ndata: " + j.dump() + "\n\n";
    for (auto& weak : entry.subscribers) {
      if (auto ch = weak.lock()) ch->push(text);
    }
  }
  entry.subscribers.erase(std::remove_if(entry.subscribers.begin(), entry.subscribers.end(),
                                         [](const auto& w) {
                                           auto ch = w.lock();
                                           return !ch || ch->closed();
                                         }),
                          entry.subscribers.end());
}

std::vector<Output> Engine::ingest_signal(const std::string& caseId, const std::string& sensorId, double value,
                                          std::optional<Seconds> ts) {
  const auto started = std::chrono::steady_clock::now();
  auto entry = find(caseId);
  std::lock_guard lock(entry->mutex);
  counters_.signals++;
  std::vector<Output> out;
  try {
    out = entry->processor.ingest_signal(sensorId, value, input_time(*entry, ts));
  } catch (const StaleSample&) {
    counters_.stale++;
    throw;
  } catch (const EngineError&) {
    counters_.errors++;
    throw;
  }
  publish(*entry, out);
  latency_.add(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count());
  return out;
}

TaskOutcome Engine::attempt_task(const std::string& caseId, const std::string& activity, const Attributes& payload,
                                 std::optional<Seconds> ts, const std::string& eventId) {
  const auto started = std::chrono::steady_clock::now();
  auto entry = find(caseId);
  std::lock_guard lock(entry->mutex);
  counters_.tasks++;
  TaskOutcome outcome;
  try {
    outcome = entry->processor.attempt_task(activity, payload, input_time(*entry, ts), eventId);
  } catch (const StaleSample&) {
    counters_.stale++;
    throw;
  } catch (const EngineError&) {
    counters_.errors++;
    throw;
  }
  (outcome.accepted ? counters_.accepted : counters_.rejected)++;
  publish(*entry, outcome.outputs);
  latency_.add(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count());
  return outcome;
}

std::vector<Output> Engine::advance_watermark(const std::string& caseId, Seconds t) {
  auto entry = find(caseId);
  std::lock_guard lock(entry->mutex);
  std::vector<Output> out = entry->processor.advance_watermark(t);
  publish(*entry, out);
  return out;
}

std::vector<Output> Engine::close_case(const std::string& caseId, std::optional<Seconds> ts) {
  auto entry = find(caseId);
  std::lock_guard lock(entry->mutex);
  std::vector<Output> out = entry->processor.close(input_time(*entry, ts));
  publish(*entry, out);
  return out;
}

Json Engine::status(const std::string& caseId) const {
  auto entry = find(caseId);
  std::unique_ptr<CaseProcessor> copy;
  {
    std::lock_guard lock(entry->mutex);
    copy = std::make_unique<CaseProcessor>(entry->processor);
  }
  return copy->snapshot(true);
}

Json Engine::tasks(const std::string& caseId) const {
  auto entry = find(caseId);
  std::unique_ptr<CaseProcessor> copy;
  {
    std::lock_guard lock(entry->mutex);
    copy = std::make_unique<CaseProcessor>(entry->processor);
  }
  Json tasks = Json::array();
  for (const TaskStatus& t : copy->enabled_tasks()) {
    Json j{{"name", t.name}, {"status", to_string(t.status)}};
    if (!t.reason.empty()) j["reason"] = t.reason;
    if (t.restriction) j["restriction"] = t.restriction->to_string();
    tasks.push_back(std::move(j));
  }
  return Json{{"caseId", caseId}, {"watermark", copy->watermark()}, {"tasks", std::move(tasks)}};
}

void Engine::tick() {
  std::vector<std::shared_ptr<CaseEntry>> entries;
  {
    std::shared_lock lock(registryMutex_);
    for (const auto& [id, e] : cases_) entries.push_back(e);
  }
  for (auto& entry : entries) {
    std::lock_guard lock(entry->mutex);
    if (entry->processor.closed()) continue;
    const Seconds target = case_clock(*entry) - options_.latenessBound;
    if (target <= entry->processor.watermark()) continue;
    publish(*entry, entry->processor.advance_watermark(target));
  }
}

void Engine::start_ticker() {
  std::lock_guard lock(tickerMutex_);
  if (ticker_.joinable()) return;
  tickerStop_ = false;
  ticker_ = std::thread([this] {
    std::unique_lock lock(tickerMutex_);
    while (!tickerStop_) {
      tickerCv_.wait_for(lock, options_.tickInterval, [this] { return tickerStop_; });
      if (tickerStop_) break;
      lock.unlock();
      try {
        tick();
      } catch (const std::exception& e) {
        spdlog::error("ticker: {}", e.what());
      }
      lock.lock();
    }
  });
}

void Engine::stop_ticker() {
  {
    std::lock_guard lock(tickerMutex_);
    tickerStop_ = true;
  }
  tickerCv_.notify_all();
  if (ticker_.joinable()) ticker_.join();
}

std::shared_ptr<EventChannel> Engine::subscribe(const std::string& caseId) {
  auto entry = find(caseId);
  auto channel = std::make_shared<EventChannel>();
  std::lock_guard lock(entry->mutex);
  Json snapshot = entry->processor.snapshot(false);
  channel->push("event: snapshot\ndata: " + snapshot.dump() + "\n\n");
  entry->subscribers.push_back(channel);
  return channel;
}

Json Engine::metrics() const {
  Json status = Json::object();
  for (StatusType t : {StatusType::Activation, StatusType::Target, StatusType::Fulfillment, StatusType::Violation,
                       StatusType::PermanentViolation}) {
    status[to_string(t)] = counters_.statusEvents[static_cast<int>(t)].load();
  }
  ObligationAudit audit;
  std::size_t caseCount = 0;
  std::size_t openCases = 0;
  {
    std::shared_lock lock(registryMutex_);
    caseCount = cases_.size();
    for (const auto& [id, e] : cases_) {
      std::lock_guard caseLock(e->mutex);
      const ObligationAudit& a = e->processor.core().l2.audit();
      audit.created += a.created;
      audit.fulfilled += a.fulfilled;
      audit.violated += a.violated;
      audit.discharged += a.discharged;
      audit.vacuousTargets += a.vacuousTargets;
      openCases += !e->processor.closed();
    }
  }
  Json j{{"signals", counters_.signals.load()},
         {"tasks", counters_.tasks.load()},
         {"accepted", counters_.accepted.load()},
         {"rejected", counters_.rejected.load()},
         {"stale", counters_.stale.load()},
         {"errors", counters_.errors.load()},
         {"statusEvents", status},
         {"transitions", counters_.transitions.load()},
         {"actions", counters_.actions.load()},
         {"cases", caseCount},
         {"openCases", openCases},
         {"obligations",
          {{"created", audit.created},
           {"fulfilled", audit.fulfilled},
           {"violated", audit.violated},
           {"discharged", audit.discharged},
           {"vacuousTargets", audit.vacuousTargets}}},
         {"latencyMs", latency_.summary()}};
  if (dispatcher_) {
    const DispatchStats d = dispatcher_->stats();
    j["dispatch"] = {{"submitted", d.submitted}, {"delivered", d.delivered}, {"failed", d.failed}, {"dropped", d.dropped}};
  }
  return j;
}

Json Engine::compiled_model() const {
  auto model = this->model();
  if (!model) throw ConfigError("no model loaded");
  Json constraints = Json::array();
  for (const CompiledConstraint& c : model->constraints) {
    Json detectors = Json::array();
    for (const DetectorSpec& d : c.l1Detectors) {
      detectors.push_back({{"role", to_string(d.role)},
                           {"pred", d.condition.predicate.to_string()},
                           {"sustainedFor", d.condition.sustainedFor},
                           {"trigger", d.occurrence ? "occurrence" : "level"}});
    }
    Json pattern{{"template", to_string(c.l2Pattern.templ)}, {"responseWindow", c.l2Pattern.responseWindow}};
    if (c.l2Pattern.scopeWindow) pattern["scopeWindow"] = *c.l2Pattern.scopeWindow;
    if (c.l2Pattern.correlation) pattern["correlation"] = c.l2Pattern.correlation->to_string();
    constraints.push_back({{"id", c.spec.id}, {"detectors", std::move(detectors)}, {"pattern", std::move(pattern)}});
  }
  return Json{{"enforcement", to_string(model->model.enforcement)}, {"constraints", std::move(constraints)}};
}

}  // namespace hcep
