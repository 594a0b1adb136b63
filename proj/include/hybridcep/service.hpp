#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include "hybridcep/actions.hpp"
#include "hybridcep/case_processor.hpp"
#include "hybridcep/model.hpp"

namespace hcep {

/// Nearest-rank percentile: the value at rank ceil(p/100 * N) of the sorted
/// sample (1-based). `sorted` must be ascending and non-empty.
double nearest_rank(const std::vector<double>& sorted, double p);

/// Bounded window of recent latency observations (milliseconds).
class LatencyWindow {
 public:
  explicit LatencyWindow(std::size_t capacity = 100000) : capacity_(capacity) {}
  void add(double ms);
  /// {count, mean, p50, p90, p99, max} over the window.
  Json summary() const;

 private:
  mutable std::mutex mutex_;
  std::size_t capacity_;
  std::deque<double> values_;
  std::uint64_t total_ = 0;
};

/// Queue of serialized records feeding one server-sent-events connection.
class EventChannel {
 public:
  void push(std::string text);
  /// Waits up to `timeout` for records; returns them (possibly none).
  std::vector<std::string> pop_all(std::chrono::milliseconds timeout);
  void close();
  bool closed() const;

 private:
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<std::string> items_;
  bool closed_ = false;
};

struct EngineOptions {
  std::optional<EnforcementMode> enforcement;  // default: the model's
  /// Live-mode watermark trails the case clock by this many seconds.
  double latenessBound = 0.0;
  std::chrono::milliseconds tickInterval{20};
  bool dispatchActions = true;
};

/// Live execution: per-case processors behind per-case locks, a case clock
/// mapped from the monotonic wall clock, and a ticker that advances
/// watermarks so timers fire without input.
class Engine {
 public:
  explicit Engine(EngineOptions options = {});
  ~Engine();

  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  /// Replaces the model used for cases created afterwards.
  void load_model(std::shared_ptr<const CompiledModel> model);
  std::shared_ptr<const CompiledModel> model() const;

  /// Returns the new case id (generated when `id` is empty).
  std::string create_case(const std::string& id = "");
  std::vector<std::string> case_ids() const;

  /// Event time defaults to the case clock (never below the watermark).
  std::vector<Output> ingest_signal(const std::string& caseId, const std::string& sensorId, double value,
                                    std::optional<Seconds> ts = std::nullopt);
  TaskOutcome attempt_task(const std::string& caseId, const std::string& activity, const Attributes& payload,
                           std::optional<Seconds> ts = std::nullopt, const std::string& eventId = "");
  std::vector<Output> advance_watermark(const std::string& caseId, Seconds t);
  std::vector<Output> close_case(const std::string& caseId, std::optional<Seconds> ts = std::nullopt);

  Json status(const std::string& caseId) const;
  Json tasks(const std::string& caseId) const;

  /// Advances every open case to its clock minus the lateness bound.
  void tick();
  void start_ticker();
  void stop_ticker();

  std::shared_ptr<EventChannel> subscribe(const std::string& caseId);

  Json metrics() const;
  Json compiled_model() const;

  const EngineOptions& options() const { return options_; }

 private:
  struct CaseEntry {
    CaseEntry(std::shared_ptr<const CompiledModel> model, const std::string& id, EnforcementMode mode)
        : processor(std::move(model), id, mode), start(std::chrono::steady_clock::now()) {}
    mutable std::mutex mutex;
    CaseProcessor processor;
    std::chrono::steady_clock::time_point start;
    std::vector<std::weak_ptr<EventChannel>> subscribers;
  };

  std::shared_ptr<CaseEntry> find(const std::string& caseId) const;
  Seconds case_clock(const CaseEntry& entry) const;
  Seconds input_time(const CaseEntry& entry, std::optional<Seconds> ts) const;
  /// Called with the case lock held.
  void publish(CaseEntry& entry, const std::vector<Output>& outputs);
  void count(const std::vector<Output>& outputs);

  EngineOptions options_;
  mutable std::shared_mutex registryMutex_;
  std::shared_ptr<const CompiledModel> model_;
  std::map<std::string, std::shared_ptr<CaseEntry>> cases_;
  std::uint64_t nextCase_ = 1;

  std::unique_ptr<ActionDispatcher> dispatcher_;

  std::thread ticker_;
  std::mutex tickerMutex_;
  std::condition_variable tickerCv_;
  bool tickerStop_ = false;

  struct Counters {
    std::atomic<std::uint64_t> signals{0};
    std::atomic<std::uint64_t> tasks{0};
    std::atomic<std::uint64_t> accepted{0};
    std::atomic<std::uint64_t> rejected{0};
    std::atomic<std::uint64_t> stale{0};
    std::atomic<std::uint64_t> errors{0};
    std::atomic<std::uint64_t> statusEvents[5]{};
    std::atomic<std::uint64_t> transitions{0};
    std::atomic<std::uint64_t> actions{0};
  };
  mutable Counters counters_;
  LatencyWindow latency_;
};

}  // namespace hcep
