#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <string>
#include <thread>

#include "hybridcep/model.hpp"

namespace hcep {

/// Configures the process-wide logger from ENGINE_LOG
/// (trace|debug|info|warn|error|off; default warn).
void init_logging();

struct DispatchReceipt {
  bool ok = false;
  int attempts = 0;
  std::string error;
};

struct DispatchStats {
  std::uint64_t submitted = 0;
  std::uint64_t delivered = 0;
  std::uint64_t failed = 0;
  std::uint64_t dropped = 0;  // queue full
};

/// Executes webhook and log actions off the processing path. autoTask
/// actions are handled by the case processor and only acknowledged here.
class ActionDispatcher {
 public:
  struct Options {
    int maxAttempts = 3;
    std::chrono::milliseconds backoff{100};
    std::chrono::milliseconds timeout{2000};
    std::size_t queueLimit = 10000;
  };

  ActionDispatcher();
  explicit ActionDispatcher(Options options);
  ~ActionDispatcher();

  ActionDispatcher(const ActionDispatcher&) = delete;
  ActionDispatcher& operator=(const ActionDispatcher&) = delete;

  /// `record` is the transition record posted to webhooks.
  void submit(const ActionRef& action, Json record);

  /// Blocks until every submitted action has been attempted.
  void flush();

  DispatchStats stats() const;

  /// Synchronous delivery used by the worker thread.
  static DispatchReceipt deliver(const ActionRef& action, const Json& record, const Options& options);

 private:
  struct Job {
    ActionRef action;
    Json record;
  };

  void run();

  Options options_;
  mutable std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable idle_;
  std::deque<Job> queue_;
  bool busy_ = false;
  bool stopping_ = false;
  DispatchStats stats_;
  std::thread worker_;
};

}  // namespace hcep
