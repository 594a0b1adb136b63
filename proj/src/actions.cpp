#include "hybridcep/actions.hpp"

#include <cstdlib>

#include <httplib.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace hcep {

void init_logging() {
  static std::once_flag once;
  std::call_once(once, [] {
    auto logger = spdlog::stderr_color_mt("engine");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("%Y-%m-%dT%H:%M:%S.%e %^%l%$ %v");
    const char* env = std::getenv("ENGINE_LOG");
    spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
  });
}

namespace {

struct UrlParts {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

std::optional<UrlParts> split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) return std::nullopt;
  const auto pathStart = url.find('/', scheme + 3);
  UrlParts parts;
  parts.origin = url.substr(0, pathStart);
  parts.path = pathStart == std::string::npos ? "/" : url.substr(pathStart);
  return parts;
}

}  // namespace

ActionDispatcher::ActionDispatcher() : ActionDispatcher(Options{}) {}

ActionDispatcher::ActionDispatcher(Options options)
    : options_(options), worker_([this] { run(); }) {}

ActionDispatcher::~ActionDispatcher() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  wake_.notify_all();
  worker_.join();
}

void ActionDispatcher::submit(const ActionRef& action, Json record) {
  {
    std::lock_guard lock(mutex_);
    ++stats_.submitted;
    if (queue_.size() >= options_.queueLimit) {
      ++stats_.dropped;
      spdlog::warn("action queue full, dropping {} action for {}", to_string(action.kind), action.target);
      return;
    }
    queue_.push_back({action, std::move(record)});
  }
  wake_.notify_one();
}

void ActionDispatcher::flush() {
  std::unique_lock lock(mutex_);
  idle_.wait(lock, [this] { return queue_.empty() && !busy_; });
}

DispatchStats ActionDispatcher::stats() const {
  std::lock_guard lock(mutex_);
  return stats_;
}

DispatchReceipt ActionDispatcher::deliver(const ActionRef& action, const Json& record,
                                          const Options& options) {
  DispatchReceipt receipt;
  switch (action.kind) {
    case ActionKind::Log:
      spdlog::info("action log target={} record={}", action.target, record.dump());
      receipt.ok = true;
      receipt.attempts = 1;
      return receipt;
    case ActionKind::AutoTask:
      receipt.ok = true;
      receipt.attempts = 1;
      return receipt;
    case ActionKind::Webhook: break;
  }

  const auto url = split_url(action.target);
  if (!url) {
    receipt.error = "invalid URL";
    return receipt;
  }
  Json body = record;
  if (!action.payloadTemplate.empty()) body["actionPayload"] = to_json(action.payloadTemplate);
  const std::string text = body.dump();
  for (int attempt = 1; attempt <= options.maxAttempts; ++attempt) {
    receipt.attempts = attempt;
    httplib::Client client(url->origin);
    if (!client.is_valid()) {
      receipt.error = "unsupported URL scheme";
      return receipt;
    }
    client.set_connection_timeout(options.timeout);
    client.set_read_timeout(options.timeout);
    auto res = client.Post(url->path, text, "application/json");
    if (res && res->status >= 200 && res->status < 300) {
      receipt.ok = true;
      receipt.error.clear();
      return receipt;
    }
    receipt.error = res ? "HTTP " + std::to_string(res->status) : httplib::to_string(res.error());
    if (attempt < options.maxAttempts) std::this_thread::sleep_for(options.backoff * attempt);
  }
  return receipt;
}

void ActionDispatcher::run() {
  std::unique_lock lock(mutex_);
  for (;;) {
    wake_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
    if (queue_.empty()) {
      if (stopping_) return;
      continue;
    }
    Job job = std::move(queue_.front());
    queue_.pop_front();
    busy_ = true;
    lock.unlock();
    const DispatchReceipt receipt = deliver(job.action, job.record, options_);
    if (!receipt.ok) {
      spdlog::warn("action {} to {} failed after {} attempt(s): {}", to_string(job.action.kind),
                   job.action.target, receipt.attempts, receipt.error);
    }
    lock.lock();
    busy_ = false;
    if (receipt.ok) {
      ++stats_.delivered;
    } else {
      ++stats_.failed;
    }
    if (queue_.empty()) idle_.notify_all();
  }
}

}  // namespace hcep
