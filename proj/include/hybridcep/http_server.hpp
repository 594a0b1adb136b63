#pragma once

#include <memory>
#include <string>

#include "hybridcep/service.hpp"

namespace hcep {

/// HTTP/SSE surface over an Engine:
///
///   POST /models                 load a model (body: model document)
///   GET  /models/compiled        compiled detectors and patterns
///   POST /cases                  create a case ({"caseId"?}) -> {"caseId"}
///   GET  /cases                  list case ids
///   POST /cases/{id}/signals     {"sensorId","value","ts"?}
///   POST /cases/{id}/tasks       {"activity","payload"?,"ts"?,"eventId"?} -> 200 | 409
///   GET  /cases/{id}/status      status document
///   GET  /cases/{id}/tasks       enabled-task list
///   POST /cases/{id}/close       {"ts"?}
///   GET  /cases/{id}/events      server-sent events (snapshot, then records)
///   GET  /metrics                counters and latency percentiles
class HttpServer {
 public:
  explicit HttpServer(Engine& engine);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds; port 0 picks a free port. Returns the bound port or -1.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  bool run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Splits "host:port" or ":port" (host defaults to 0.0.0.0).
std::pair<std::string, int> parse_listen_address(const std::string& text);

}  // namespace hcep
