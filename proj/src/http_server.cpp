#include "hybridcep/http_server.hpp"

#include <atomic>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "hybridcep/errors.hpp"

namespace hcep {

namespace {

void reply(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& message) {
  reply(res, status, Json{{"error", message}});
}

Json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  return Json::parse(req.body);
}

std::optional<Seconds> optional_ts(const Json& body) {
  if (body.contains("ts") && body["ts"].is_number()) return body["ts"].get<double>();
  return std::nullopt;
}

Json outputs_json(const Engine& engine, const std::string& caseId, const std::vector<Output>& outputs) {
  Json arr = Json::array();
  auto model = engine.model();
  for (const Output& o : outputs) arr.push_back(to_json(*model, caseId, o));
  return arr;
}

/// Maps engine exceptions to HTTP statuses.
template <class Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const UnknownCase& e) {
    reply_error(res, 404, e.what());
  } catch (const StaleSample& e) {
    reply_error(res, 422, e.what());
  } catch (const Json::exception& e) {
    reply_error(res, 400, std::string("invalid JSON: ") + e.what());
  } catch (const EngineError& e) {
    reply_error(res, 400, e.what());
  }
}

}  // namespace

std::pair<std::string, int> parse_listen_address(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos) return {"0.0.0.0", std::stoi(text)};
  std::string host = text.substr(0, colon);
  if (host.empty()) host = "0.0.0.0";
  return {host, std::stoi(text.substr(colon + 1))};
}

struct HttpServer::Impl {
  explicit Impl(Engine& e) : engine(e) {}
  Engine& engine;
  httplib::Server server;
  std::atomic<bool> stopping{false};
};

HttpServer::HttpServer(Engine& engine) : impl_(std::make_unique<Impl>(engine)) {
  Engine& eng = engine;
  httplib::Server& svr = impl_->server;
  Impl* impl = impl_.get();

  svr.Post("/models", [&eng](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto model = compile_model(parse_model(req.body));
      const std::size_t n = model->constraints.size();
      eng.load_model(std::move(model));
      reply(res, 200, Json{{"constraints", n}});
    });
  });

  svr.Get("/models/compiled", [&eng](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, eng.compiled_model()); });
  });

  svr.Post("/cases", [&eng](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const Json body = parse_body(req);
      const std::string id = eng.create_case(body.value("caseId", std::string()));
      reply(res, 201, Json{{"caseId", id}});
    });
  });

  svr.Get("/cases", [&eng](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, Json{{"cases", eng.case_ids()}});
  });

  svr.Post(R"(/cases/([^/]+)/signals)", [&eng](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string caseId = req.matches[1];
      const Json body = parse_body(req);
      if (!body.contains("sensorId") || !body.contains("value") || !body["value"].is_number()) {
        throw EngineError("signal requires 'sensorId' and numeric 'value'");
      }
      auto out = eng.ingest_signal(caseId, body["sensorId"].get<std::string>(), body["value"].get<double>(),
                                   optional_ts(body));
      reply(res, 200, Json{{"outputs", outputs_json(eng, caseId, out)}});
    });
  });

  svr.Post(R"(/cases/([^/]+)/tasks)", [&eng](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string caseId = req.matches[1];
      const Json body = parse_body(req);
      if (!body.contains("activity") || !body["activity"].is_string()) {
        throw EngineError("task requires 'activity'");
      }
      const Attributes payload = attributes_from_json(body.value("payload", Json::object()));
      TaskOutcome outcome = eng.attempt_task(caseId, body["activity"].get<std::string>(), payload,
                                             optional_ts(body), body.value("eventId", std::string()));
      Json reasons = Json::array();
      for (const auto& r : outcome.reasons) reasons.push_back({{"constraintId", r.constraintId}, {"reason", r.reason}});
      reply(res, outcome.accepted ? 200 : 409,
            Json{{"accepted", outcome.accepted},
                 {"eventId", outcome.eventId},
                 {"reasons", reasons},
                 {"outputs", outputs_json(eng, caseId, outcome.outputs)}});
    });
  });

  svr.Get(R"(/cases/([^/]+)/status)", [&eng](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, eng.status(req.matches[1])); });
  });

  svr.Get(R"(/cases/([^/]+)/tasks)", [&eng](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, eng.tasks(req.matches[1])); });
  });

  svr.Post(R"(/cases/([^/]+)/close)", [&eng](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string caseId = req.matches[1];
      const Json body = parse_body(req);
      auto out = eng.close_case(caseId, optional_ts(body));
      Json status = eng.status(caseId);
      reply(res, 200, Json{{"finishable", status["finishable"]}, {"outputs", outputs_json(eng, caseId, out)}});
    });
  });

  svr.Get(R"(/cases/([^/]+)/events)", [&eng, impl](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto channel = eng.subscribe(req.matches[1]);
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider(
          "text/event-stream",
          [channel, impl](std::size_t, httplib::DataSink& sink) {
            if (impl->stopping) return false;
            auto items = channel->pop_all(std::chrono::milliseconds(500));
            if (items.empty()) {
              static const std::string ping = ": ping\n\n";
              return sink.write(ping.data(), ping.size());
            }
            for (const auto& text : items) {
              if (!sink.write(text.data(), text.size())) return false;
            }
            return true;
          },
          [channel](bool) { channel->close(); });
    });
  });

  svr.Get("/metrics", [&eng](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, eng.metrics());
  });

  svr.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      reply_error(res, 500, e.what());
    } catch (...) {
      reply_error(res, 500, "internal error");
    }
  });
  svr.set_logger([](const httplib::Request& req, const httplib::Response& res) {
    spdlog::debug("{} {} -> {}", req.method, req.path, res.status);
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpServer::run() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  impl_->stopping = true;
  impl_->server.stop();
}

}  // namespace hcep
