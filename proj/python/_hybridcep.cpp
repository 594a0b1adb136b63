// Thin binding over the engine. Documents cross the boundary as JSON text;
// the Python package decodes them.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "hybridcep/bench.hpp"
#include "hybridcep/case_processor.hpp"
#include "hybridcep/errors.hpp"
#include "hybridcep/oracle.hpp"
#include "hybridcep/replay.hpp"

namespace py = pybind11;
using namespace hcep;

namespace {

std::optional<EnforcementMode> enforcement_arg(const std::optional<std::string>& s) {
  if (!s) return std::nullopt;
  auto mode = parse_enforcement(*s);
  if (!mode) throw ConfigError("unknown enforcement mode '" + *s + "'");
  return mode;
}

std::string outputs_json(const CompiledModel& model, const std::string& caseId, const std::vector<Output>& outs) {
  Json arr = Json::array();
  for (const Output& o : outs) arr.push_back(to_json(model, caseId, o));
  return arr.dump();
}

class PyCase {
 public:
  PyCase(std::shared_ptr<const CompiledModel> model, const std::string& caseId,
         const std::optional<std::string>& enforcement)
      : proc_(model, caseId, enforcement_arg(enforcement).value_or(model->model.enforcement)) {
    proc_.open();
  }

  std::string signal(const std::string& sensor, double value, double ts) {
    return dump(proc_.ingest_signal(sensor, value, ts));
  }

  std::string task(const std::string& activity, const std::string& payloadJson, double ts) {
    const TaskOutcome t = proc_.attempt_task(activity, attributes_from_json(Json::parse(payloadJson)), ts);
    Json reasons = Json::array();
    for (const auto& r : t.reasons) reasons.push_back({{"constraintId", r.constraintId}, {"reason", r.reason}});
    return Json{{"accepted", t.accepted},
                {"eventId", t.eventId},
                {"reasons", reasons},
                {"outputs", Json::parse(dump(t.outputs))}}
        .dump();
  }

  std::string watermark(double t) { return dump(proc_.advance_watermark(t)); }
  std::string close(double ts) { return dump(proc_.close(ts)); }
  std::string status() const { return proc_.snapshot().dump(); }
  std::string summary() const { return proc_.summary().dump(); }
  bool finishable() const { return proc_.finishable(); }

 private:
  std::string dump(const std::vector<Output>& outs) const { return outputs_json(proc_.model(), proc_.case_id(), outs); }

  CaseProcessor proc_;
};

std::vector<InputRecord> records_from(const CompiledModel& model, const std::string& ndjson) {
  std::istringstream in(ndjson);
  return parse_trace(in, model);
}

}  // namespace

PYBIND11_MODULE(_hybridcep, m) {
  m.doc() = "Hybrid declarative process execution engine";

  py::register_exception<EngineError>(m, "EngineError", PyExc_ValueError);

  py::class_<CompiledModel, std::shared_ptr<CompiledModel>>(m, "Model")
      .def_property_readonly("constraint_ids",
                             [](const CompiledModel& c) {
                               std::vector<std::string> ids;
                               for (const auto& x : c.constraints) ids.push_back(x.spec.id);
                               return ids;
                             })
      .def_property_readonly("enforcement", [](const CompiledModel& c) { return to_string(c.model.enforcement); })
      .def("to_json", [](const CompiledModel& c) { return serialize_model(c.model); });

  m.def("compile", [](const std::string& text) {
    return std::const_pointer_cast<CompiledModel>(compile_model(parse_model(text)));
  }, py::arg("text"), "Parses, validates and compiles a model document.");

  py::class_<PyCase>(m, "Case")
      .def(py::init([](std::shared_ptr<CompiledModel> model, const std::string& caseId,
                       const std::optional<std::string>& enforcement) {
             return std::make_unique<PyCase>(std::move(model), caseId, enforcement);
           }),
           py::arg("model"), py::arg("case_id") = "c", py::arg("enforcement") = py::none())
      .def("signal", &PyCase::signal)
      .def("task", &PyCase::task)
      .def("watermark", &PyCase::watermark)
      .def("close", &PyCase::close)
      .def("status", &PyCase::status)
      .def("summary", &PyCase::summary)
      .def_property_readonly("finishable", &PyCase::finishable);

  m.def("replay", [](std::shared_ptr<CompiledModel> model, const std::string& ndjson, int parallelism,
                     const std::optional<std::string>& enforcement, bool closeAtEnd) {
    ReplayOptions o;
    o.parallelism = parallelism;
    o.enforcement = enforcement_arg(enforcement);
    o.closeAtEnd = closeAtEnd;
    const auto records = records_from(*model, ndjson);
    ReplayResult result;
    {
      py::gil_scoped_release release;
      result = run_replay(model, records, o);
    }
    std::ostringstream out;
    write_log(result, out);
    return out.str();
  }, py::arg("model"), py::arg("ndjson"), py::arg("parallelism") = 1, py::arg("enforcement") = py::none(),
     py::arg("close_at_end") = false);

  m.def("check", [](std::shared_ptr<CompiledModel> model, const std::string& ndjson) {
    Json out = Json::array();
    for (const auto& trace : oracle::traces_from_records(records_from(*model, ndjson))) {
      Json verdicts = Json::array();
      for (const auto& v : oracle::evaluate_all(*model, trace)) verdicts.push_back(oracle::to_json(v));
      out.push_back({{"caseId", trace.caseId}, {"verdicts", verdicts}});
    }
    return out.dump();
  }, py::arg("model"), py::arg("ndjson"));

  m.def("bench", [](double rate, double duration, int constraints, int cases, int runs, std::uint64_t seed) {
    bench::BenchConfig cfg;
    cfg.targetRate = rate;
    cfg.durationSeconds = duration;
    cfg.constraintCount = constraints;
    cfg.caseCount = cases;
    cfg.runs = runs;
    cfg.seed = seed;
    bench::validate(cfg);
    bench::BenchReport report;
    {
      py::gil_scoped_release release;
      report = bench::run_bench(cfg);
    }
    return bench::to_json(report).dump();
  }, py::arg("rate") = 1000.0, py::arg("duration") = 60.0, py::arg("constraints") = 10, py::arg("cases") = 100,
     py::arg("runs") = 1, py::arg("seed") = 42);
}
