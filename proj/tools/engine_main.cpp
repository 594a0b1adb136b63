#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "hybridcep/actions.hpp"
#include "hybridcep/bench.hpp"
#include "hybridcep/errors.hpp"
#include "hybridcep/http_server.hpp"
#include "hybridcep/model.hpp"
#include "hybridcep/oracle.hpp"
#include "hybridcep/replay.hpp"
#include "hybridcep/service.hpp"

using namespace hcep;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::shared_ptr<const CompiledModel> load_model(const std::string& path) {
  try {
    return compile_model(parse_model(read_file(path)));
  } catch (const SyntaxError& e) {
    throw EngineError(path + ":" + std::to_string(e.line()) + ":" + std::to_string(e.column()) + ": " + e.what());
  }
}

std::optional<EnforcementMode> enforcement_flag(const std::string& text) {
  if (text.empty()) return std::nullopt;
  auto m = parse_enforcement(text);
  if (!m) throw ConfigError("--enforce must be 'prevent' or 'report'");
  return m;
}

std::vector<InputRecord> load_trace(const std::string& path, const CompiledModel& model) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  return parse_trace(in, model);
}

HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

struct RunArgs {
  std::string model, mode = "replay", input, out, enforce, dumpL2;
  bool closeAtEnd = false;
  int parallel = 1;
};

int cmd_run(const RunArgs& a) {
  if (a.mode != "replay") throw ConfigError("--mode must be 'replay' (use 'serve' for live mode)");
  const auto model = load_model(a.model);
  const auto records = load_trace(a.input, *model);
  ActionDispatcher dispatcher;
  ReplayOptions options;
  options.parallelism = a.parallel;
  options.enforcement = enforcement_flag(a.enforce);
  options.closeAtEnd = a.closeAtEnd;
  options.dumpL2 = !a.dumpL2.empty();
  options.dispatcher = &dispatcher;
  const ReplayResult result = run_replay(model, records, options);
  if (a.out.empty() || a.out == "-") {
    write_log(result, std::cout);
  } else {
    std::ofstream out(a.out, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + a.out + "'");
    write_log(result, out);
  }
  if (options.dumpL2) {
    std::ofstream out(a.dumpL2, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + a.dumpL2 + "'");
    write_l2_dump(result, out);
  }
  dispatcher.flush();
  return 0;
}

struct ServeArgs {
  std::string model, listen = ":8080", enforce;
  double lateness = 0.0;
};

int cmd_serve(const ServeArgs& a) {
  EngineOptions options;
  options.enforcement = enforcement_flag(a.enforce);
  options.latenessBound = a.lateness;
  Engine engine(options);
  if (!a.model.empty()) engine.load_model(load_model(a.model));
  HttpServer server(engine);
  const auto [host, port] = parse_listen_address(a.listen);
  const int bound = server.bind(host, port);
  if (bound < 0) throw ConfigError("cannot listen on " + a.listen);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  engine.start_ticker();
  spdlog::info("listening on {}:{}", host, bound);
  std::cerr << "listening on " << host << ":" << bound << std::endl;
  server.run();
  engine.stop_ticker();
  g_server = nullptr;
  return 0;
}

struct CheckArgs {
  std::string model, trace, format = "table";
};

int cmd_check(const CheckArgs& a) {
  const auto model = load_model(a.model);
  const auto records = load_trace(a.trace, *model);
  bool violations = false;
  Json cases = Json::array();
  std::ostringstream table;
  table << std::left << std::setw(16) << "case" << std::setw(16) << "constraint" << std::setw(22) << "outcome"
        << "witnesses\n";
  for (const auto& trace : oracle::traces_from_records(records)) {
    Json verdicts = Json::array();
    for (const auto& v : oracle::evaluate_all(*model, trace)) {
      violations = violations || v.outcome == Outcome::Violated || v.outcome == Outcome::PermanentlyViolated;
      verdicts.push_back(oracle::to_json(v));
      std::string w;
      for (const auto& x : v.witnesses) {
        if (!w.empty()) w += ", ";
        w += x.kind + " @" + format_number(x.from);
        if (x.to != x.from) w += ".." + format_number(x.to);
      }
      table << std::left << std::setw(16) << trace.caseId << std::setw(16) << v.constraintId << std::setw(22)
            << to_string(v.outcome) << w << '\n';
    }
    cases.push_back({{"caseId", trace.caseId}, {"horizon", trace.horizon}, {"verdicts", verdicts}});
  }
  if (a.format == "json") {
    std::cout << Json{{"cases", cases}, {"violations", violations}}.dump(2) << '\n';
  } else {
    std::cout << table.str();
  }
  return violations ? 1 : 0;
}

struct BenchArgs {
  bench::BenchConfig cfg;
  std::string enforce, out;
};

int cmd_bench(BenchArgs a) {
  if (auto m = enforcement_flag(a.enforce)) a.cfg.enforcement = *m;
  bench::validate(a.cfg);
  const bench::BenchReport report = bench::run_bench(a.cfg);
  bench::write_table(report, std::cout);
  if (!a.out.empty()) {
    std::ofstream out(a.out);
    if (!out) throw ConfigError("cannot write '" + a.out + "'");
    out << bench::to_json(report).dump(2) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();
  CLI::App app{"Hybrid constraint execution engine"};
  app.require_subcommand(1);

  RunArgs runArgs;
  auto* run = app.add_subcommand("run", "Replay a recorded trace and write the output log");
  run->add_option("--model", runArgs.model, "Process model (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--mode", runArgs.mode, "Execution mode")->check(CLI::IsMember({"replay"}));
  run->add_option("--input", runArgs.input, "Input trace (NDJSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", runArgs.out, "Output log (default: stdout)");
  run->add_option("--enforce", runArgs.enforce, "Override enforcement")->check(CLI::IsMember({"prevent", "report"}));
  run->add_flag("--close-at-end", runArgs.closeAtEnd, "Close open cases at their last timestamp");
  run->add_option("--parallel", runArgs.parallel, "Worker threads across cases")->check(CLI::PositiveNumber);
  run->add_option("--dump-l2", runArgs.dumpL2, "Write obligation/token changes to this file");

  ServeArgs serveArgs;
  auto* serve = app.add_subcommand("serve", "Run the live engine behind HTTP/SSE");
  serve->add_option("--model", serveArgs.model, "Process model (JSON)")->check(CLI::ExistingFile);
  serve->add_option("--listen", serveArgs.listen, "host:port or :port");
  serve->add_option("--enforce", serveArgs.enforce, "Override enforcement")->check(CLI::IsMember({"prevent", "report"}));
  serve->add_option("--lateness", serveArgs.lateness, "Watermark lag behind the case clock (seconds)")
      ->check(CLI::NonNegativeNumber);

  CheckArgs checkArgs;
  auto* check = app.add_subcommand("check", "Evaluate a complete trace offline; exit 1 on violations");
  check->add_option("--model", checkArgs.model, "Process model (JSON)")->required()->check(CLI::ExistingFile);
  check->add_option("--trace", checkArgs.trace, "Trace (NDJSON)")->required()->check(CLI::ExistingFile);
  check->add_option("--format", checkArgs.format, "Output format")->check(CLI::IsMember({"table", "json"}));

  BenchArgs benchArgs;
  auto* bench = app.add_subcommand("bench", "Drive the live engine with a generated workload");
  bench->add_option("--rate", benchArgs.cfg.targetRate, "Target events per second");
  bench->add_option("--duration", benchArgs.cfg.durationSeconds, "Seconds per run");
  bench->add_option("--constraints", benchArgs.cfg.constraintCount, "Constraints in the generated model");
  bench->add_option("--cases", benchArgs.cfg.caseCount, "Concurrent cases");
  bench->add_option("--runs", benchArgs.cfg.runs, "Consecutive runs");
  bench->add_option("--seed", benchArgs.cfg.seed, "Workload seed");
  bench->add_option("--mix", benchArgs.cfg.signalFraction, "Fraction of signal events");
  bench->add_option("--duty", benchArgs.cfg.dutyCycle, "Fraction of time signals sit above thresholds");
  bench->add_option("--enforce", benchArgs.enforce, "Enforcement mode")->check(CLI::IsMember({"prevent", "report"}));
  bench->add_option("--out", benchArgs.out, "Write the JSON report here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(runArgs);
    if (*serve) return cmd_serve(serveArgs);
    if (*check) return cmd_check(checkArgs);
    if (*bench) return cmd_bench(benchArgs);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
