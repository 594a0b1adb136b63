#include "hybridcep/bench.hpp"

#include <sys/resource.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "hybridcep/errors.hpp"
#include "hybridcep/service.hpp"

namespace hcep::bench {

namespace {

using Clock = std::chrono::steady_clock;

constexpr double kThreshold = 80.0;
constexpr double kSignalPeriod = 20.0;  // seconds of event time
constexpr int kUsers = 5;

int variable_count(int constraints) { return std::max(1, (constraints + 1) / 2); }
int task_count(int constraints) { return std::max(2, (constraints + 1) / 2); }

std::string var_name(int i) { return "x" + std::to_string(i); }
std::string task_name(int i) { return "T" + std::to_string(i); }

Condition cond(const std::string& text, Seconds sustained = 0.0) { return Condition{parse_predicate(text), sustained}; }

/// Resident and peak resident set sizes in MB, from /proc/self/status.
std::pair<double, double> memory_mb() {
  std::ifstream in("/proc/self/status");
  std::string line;
  double rss = 0;
  double hwm = 0;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    double kb = 0;
    ls >> key >> kb;
    if (key == "VmRSS:") rss = kb / 1024.0;
    if (key == "VmHWM:") hwm = kb / 1024.0;
  }
  return {rss, hwm};
}

double cpu_seconds() {
  rusage ru{};
  getrusage(RUSAGE_SELF, &ru);
  auto secs = [](const timeval& tv) { return static_cast<double>(tv.tv_sec) + tv.tv_usec / 1e6; };
  return secs(ru.ru_utime) + secs(ru.ru_stime);
}

struct Queued {
  const WorkItem* item;
  Clock::time_point enqueued;
};

RunReport run_once(const BenchConfig& cfg, const std::vector<WorkItem>& work,
                   const std::shared_ptr<const CompiledModel>& model) {
  EngineOptions options;
  options.enforcement = cfg.enforcement;
  options.dispatchActions = false;
  Engine engine(options);
  engine.load_model(model);
  std::vector<std::string> cases;
  for (int c = 0; c < cfg.caseCount; ++c) cases.push_back(engine.create_case("bench-" + std::to_string(c)));

  const int variables = variable_count(cfg.constraintCount);
  std::vector<std::string> vars;
  for (int i = 0; i < variables; ++i) vars.push_back(var_name(i));
  std::vector<std::string> tasks;
  for (int i = 0; i < task_count(cfg.constraintCount); ++i) tasks.push_back(task_name(i));

  std::mutex mutex;
  std::condition_variable cv;
  std::deque<Queued> queue;
  bool done = false;

  std::vector<double> latencies;
  latencies.reserve(work.size());

  std::atomic<bool> sampling{true};
  double memSum = 0;
  std::uint64_t memSamples = 0;
  double memPeak = 0;
  std::thread sampler([&] {
    while (sampling) {
      const auto [rss, hwm] = memory_mb();
      memSum += rss;
      ++memSamples;
      memPeak = std::max(memPeak, hwm);
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
  });

  std::thread worker([&] {
    std::deque<Queued> batch;
    for (;;) {
      {
        std::unique_lock lock(mutex);
        cv.wait(lock, [&] { return done || !queue.empty(); });
        if (queue.empty() && done) return;
        batch.swap(queue);
      }
      for (const Queued& q : batch) {
        const WorkItem& w = *q.item;
        try {
          if (w.task) {
            Attributes payload{{"userId", static_cast<double>(w.userId)}};
            engine.attempt_task(cases[static_cast<std::size_t>(w.caseIndex)], tasks[static_cast<std::size_t>(w.name)],
                                payload, w.ts);
          } else {
            engine.ingest_signal(cases[static_cast<std::size_t>(w.caseIndex)], vars[static_cast<std::size_t>(w.name)],
                                 w.value, w.ts);
          }
          latencies.push_back(std::chrono::duration<double, std::milli>(Clock::now() - q.enqueued).count());
        } catch (const EngineError&) {
          // Counted as lost: no latency is recorded.
        }
      }
      batch.clear();
    }
  });

  const double cpuStart = cpu_seconds();
  const auto start = Clock::now();
  std::size_t next = 0;
  while (next < work.size()) {
    const auto now = Clock::now();
    const double elapsed = std::chrono::duration<double>(now - start).count();
    std::size_t due = next;
    while (due < work.size() && work[due].ts <= elapsed) ++due;
    if (due > next) {
      {
        std::lock_guard lock(mutex);
        for (; next < due; ++next) queue.push_back(Queued{&work[next], now});
      }
      cv.notify_one();
    }
    if (next < work.size()) {
      const auto wake = start + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(work[next].ts));
      std::this_thread::sleep_until(std::min(wake, Clock::now() + std::chrono::milliseconds(1)));
    }
  }
  {
    std::lock_guard lock(mutex);
    done = true;
  }
  cv.notify_one();
  worker.join();
  const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();
  const double cpu = cpu_seconds() - cpuStart;
  sampling = false;
  sampler.join();

  RunReport r;
  r.generated = work.size();
  r.processed = latencies.size();
  r.lost = r.generated - r.processed;
  r.elapsedSeconds = elapsed;
  r.achievedRate = static_cast<double>(r.processed) / std::max(cfg.durationSeconds, elapsed);
  r.latencyMs = latency_stats(std::move(latencies));
  r.peakMemoryMb = memPeak;
  r.meanMemoryMb = memSamples ? memSum / static_cast<double>(memSamples) : 0.0;
  r.cpuPercent = elapsed > 0 ? 100.0 * cpu / elapsed : 0.0;
  r.overload = r.achievedRate < 0.95 * cfg.targetRate;
  return r;
}

std::pair<double, double> mean_stddev(const std::vector<double>& v) {
  if (v.empty()) return {0, 0};
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0};
}

}  // namespace

void validate(const BenchConfig& cfg) {
  if (!(cfg.targetRate > 0) || !std::isfinite(cfg.targetRate)) throw ConfigError("rate must be positive");
  if (!(cfg.durationSeconds > 0) || !std::isfinite(cfg.durationSeconds)) throw ConfigError("duration must be positive");
  if (cfg.constraintCount <= 0) throw ConfigError("constraint count must be positive");
  if (cfg.caseCount <= 0) throw ConfigError("case count must be positive");
  if (cfg.runs <= 0) throw ConfigError("run count must be positive");
  if (!(cfg.signalFraction >= 0 && cfg.signalFraction <= 1)) throw ConfigError("signal fraction must be in [0, 1]");
  if (!(cfg.dutyCycle >= 0 && cfg.dutyCycle <= 1)) throw ConfigError("duty cycle must be in [0, 1]");
}

ProcessModel make_model(int constraintCount) {
  ProcessModel m;
  m.enforcement = EnforcementMode::Prevent;
  for (int i = 0; i < variable_count(constraintCount); ++i) {
    m.variables.push_back(VariableDecl{var_name(i), VariableKind::Continuous, "C"});
  }
  const int tasks = task_count(constraintCount);
  for (int i = 0; i < tasks; ++i) m.tasks.push_back(TaskDecl{task_name(i), {"userId"}});

  const std::string hi = " > " + format_number(kThreshold);
  for (int i = 0; i < constraintCount; ++i) {
    const std::string x = var_name((i / 2) % variable_count(constraintCount));
    const std::string t = task_name(i % tasks);
    const std::string u = task_name((i + 1) % tasks);
    ConstraintSpec c;
    c.id = "c" + std::to_string(i);
    switch (i % 6) {
      case 0:  // signal activation, task response
        c.templ = Template::Response;
        c.activation = cond(x + hi, 2.0);
        c.target = cond("dis(" + t + ")");
        c.responseWindow = 5.0;
        break;
      case 1:  // sustained excursion forbidden
        c.templ = Template::NotExistence;
        c.target = cond(x + " > " + format_number(kThreshold + 15), 3.0);
        break;
      case 2:  // task guarded by a signal condition
        c.templ = Template::Precedence;
        c.activation = cond(x + hi, 1.0);
        c.target = cond("dis(" + t + ")");
        c.responseWindow = 10.0;
        break;
      case 3:
        c.templ = Template::Existence;
        c.target = cond("dis(" + t + ")");
        c.scopeWindow = 30.0;
        break;
      case 4:  // task must not be followed by a signal excursion
        c.templ = Template::NotResponse;
        c.activation = cond("dis(" + t + ")");
        c.target = cond(x + " > " + format_number(kThreshold + 15), 1.0);
        c.responseWindow = 2.0;
        break;
      default:  // correlated task pair
        c.templ = Template::Response;
        c.activation = cond("dis(" + t + ")");
        c.target = cond("dis(" + u + ")");
        c.correlation = parse_correlation("activation.payload.userId == target.payload.userId");
        c.responseWindow = 8.0;
        break;
    }
    m.constraints.push_back(std::move(c));
  }
  return m;
}

std::vector<WorkItem> generate_workload(const BenchConfig& cfg) {
  validate(cfg);
  const auto count = static_cast<std::size_t>(std::llround(cfg.targetRate * cfg.durationSeconds));
  const int variables = variable_count(cfg.constraintCount);
  const int tasks = task_count(cfg.constraintCount);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.5);

  std::vector<double> phase(static_cast<std::size_t>(cfg.caseCount));
  for (double& p : phase) p = unit(rng) * kSignalPeriod;

  std::vector<WorkItem> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    WorkItem w;
    w.ts = static_cast<double>(i) / cfg.targetRate;
    w.caseIndex = static_cast<int>(i % static_cast<std::size_t>(cfg.caseCount));
    w.task = unit(rng) >= cfg.signalFraction;
    if (w.task) {
      w.name = static_cast<int>(rng() % static_cast<std::uint64_t>(tasks));
      w.userId = 1 + static_cast<int>(rng() % kUsers);
    } else {
      w.name = static_cast<int>(rng() % static_cast<std::uint64_t>(variables));
      const double pos = std::fmod(w.ts + phase[static_cast<std::size_t>(w.caseIndex)], kSignalPeriod);
      const bool high = pos < cfg.dutyCycle * kSignalPeriod;
      // High phases sit above the activation threshold and occasionally
      // cross the excursion threshold as well.
      w.value = (high ? kThreshold + 10.0 : kThreshold - 10.0) + noise(rng) * (high ? 3.0 : 1.0);
    }
    out.push_back(w);
  }
  return out;
}

LatencyStats latency_stats(std::vector<double> samples) {
  LatencyStats s;
  if (samples.empty()) return s;
  std::sort(samples.begin(), samples.end());
  s.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
  s.p50 = nearest_rank(samples, 50);
  s.p90 = nearest_rank(samples, 90);
  s.p99 = nearest_rank(samples, 99);
  s.max = samples.back();
  return s;
}

BenchReport run_bench(const BenchConfig& cfg) {
  validate(cfg);
  BenchReport report;
  report.config = cfg;
  const auto model = compile_model(make_model(cfg.constraintCount));
  const std::vector<WorkItem> work = generate_workload(cfg);
  for (int run = 0; run < cfg.runs; ++run) report.runs.push_back(run_once(cfg, work, model));
  return report;
}

Json to_json(const BenchReport& report) {
  const BenchConfig& c = report.config;
  Json runs = Json::array();
  std::vector<double> rate, mean, p50, p90, p99, mem, cpu;
  for (const RunReport& r : report.runs) {
    runs.push_back({{"generated", r.generated},
                    {"processed", r.processed},
                    {"lost", r.lost},
                    {"elapsedSeconds", r.elapsedSeconds},
                    {"achievedRate", r.achievedRate},
                    {"latencyMs",
                     {{"mean", r.latencyMs.mean},
                      {"p50", r.latencyMs.p50},
                      {"p90", r.latencyMs.p90},
                      {"p99", r.latencyMs.p99},
                      {"max", r.latencyMs.max}}},
                    {"peakMemoryMb", r.peakMemoryMb},
                    {"meanMemoryMb", r.meanMemoryMb},
                    {"cpuPercent", r.cpuPercent},
                    {"overload", r.overload}});
    rate.push_back(r.achievedRate);
    mean.push_back(r.latencyMs.mean);
    p50.push_back(r.latencyMs.p50);
    p90.push_back(r.latencyMs.p90);
    p99.push_back(r.latencyMs.p99);
    mem.push_back(r.peakMemoryMb);
    cpu.push_back(r.cpuPercent);
  }
  auto agg = [](const std::vector<double>& v) {
    const auto [m, s] = mean_stddev(v);
    return Json{{"mean", m}, {"stddev", s}};
  };
  return Json{{"config",
               {{"rate", c.targetRate},
                {"durationSeconds", c.durationSeconds},
                {"constraints", c.constraintCount},
                {"cases", c.caseCount},
                {"runs", c.runs},
                {"signalFraction", c.signalFraction},
                {"dutyCycle", c.dutyCycle},
                {"seed", c.seed},
                {"enforcement", to_string(c.enforcement)}}},
              {"runs", runs},
              {"aggregate",
               {{"achievedRate", agg(rate)},
                {"latencyMeanMs", agg(mean)},
                {"latencyP50Ms", agg(p50)},
                {"latencyP90Ms", agg(p90)},
                {"latencyP99Ms", agg(p99)},
                {"peakMemoryMb", agg(mem)},
                {"cpuPercent", agg(cpu)}}}};
}

void write_table(const BenchReport& report, std::ostream& out) {
  const auto flags = out.flags();
  out << std::fixed << std::setprecision(2);
  out << std::left << std::setw(8) << "run" << std::right << std::setw(12) << "rate" << std::setw(14) << "throughput"
      << std::setw(12) << "mean ms" << std::setw(10) << "P50 ms" << std::setw(10) << "P90 ms" << std::setw(10)
      << "P99 ms" << std::setw(10) << "lost" << std::setw(10) << "CPU %" << std::setw(12) << "peak MB" << '\n';
  std::vector<double> rate, mean, p50, p90, p99, cpu, mem, lost;
  for (std::size_t i = 0; i < report.runs.size(); ++i) {
    const RunReport& r = report.runs[i];
    out << std::left << std::setw(8) << (i + 1) << std::right << std::setw(12) << report.config.targetRate
        << std::setw(14) << r.achievedRate << std::setw(12) << r.latencyMs.mean << std::setw(10) << r.latencyMs.p50
        << std::setw(10) << r.latencyMs.p90 << std::setw(10) << r.latencyMs.p99 << std::setw(10) << r.lost
        << std::setw(10) << r.cpuPercent << std::setw(12) << r.peakMemoryMb << (r.overload ? "  overload" : "")
        << '\n';
    rate.push_back(r.achievedRate);
    mean.push_back(r.latencyMs.mean);
    p50.push_back(r.latencyMs.p50);
    p90.push_back(r.latencyMs.p90);
    p99.push_back(r.latencyMs.p99);
    cpu.push_back(r.cpuPercent);
    mem.push_back(r.peakMemoryMb);
    lost.push_back(static_cast<double>(r.lost));
  }
  if (report.runs.size() > 1) {
    auto cell = [&](const std::vector<double>& v, int width) {
      const auto [m, s] = mean_stddev(v);
      std::ostringstream os;
      os << std::fixed << std::setprecision(2) << m << "±" << s;
      // The ± sign is two bytes in UTF-8 but one column wide.
      out << std::setw(width + 1) << os.str();
    };
    out << std::left << std::setw(8) << "mean" << std::right << std::setw(12) << report.config.targetRate;
    cell(rate, 14);
    cell(mean, 12);
    cell(p50, 10);
    cell(p90, 10);
    cell(p99, 10);
    cell(lost, 10);
    cell(cpu, 10);
    cell(mem, 12);
    out << '\n';
  }
  out.flags(flags);
}

}  // namespace hcep::bench
