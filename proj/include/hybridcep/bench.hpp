#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "hybridcep/model.hpp"

namespace hcep::bench {

struct BenchConfig {
  double targetRate = 1000.0;  // events per second
  double durationSeconds = 60.0;
  int constraintCount = 10;
  int caseCount = 100;
  int runs = 1;
  double signalFraction = 0.8;  // remainder are task events
  /// Fraction of each signal period spent above the detector thresholds.
  double dutyCycle = 0.3;
  std::uint64_t seed = 42;
  EnforcementMode enforcement = EnforcementMode::Prevent;
};

/// Throws ConfigError for non-positive sizes or fractions outside [0, 1].
void validate(const BenchConfig& cfg);

/// A model over continuous variables x0..xK and tasks T0..TK whose
/// constraints cycle through all templates.
ProcessModel make_model(int constraintCount);

struct WorkItem {
  Seconds ts = 0.0;  // event time; also the scheduled send offset
  int caseIndex = 0;
  bool task = false;
  int name = 0;  // variable or task index
  double value = 0.0;
  int userId = 0;
};

/// round(rate * duration) items, evenly spaced, round robin over cases.
std::vector<WorkItem> generate_workload(const BenchConfig& cfg);

struct LatencyStats {
  double mean = 0, p50 = 0, p90 = 0, p99 = 0, max = 0;
};

/// Nearest-rank statistics over an unsorted sample.
LatencyStats latency_stats(std::vector<double> samples);

struct RunReport {
  std::uint64_t generated = 0;
  std::uint64_t processed = 0;
  std::uint64_t lost = 0;  // generated but not processed, or failed
  double elapsedSeconds = 0;
  double achievedRate = 0;
  LatencyStats latencyMs;
  double peakMemoryMb = 0;
  double meanMemoryMb = 0;
  double cpuPercent = 0;
  bool overload = false;  // achieved < 95% of target
};

struct BenchReport {
  BenchConfig config;
  std::vector<RunReport> runs;
};

BenchReport run_bench(const BenchConfig& cfg);

Json to_json(const BenchReport& report);
/// Table with one row per run and a mean ± stddev row.
void write_table(const BenchReport& report, std::ostream& out);

}  // namespace hcep::bench
