#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tcpred/benchmark.hpp"
#include "tcpred/generator.hpp"

namespace tcpred {

struct VariantTiming {
  int kernel = -1;
  std::string label;  // "steady", "copy[1]:steady", ...
  std::uint64_t weight = 0;
  std::uint64_t median_ns = 0;
  SetupList setup;
};

struct Prediction {
  std::string algorithm;
  KernelKind kernel = KernelKind::dot;
  Stage stage = Stage::first_iter;
  std::uint64_t invocations = 0;
  std::uint64_t flops = 0;
  std::uint64_t total_ns = 0;  // sum of weight x median over all variants
  double flops_per_cycle = 0.0;
  std::uint64_t benchmark_ns = 0;  // sum of the timed kernel medians
  std::vector<VariantTiming> variants;
};

struct PredictorOptions {
  Stage stage = Stage::first_iter;
  double threshold = 0.01;
  bool cold_root = false;
  std::uint64_t seed = 1;
  std::uint64_t max_bytes = 2ull << 30;
};

Prediction predict(const Algorithm& a, const SizeModel& s, const MachineConfig& m,
                   KernelBackend& backend, const PredictorOptions& opt = {});

/// Predictions for every algorithm, ascending by total time, ties broken by
/// name; `wall_ns` reports the cost of producing the whole ranking.
struct Ranking {
  std::vector<Prediction> predictions;
  std::uint64_t wall_ns = 0;
};

Ranking rank(const Contraction& c, const SizeModel& s, const MachineConfig& m,
             KernelBackend& backend, const PredictorOptions& opt = {},
             const GenerateOptions& gen = {});

/// `a=b=c=8:1024:*2,i=8`: comma-separated segments, each `names=spec` with
/// spec one of INT, `lo:hi:*F`, `lo:hi:+D`, or `v1;v2;v3`.  Multiple ranged
/// segments expand as a cartesian product, first segment outermost.
std::vector<SizeModel> parse_size_grid(const std::string& text,
                                       std::uint64_t element_bytes = 8);

/// CSV: algorithm,kernel,<indices...>,time_ns,flops_per_cycle,stage,note
/// (one row per algorithm and grid point; per-point failures land in `note`).
std::string sweep_csv(const Contraction& c, const std::vector<SizeModel>& grid,
                      const MachineConfig& m, KernelBackend& backend,
                      const PredictorOptions& opt = {}, const GenerateOptions& gen = {});

struct EfficiencyRow {
  std::string algorithm;
  KernelKind kernel = KernelKind::dot;
  std::uint64_t execution_ns = 0;
  std::uint64_t benchmark_ns = 0;
  double ratio = 0.0;
  std::string note;
};

/// time(execution) / time(benchmark) per algorithm.  Execution runs the full
/// algorithm (opt-in; bounded by `budget_ns` per algorithm); the benchmark
/// time is the sum of the timed kernel medians across variants.  On the
/// synthetic backend the prediction itself stands in for the execution.
std::vector<EfficiencyRow> efficiency_report(const Contraction& c, const SizeModel& s,
                                             const MachineConfig& m, KernelBackend& backend,
                                             bool execute_allowed, std::uint64_t budget_ns,
                                             const PredictorOptions& opt = {},
                                             const GenerateOptions& gen = {});

}  // namespace tcpred
