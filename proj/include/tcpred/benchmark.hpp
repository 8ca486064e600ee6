#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tcpred/backend.hpp"
#include "tcpred/setup_list.hpp"

namespace tcpred {

struct TimingResult {
  std::vector<std::uint64_t> samples_ns;  // 10 repetitions
  std::uint64_t median_ns = 0;            // lower median (5th of the sorted 10)
  std::string backend;
  std::string variant;
  bool timer_warning = false;  // resolution worse than 1% of the median
  std::uint64_t timer_resolution_ns = 0;
};

enum class BenchPhase { setup_begin, setup_end, timer_start, kernel_done, timer_stop };
using BenchObserver = std::function<void(int rep, BenchPhase)>;

struct MicroBenchmark {
  const Algorithm* algo = nullptr;
  const ExecPlan* plan = nullptr;
  MachineConfig machine;
  KernelBackend* backend = nullptr;
  std::uint64_t seed = 1;
  std::uint64_t max_bytes = 2ull << 30;
};

/// Setup replay followed by one timed kernel invocation, repeated ten times.
/// Loop indices are pinned to mid-extent values; operand buffers are fresh
/// per call, page-aligned, seeded; the remote buffer holds twice the cache
/// capacity and is read at line stride through a rotating cursor.
TimingResult run_micro_benchmark(const MicroBenchmark& mb, int kernel_id, const SetupList& sl,
                                 const std::string& variant_label,
                                 const BenchObserver& obs = {});

/// 2 x product of every index extent.
std::uint64_t flops_of(const Contraction& c, const SizeModel& s);

/// Checksum accumulated by setup reads; published so the reads cannot be
/// optimized away.
double benchmark_checksum();

std::uint64_t kernel_flop_count(const ExecPlan& p, int kernel_id);

}  // namespace tcpred
