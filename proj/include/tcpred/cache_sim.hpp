#pragma once

#include <cstdint>
#include <list>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "tcpred/exec.hpp"
#include "tcpred/machine.hpp"
#include "tcpred/setup_list.hpp"

namespace tcpred {

constexpr std::uint32_t kRemoteSpace = 0xFFFFFFFFu;

struct Access {
  std::uint32_t space = 0;  // tensor index, or kRemoteSpace
  std::uint64_t offset = 0;
  std::uint32_t width = 1;  // elements
};

struct Invocation {
  int kernel = -1;
  std::uint64_t ordinal = 0;               // per-kernel counter
  std::vector<std::uint64_t> coords;       // the kernel's enclosing loops, outermost first
  std::uint64_t first_access = 0;
  std::uint64_t n_accesses = 0;
};

/// Full element-level memory trace of one algorithm execution.  Kernel
/// invocations access inputs first, then the output; each operand is swept in
/// storage (column-major) order.
struct Trace {
  std::vector<Access> accesses;
  std::vector<Invocation> invocations;
  std::vector<std::vector<std::uint64_t>> by_kernel;  // invocation index per (kernel, ordinal)
};

Trace trace_algorithm(const Algorithm& a, const ExecPlan& p,
                      std::uint64_t max_accesses = 10'000'000);

/// Fully associative LRU at line granularity.
class LruSim {
 public:
  explicit LruSim(std::uint64_t capacity_lines) : cap_(capacity_lines) {}

  bool access(std::uint32_t space, std::uint64_t line);  // returns hit
  bool resident(std::uint32_t space, std::uint64_t line) const;
  std::uint64_t hits = 0, misses = 0;

 private:
  static std::uint64_t key(std::uint32_t space, std::uint64_t line) {
    return (static_cast<std::uint64_t>(space) << 40) | line;
  }
  std::uint64_t cap_;
  std::list<std::uint64_t> lru_;  // most recently used at the front
  std::unordered_map<std::uint64_t, std::list<std::uint64_t>::iterator> pos_;
};

struct SimSlotStats {
  std::uint64_t line_accesses = 0, hits = 0, misses = 0;
};

struct SimResult {
  std::uint64_t line_accesses = 0, hits = 0, misses = 0;
  /// Stack distance (distinct lines since the line's previous access) per
  /// line access; UINT64_MAX marks first accesses.  Capacity-independent.
  std::vector<std::uint64_t> stack_lines;
  std::map<std::pair<int, int>, SimSlotStats> per_slot;  // (kernel, slot)
};

SimResult simulate(const Trace& t, const ExecPlan& p, const CacheConfig& cache);

/// Raw/convention reuse distances for one operand occurrence at a given
/// invocation, measured from the trace.
struct DistanceMeasurement {
  bool found_previous = false;    // false: first access (root-case marker)
  int recurrence_level = -1;      // outermost loop level at which the
                                  // previous same-region access differs
  std::uint64_t raw_elements = 0; // distinct elements strictly between
  std::uint64_t convention_elements = 0;  // region-join counting convention
};

DistanceMeasurement measured_access_distance(const Algorithm& a, const ExecPlan& p,
                                             const Trace& t, int kernel_id, int slot,
                                             std::uint64_t ordinal);

struct TracePrefetchResult {
  bool varies = false;
  bool detected = false;  // leading line shared with, or adjacent to, the
                          // previous iteration's operand
};

/// Trace-level prefetch check over all steady innermost iterations.
TracePrefetchResult trace_prefetch_detect(const Algorithm& a, const ExecPlan& p,
                                          const CacheConfig& cache, int kernel_id, int slot);

/// Per-line hit/miss of invocation `inv_index`'s accesses after running the
/// trace prefix through an LRU of `cap_lines`; `prior_execution` feeds the
/// whole trace once first (the repeated-execution context).
std::map<std::pair<std::uint32_t, std::uint64_t>, bool> kernel_line_profile_in_trace(
    const Trace& t, const CacheConfig& cache, std::uint64_t cap_lines, std::uint64_t inv_index,
    bool prior_execution);

/// Per-line hit/miss of one kernel invocation after replaying a setup list
/// through an LRU of `cap_lines` in the same address space.
std::map<std::pair<std::uint32_t, std::uint64_t>, bool> kernel_line_profile_after_setup(
    const Algorithm& a, const ExecPlan& p, const SetupList& sl, int kernel_id,
    const std::vector<std::uint64_t>& coords, const CacheConfig& cache, std::uint64_t cap_lines);

void dump_trace_binary(const Trace& t, const std::string& path);
void dump_trace_text(const Trace& t, const std::string& path);

}  // namespace tcpred
