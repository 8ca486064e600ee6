#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tcpred/analysis.hpp"

namespace tcpred {

enum class ActionKind : std::uint8_t { touch_operand, touch_remote, touch_prefetch_line };

struct SetupAction {
  ActionKind kind = ActionKind::touch_remote;
  MemoryRegion region;  // operand / prefetch-line touches
  SlotKey slot;
  std::uint64_t size = 0;  // elements
};

/// The cache precondition of one micro-benchmark: operand touches ordered by
/// descending distance, interleaved with remote accesses so that, for each
/// touch, the total size of everything after it equals the operand's access
/// (or prefetch) distance.
struct SetupList {
  std::vector<SetupAction> actions;
  bool truncated = false;  // cut at the front to 5/4 of the cache capacity
  bool omitted = false;    // operand touches only; the repetitions already
                           // provide them, so the benchmark skips the setup
};

SetupList build_setup(const std::vector<OperandAnalysis>& ops, const SizeModel& s,
                      const CacheConfig& cache);

std::uint64_t setup_total(const SetupList& sl);

/// Truncation limit in elements: 5/4 of the cache capacity.
std::uint64_t truncation_limit(const CacheConfig& cache);

/// `[816632], A[a,:], [163200], B[:,:,c]`
std::string to_string(const SetupList& sl);

}  // namespace tcpred
