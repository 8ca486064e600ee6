#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tcpred/ast.hpp"
#include "tcpred/machine.hpp"

namespace tcpred {

struct SlotKey {
  int kernel = -1;
  int slot = -1;  // 0 = out, 1.. = ins

  bool operator==(const SlotKey& o) const { return kernel == o.kernel && slot == o.slot; }
  bool operator<(const SlotKey& o) const {
    return kernel != o.kernel ? kernel < o.kernel : slot < o.slot;
  }
};

struct MEntry {
  SlotKey slot;
  MemoryRegion region;
};

enum class PrefetchFlavor { none, line_sharing, streaming };

/// Result of the back-traversal for one kernel operand: the collected region
/// set M, the access distance (sum of the sizes of M), and the prefetch
/// determination for the directly surrounding loop.
struct OperandAnalysis {
  SlotKey slot;
  MemoryRegion operand;
  std::uint64_t size = 0;
  std::vector<MEntry> m;
  std::uint64_t distance = 0;
  bool root_case = false;
  bool cold = false;  // root case under the cold-root convention

  bool prefetched = false;
  PrefetchFlavor flavor = PrefetchFlavor::none;
  std::uint64_t prefetch_distance = 0;
  MemoryRegion prefetch_touch;  // operand clipped to one line along dim 0

  /// Distance that positions this operand in the setup list.
  std::uint64_t effective_distance() const { return prefetched ? prefetch_distance : distance; }
};

struct AnalysisOptions {
  bool cold_root = false;  // treat root-case operands as flushed instead of
                           // using the repeated-execution assumption
};

/// Steady-state access distance of one operand of one kernel, assuming every
/// surrounding loop is mid-traversal.  Walks the tree upward from the kernel:
/// stops when the (joined) operand no longer varies across the surrounding
/// loop, otherwise joins all kernel operands across the crossed loops and
/// recurses; at the root the accumulated M decides.
OperandAnalysis access_distance(const Algorithm& a, int kernel_id, int slot, const SizeModel& s,
                                const AnalysisOptions& opt = {});

/// Same back-traversal, but started at the first iteration of `loop`: M is
/// pre-seeded with every kernel region under that loop joined across it, and
/// the walk continues upward from the loop node.
OperandAnalysis access_distance_first_iteration(const Algorithm& a, int kernel_id, int slot,
                                                const std::string& loop, const SizeModel& s,
                                                const AnalysisOptions& opt = {});

/// Prefetch conditions: the operand varies across the directly surrounding
/// loop, and the loop's iterator indexes a dimension whose leading dimensions
/// are accessed entirely (contiguous streaming) or jointly fit within one
/// cache line (line sharing).  Purely a property of the region geometry.
void detect_prefetch(const Algorithm& a, int kernel_id, const SizeModel& s,
                     const CacheConfig& cache, OperandAnalysis& oa);

enum class Stage { repeated, distance, prefetch, failure, first_iter };

Stage parse_stage(const std::string& name);
const char* stage_name(Stage st);

struct VariantLabel {
  enum Kind { steady, prefetch_failure, first_iteration } kind = steady;
  std::string loop;  // for first_iteration

  std::string text() const;
};

struct BenchmarkVariant {
  VariantLabel label;
  std::vector<OperandAnalysis> per_operand;
  std::uint64_t weight = 0;
};

/// All benchmark variants of one kernel at the given stage, with weights that
/// partition its invocation count: the steady state, the prefetch-failure
/// iterations of line-sharing operands, and the first iterations of loops
/// whose share of invocations exceeds the threshold.
struct KernelVariants {
  int kernel = -1;
  std::vector<std::string> loops;  // enclosing, outermost first
  std::uint64_t invocations = 0;
  std::vector<BenchmarkVariant> variants;
};

/// Variant enumeration for the main kernel and every copy kernel.
std::vector<KernelVariants> enumerate_variants(const Algorithm& a, const SizeModel& s,
                                               const CacheConfig& cache,
                                               Stage stage = Stage::first_iter,
                                               double threshold = 0.01,
                                               const AnalysisOptions& opt = {});

}  // namespace tcpred
