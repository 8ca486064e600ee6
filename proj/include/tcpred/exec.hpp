#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "tcpred/ast.hpp"

namespace tcpred {

/// Fortran-order layout of one tensor under a SizeModel.
struct TensorLayout {
  std::vector<std::uint64_t> extent;
  std::vector<std::uint64_t> stride;
  std::uint64_t total = 1;
};

TensorLayout layout_of(const Tensor& t, const SizeModel& s);

using Dims = std::vector<std::pair<std::uint64_t, std::uint64_t>>;  // (extent, stride)

/// Precomputed addressing for one kernel operand.
struct SlotPlan {
  int tensor = -1;  // index into Algorithm::tensors
  std::vector<std::pair<int, std::uint64_t>> terms;  // (loop slot, stride): bound offsets
  Dims math;     // math-order dims (empty = scalar)
  Dims storage;  // Full dims in tensor storage order; canonical access order
  std::uint64_t elements = 1;
};

struct PlannedKernel {
  int id = -1;
  KernelKind kind = KernelKind::dot;
  std::vector<SlotPlan> slots;  // slot 0 = out, then ins
  std::uint64_t flops_per_call = 0;
};

struct PlanNode {
  int loop_slot = -1;  // -1 = kernel leaf
  std::uint64_t extent = 0;
  std::vector<PlanNode> body;
  int kernel = -1;
};

/// Algorithm lowered against a concrete SizeModel: loop extents, strides and
/// per-operand addressing resolved to integers.
struct ExecPlan {
  std::vector<PlannedKernel> kernels;  // by kernel id
  std::vector<PlanNode> root;
  std::vector<std::string> loop_names;  // by loop slot, outermost first per nest
  std::vector<std::uint64_t> loop_extents;
  std::vector<TensorLayout> layouts;  // by tensor index
  std::uint64_t element_bytes = 8;

  std::uint64_t offset_of(const SlotPlan& sp, const std::vector<std::uint64_t>& coords) const;
};

ExecPlan make_plan(const Algorithm& a, const SizeModel& s);

/// Mid-extent loop values, the representative steady-state binding used when
/// benchmarking a single kernel invocation.
std::vector<std::uint64_t> mid_coords(const ExecPlan& p);

/// Owned, page-aligned buffers for the algorithm's tensors plus one remote
/// buffer.  Inputs get fixed-seed pseudo-random contents, outputs and
/// temporaries start at zero.
class BufferSet {
 public:
  static BufferSet allocate(const Algorithm& a, const ExecPlan& p, std::uint64_t remote_elems,
                            std::uint64_t seed, std::uint64_t max_bytes);
  /// Address-space-only buffers for backends that never dereference.
  static BufferSet virtual_space(const ExecPlan& p, std::uint64_t remote_elems);

  double* tensor(std::size_t i) const { return data_[i]; }
  double* remote() const { return remote_; }
  std::uint64_t remote_elems() const { return remote_elems_; }
  bool is_virtual() const { return virtual_; }

  BufferSet() = default;
  BufferSet(BufferSet&&) noexcept;
  BufferSet& operator=(BufferSet&&) noexcept;
  ~BufferSet();

 private:
  std::vector<double*> data_;
  std::vector<void*> owned_;
  double* remote_ = nullptr;
  std::uint64_t remote_elems_ = 0;
  bool virtual_ = false;
};

/// One kernel call bound to concrete addresses.  `space`/`base` mirror the
/// pointer in element units for backends that model rather than execute.
struct BoundOp {
  double* ptr = nullptr;
  const Dims* math = nullptr;
  const Dims* storage = nullptr;
  int space = -1;
  std::uint64_t base = 0;
};

struct BoundKernel {
  KernelKind kind = KernelKind::dot;
  std::uint64_t flops = 0;
  BoundOp out;
  BoundOp in0;
  BoundOp in1;
  int n_ins = 0;

  const BoundOp& slot(int s) const { return s == 0 ? out : (s == 1 ? in0 : in1); }
  int num_slots() const { return 1 + n_ins; }
};

BoundKernel bind_kernel(const ExecPlan& p, const PlannedKernel& k, const BufferSet& buf,
                        const std::vector<std::uint64_t>& coords);

/// Plain-loop kernel semantics; accepts arbitrary strides.
void reference_execute(const BoundKernel& k);

bool native_available();
/// CBLAS-backed kernel execution; requires a unit-stride dimension on every
/// matrix operand (guaranteed by the generator).
void native_execute(const BoundKernel& k);

/// Runs the whole algorithm, invoking `exec` for every kernel call in
/// execution order.  Throws BackendError when the budget (ns, 0 = none) is
/// exceeded.
void run_plan(const ExecPlan& p, const BufferSet& buf,
              const std::function<void(const BoundKernel&)>& exec, std::uint64_t budget_ns = 0);

/// Independent oracle: the naive nested-loop contraction, no slicing
/// machinery involved.
void naive_contract(const Contraction& c, const SizeModel& s, const double* a, const double* b,
                    double* out);

/// Element offsets of a slot's region at fixed loop coordinates, storage
/// order (first dimension fastest).
void slot_offsets(const ExecPlan& p, const SlotPlan& sp, const std::vector<std::uint64_t>& coords,
                  std::vector<std::uint64_t>& out);

/// Same enumeration for an arbitrary region; yields the tensor index and the
/// element offsets.  FirstLine selectors clip to `line_elems`.
void region_offsets(const Algorithm& a, const ExecPlan& p, const MemoryRegion& r,
                    const std::vector<std::uint64_t>& coords, std::uint64_t line_elems,
                    std::uint32_t& space, std::vector<std::uint64_t>& out);

}  // namespace tcpred
