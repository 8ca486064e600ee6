#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tcpred/region.hpp"

namespace tcpred {

enum class KernelKind : std::uint8_t { dot, axpy, gemv, ger, gemm, copy };

const char* kernel_name(KernelKind k);
int blas_level(KernelKind k);  // 1, 2, 3; copy -> 0

/// One kernel operand: a region plus the mapping of its Full dimensions onto
/// the kernel's mathematical dimensions.  math_dims is empty for scalars,
/// one index for vectors, (rows, cols) for matrices.  transposed is set when
/// the storage order of the two Full dimensions differs from math order.
struct Operand {
  MemoryRegion region;
  std::vector<std::string> math_dims;
  bool transposed = false;

  bool is_scalar() const { return math_dims.empty(); }
  bool is_matrix() const { return math_dims.size() == 2; }
};

/// A call to one BLAS kernel (or an auxiliary copy).  Slot 0 is the output,
/// slots 1.. are the inputs; for compute kernels the inputs are always
/// ordered (A-operand, B-operand).
struct KernelCall {
  int id = -1;
  KernelKind kind = KernelKind::dot;
  Operand out;
  std::vector<Operand> ins;

  int num_slots() const { return 1 + static_cast<int>(ins.size()); }
  const Operand& slot(int s) const { return s == 0 ? out : ins[static_cast<std::size_t>(s - 1)]; }
  Operand& slot(int s) { return s == 0 ? out : ins[static_cast<std::size_t>(s - 1)]; }
};

/// Loop-nest tree node: either a loop over one sliced index with an ordered
/// body, or a kernel leaf referencing Algorithm::kernels by id.
struct Node {
  std::string loop;        // empty for kernel leaves
  std::vector<Node> body;  // only for loops
  int kernel_id = -1;      // only for kernel leaves

  bool is_loop() const { return !loop.empty(); }
};

/// One generated algorithm: loops wrapped around a single compute kernel,
/// plus any copy kernels required for BLAS operand contiguity.
struct Algorithm {
  std::string name;
  KernelKind kernel = KernelKind::dot;
  std::vector<std::string> sliced;  // loop order, outermost first
  int copy_count = 0;
  std::vector<Node> root;
  std::vector<KernelCall> kernels;  // kernels[i].id == i
  int main_kernel = -1;
  std::vector<Tensor> tensors;  // C, A, B, then temporaries
  Contraction contraction;

  const KernelCall& main() const { return kernels[static_cast<std::size_t>(main_kernel)]; }
  const Tensor& tensor_named(const std::string& n) const;
};

/// Loops enclosing each kernel, outermost first, as positions into a flat
/// walk of the tree.
std::vector<std::string> enclosing_loops(const Algorithm& a, int kernel_id);

/// All kernel ids in execution order under a body.
void kernels_under(const std::vector<Node>& body, std::vector<int>& out);

/// Product of the extents of the loops enclosing the main kernel.
std::uint64_t invocation_count(const Algorithm& a, const SizeModel& s);
std::uint64_t kernel_invocations(const Algorithm& a, int kernel_id, const SizeModel& s);

}  // namespace tcpred
