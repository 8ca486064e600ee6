#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tcpred/contraction.hpp"

namespace tcpred {

enum class Sel : std::uint8_t {
  full,       // ":"  every element along the dimension
  bound,      // fixed to the value of a loop index
  first_line  // one cache line along the first dimension (prefetch emulation)
};

struct Selector {
  Sel kind = Sel::full;
  std::string index;  // loop index, only for Sel::bound

  bool operator==(const Selector& o) const { return kind == o.kind && index == o.index; }
};

/// A symbolic slice of a tensor: one selector per dimension.  Fully
/// self-contained (carries the tensor name and its dimension index names) so
/// that size and join arithmetic need only a SizeModel.
struct MemoryRegion {
  std::string tensor;
  std::vector<std::string> dims;
  std::vector<Selector> sel;

  bool operator==(const MemoryRegion& o) const {
    return tensor == o.tensor && dims == o.dims && sel == o.sel;
  }
  bool depends_on(const std::string& loop_index) const;
};

MemoryRegion region_of(const Tensor& t, const std::vector<std::string>& kept);

/// Element count of the region: Full contributes the index extent, Bound
/// contributes 1, FirstLine contributes min(line_elements, extent).
std::uint64_t region_size(const MemoryRegion& r, const SizeModel& s,
                          std::uint64_t line_elements = 1);

/// Joins the region across a loop index: every selector bound to it becomes
/// Full.  Idempotent, commutative across distinct indices.
MemoryRegion join_region(MemoryRegion r, const std::string& loop_index);

std::uint64_t regions_total_size(std::span<const MemoryRegion> m, const SizeModel& s,
                                 std::uint64_t line_elements = 1);

/// `A[a,:]`, `B[:,:,c]`, `A~[:line,i]` (FirstLine prints as ":line").
std::string to_string(const MemoryRegion& r);

}  // namespace tcpred
