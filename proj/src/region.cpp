#include "tcpred/region.hpp"

#include <algorithm>
#include <sstream>

namespace tcpred {

bool MemoryRegion::depends_on(const std::string& loop_index) const {
  for (const auto& s : sel)
    if (s.kind == Sel::bound && s.index == loop_index) return true;
  return false;
}

MemoryRegion region_of(const Tensor& t, const std::vector<std::string>& kept) {
  MemoryRegion r;
  r.tensor = t.name;
  r.dims = t.dims;
  r.sel.reserve(t.dims.size());
  for (const auto& d : t.dims) {
    if (std::find(kept.begin(), kept.end(), d) != kept.end())
      r.sel.push_back({Sel::full, {}});
    else
      r.sel.push_back({Sel::bound, d});
  }
  return r;
}

std::uint64_t region_size(const MemoryRegion& r, const SizeModel& s,
                          std::uint64_t line_elements) {
  if (r.sel.size() != r.dims.size())
    throw AnalysisError("region '" + r.tensor + "': selector count does not match rank");
  std::uint64_t total = 1;
  for (std::size_t d = 0; d < r.dims.size(); ++d) {
    std::uint64_t factor = 1;
    switch (r.sel[d].kind) {
      case Sel::full: factor = s.size_of(r.dims[d]); break;
      case Sel::bound: factor = 1; break;
      case Sel::first_line:
        if (d != 0) throw AnalysisError("FirstLine selector only valid on the first dimension");
        factor = std::min<std::uint64_t>(line_elements, s.size_of(r.dims[d]));
        break;
    }
    if (__builtin_mul_overflow(total, factor, &total))
      throw AnalysisError("region size overflow for tensor '" + r.tensor + "'");
  }
  return total;
}

MemoryRegion join_region(MemoryRegion r, const std::string& loop_index) {
  for (auto& s : r.sel)
    if (s.kind == Sel::bound && s.index == loop_index) s = {Sel::full, {}};
  return r;
}

std::uint64_t regions_total_size(std::span<const MemoryRegion> m, const SizeModel& s,
                                 std::uint64_t line_elements) {
  std::uint64_t total = 0;
  for (const auto& r : m) {
    std::uint64_t sz = region_size(r, s, line_elements);
    if (__builtin_add_overflow(total, sz, &total))
      throw AnalysisError("total region size overflow");
  }
  return total;
}

std::string to_string(const MemoryRegion& r) {
  std::ostringstream os;
  os << r.tensor << '[';
  for (std::size_t d = 0; d < r.sel.size(); ++d) {
    if (d) os << ',';
    switch (r.sel[d].kind) {
      case Sel::full: os << ':'; break;
      case Sel::bound: os << r.sel[d].index; break;
      case Sel::first_line: os << ":line"; break;
    }
  }
  os << ']';
  return os.str();
}

}  // namespace tcpred
