#include "tcpred/backend.hpp"

#include <cmath>

namespace tcpred {

NativeBackend::NativeBackend() {
  if (!native_available()) throw BackendError("native BLAS backend not compiled in");
}

SyntheticBackend::SyntheticBackend(const MachineConfig& m) : m_(m) {
  m_.validate();
  begin_benchmark();
}

void SyntheticBackend::begin_benchmark() {
  lru_ = std::make_unique<LruSim>(m_.cache.capacity_lines());
  remote_line_ = 0;
}

void SyntheticBackend::touch_element(std::uint32_t space, std::uint64_t offset) {
  lru_->access(space, offset / m_.cache.line_elements());
}

void SyntheticBackend::touch_remote(std::uint64_t elements) {
  const std::uint64_t lines = (elements + m_.cache.line_elements() - 1) / m_.cache.line_elements();
  for (std::uint64_t l = 0; l < lines; ++l) lru_->access(kRemoteSpace, remote_line_++);
}

void SyntheticBackend::execute(const BoundKernel& k) {
  const std::uint64_t line = m_.cache.line_elements();
  std::uint64_t hits = 0, misses = 0;
  for (int s = k.n_ins >= 1 ? 1 : 0; true;) {
    const BoundOp& op = k.slot(s);
    // Sweep the operand in storage order at line granularity.
    const Dims& dims = *op.storage;
    std::vector<std::uint64_t>& idx = scratch_;
    idx.assign(dims.size(), 0);
    for (;;) {
      std::uint64_t off = op.base;
      for (std::size_t d = 0; d < dims.size(); ++d) off += idx[d] * dims[d].second;
      lru_->access(static_cast<std::uint32_t>(op.space), off / line) ? ++hits : ++misses;
      std::size_t d = 0;
      while (d < dims.size() && ++idx[d] == dims[d].first) idx[d++] = 0;
      if (d == dims.size() || dims.empty()) break;
    }
    if (s == 0) break;
    s = s < k.n_ins ? s + 1 : 0;  // inputs first, then the output
  }
  const double compute_cycles =
      static_cast<double>(k.flops) / (m_.flops_per_cycle * static_cast<double>(m_.threads));
  const double mem_cycles = kHitCycles * static_cast<double>(hits) +
                            kMissCycles * static_cast<double>(misses);
  const double ns = (compute_cycles + mem_cycles) / m_.clock_hz * 1e9;
  last_ns_ = static_cast<std::uint64_t>(std::llround(ns));
  if (last_ns_ == 0) last_ns_ = 1;
  total_ns_ += last_ns_;
}

std::unique_ptr<KernelBackend> make_backend(const std::string& name, const MachineConfig& m) {
  if (name == "reference") return std::make_unique<ReferenceBackend>();
  if (name == "native") return std::make_unique<NativeBackend>();
  if (name == "synthetic") return std::make_unique<SyntheticBackend>(m);
  throw BackendError("unknown backend '" + name + "'");
}

}  // namespace tcpred
