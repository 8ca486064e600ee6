#pragma once

#include <memory>
#include <string_view>

#include "tcpred/cache_sim.hpp"
#include "tcpred/exec.hpp"
#include "tcpred/machine.hpp"

namespace tcpred {

/// Executes kernel calls bound to concrete buffers.  `execute` must be
/// deterministic in result values; backends are driven from a single
/// benchmarking thread.
class KernelBackend {
 public:
  virtual ~KernelBackend() = default;
  virtual std::string_view id() const = 0;
  virtual bool supports(KernelKind k) const = 0;
  virtual void execute(const BoundKernel& k) = 0;
  /// Synthetic backends model durations instead of running on real memory.
  virtual bool is_synthetic() const { return false; }
};

class ReferenceBackend final : public KernelBackend {
 public:
  std::string_view id() const override { return "reference"; }
  bool supports(KernelKind) const override { return true; }
  void execute(const BoundKernel& k) override { reference_execute(k); }
};

class NativeBackend final : public KernelBackend {
 public:
  NativeBackend();
  std::string_view id() const override { return "native"; }
  bool supports(KernelKind) const override { return true; }
  void execute(const BoundKernel& k) override { native_execute(k); }
};

/// Deterministic modeled-time backend: kernel and setup accesses run through
/// a fully associative LRU, and the duration comes from a fixed cost model
/// (compute term from the flop count, plus per-line hit/miss costs).  Never
/// dereferences operand pointers, so it works on virtual buffer spaces.
class SyntheticBackend final : public KernelBackend {
 public:
  static constexpr double kHitCycles = 2.0;
  static constexpr double kMissCycles = 100.0;

  explicit SyntheticBackend(const MachineConfig& m);

  std::string_view id() const override { return "synthetic"; }
  bool supports(KernelKind) const override { return true; }
  bool is_synthetic() const override { return true; }
  void execute(const BoundKernel& k) override;

  void begin_benchmark();  // fresh cache state
  void touch_element(std::uint32_t space, std::uint64_t offset);
  void touch_remote(std::uint64_t elements);
  std::uint64_t last_kernel_ns() const { return last_ns_; }
  std::uint64_t total_modeled_ns() const { return total_ns_; }
  std::uint64_t hits() const { return lru_->hits; }
  std::uint64_t misses() const { return lru_->misses; }

 private:
  MachineConfig m_;
  std::unique_ptr<LruSim> lru_;
  std::uint64_t remote_line_ = 0;
  std::uint64_t last_ns_ = 0;
  std::uint64_t total_ns_ = 0;
  std::vector<std::uint64_t> scratch_;
};

/// name: reference | native | synthetic
std::unique_ptr<KernelBackend> make_backend(const std::string& name, const MachineConfig& m);

}  // namespace tcpred
