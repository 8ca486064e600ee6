#pragma once

#include <cstdint>
#include <string>

#include "tcpred/errors.hpp"

namespace tcpred {

/// Fully associative LRU cache model: one level, line granularity.
struct CacheConfig {
  std::uint64_t capacity_bytes = 6 * 1024 * 1024;
  std::uint64_t line_bytes = 64;
  std::uint64_t element_bytes = 8;

  std::uint64_t line_elements() const { return line_bytes / element_bytes; }
  std::uint64_t capacity_elements() const { return capacity_bytes / element_bytes; }
  std::uint64_t capacity_lines() const { return capacity_bytes / line_bytes; }
  void validate() const;
};

struct MachineConfig {
  double clock_hz = 2.0e9;
  double flops_per_cycle = 4.0;
  CacheConfig cache;
  int threads = 1;

  void validate() const;
};

/// key=value file: clock_hz, flops_per_cycle, cache_bytes, line_bytes,
/// element_bytes, threads.  '#' starts a comment.  Environment variables
/// TCPREDICT_<KEY> override file values.
MachineConfig load_machine_config(const std::string& path);
MachineConfig machine_config_from_env(MachineConfig base);

}  // namespace tcpred
