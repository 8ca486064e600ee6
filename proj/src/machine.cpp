#include "tcpred/machine.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace tcpred {

void CacheConfig::validate() const {
  if (element_bytes == 0 || line_bytes == 0 || capacity_bytes == 0)
    throw AnalysisError("cache config fields must be positive");
  if (line_bytes % element_bytes != 0)
    throw AnalysisError("cache line size must be a multiple of the element size");
  if (capacity_bytes % line_bytes != 0)
    throw AnalysisError("cache capacity must be a multiple of the line size");
}

void MachineConfig::validate() const {
  cache.validate();
  if (clock_hz <= 0 || flops_per_cycle <= 0 || threads <= 0)
    throw AnalysisError("machine config fields must be positive");
}

namespace {

void apply_kv(MachineConfig& m, const std::string& key, const std::string& value) {
  try {
    if (key == "clock_hz")
      m.clock_hz = std::stod(value);
    else if (key == "flops_per_cycle")
      m.flops_per_cycle = std::stod(value);
    else if (key == "cache_bytes")
      m.cache.capacity_bytes = std::stoull(value);
    else if (key == "line_bytes")
      m.cache.line_bytes = std::stoull(value);
    else if (key == "element_bytes")
      m.cache.element_bytes = std::stoull(value);
    else if (key == "threads")
      m.threads = std::stoi(value);
    else
      throw AnalysisError("unknown machine config key '" + key + "'");
  } catch (const std::invalid_argument&) {
    throw AnalysisError("bad value for machine config key '" + key + "': " + value);
  }
}

}  // namespace

MachineConfig load_machine_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw AnalysisError("cannot open machine config '" + path + "'");
  MachineConfig m;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string token;
    if (!(ls >> token)) continue;
    auto eq = token.find('=');
    if (eq == std::string::npos) throw AnalysisError("machine config: expected key=value, got '" + token + "'");
    apply_kv(m, token.substr(0, eq), token.substr(eq + 1));
  }
  m = machine_config_from_env(m);
  m.validate();
  return m;
}

MachineConfig machine_config_from_env(MachineConfig base) {
  static const char* keys[] = {"clock_hz", "flops_per_cycle", "cache_bytes",
                               "line_bytes", "element_bytes", "threads"};
  for (const char* key : keys) {
    std::string env = "TCPREDICT_";
    for (const char* p = key; *p; ++p) env += static_cast<char>(std::toupper(*p));
    if (const char* v = std::getenv(env.c_str())) apply_kv(base, key, v);
  }
  return base;
}

}  // namespace tcpred
