#pragma once

#include <stdexcept>
#include <string>

namespace tcpred {

/// Malformed contraction text or size assignment (CLI exit code 2).
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// Inconsistent or unsupported analysis input (CLI exit code 2).
struct AnalysisError : std::runtime_error {
  explicit AnalysisError(const std::string& what) : std::runtime_error(what) {}
};

/// Kernel backend failure: allocation, unsupported kernel, misconfiguration
/// (CLI exit code 3).
struct BackendError : std::runtime_error {
  explicit BackendError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace tcpred
