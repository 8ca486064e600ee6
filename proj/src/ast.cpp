#include "tcpred/ast.hpp"

#include <algorithm>

namespace tcpred {

const char* kernel_name(KernelKind k) {
  switch (k) {
    case KernelKind::dot: return "dot";
    case KernelKind::axpy: return "axpy";
    case KernelKind::gemv: return "gemv";
    case KernelKind::ger: return "ger";
    case KernelKind::gemm: return "gemm";
    case KernelKind::copy: return "copy";
  }
  return "?";
}

int blas_level(KernelKind k) {
  switch (k) {
    case KernelKind::dot:
    case KernelKind::axpy: return 1;
    case KernelKind::gemv:
    case KernelKind::ger: return 2;
    case KernelKind::gemm: return 3;
    case KernelKind::copy: return 0;
  }
  return 0;
}

const Tensor& Algorithm::tensor_named(const std::string& n) const {
  for (const auto& t : tensors)
    if (t.name == n) return t;
  throw AnalysisError("unknown tensor '" + n + "'");
}

namespace {
bool find_loops(const std::vector<Node>& body, int kernel_id, std::vector<std::string>& path) {
  for (const auto& n : body) {
    if (n.is_loop()) {
      path.push_back(n.loop);
      if (find_loops(n.body, kernel_id, path)) return true;
      path.pop_back();
    } else if (n.kernel_id == kernel_id) {
      return true;
    }
  }
  return false;
}
}  // namespace

std::vector<std::string> enclosing_loops(const Algorithm& a, int kernel_id) {
  std::vector<std::string> path;
  if (!find_loops(a.root, kernel_id, path))
    throw AnalysisError("kernel id not found in loop nest");
  return path;
}

void kernels_under(const std::vector<Node>& body, std::vector<int>& out) {
  for (const auto& n : body) {
    if (n.is_loop())
      kernels_under(n.body, out);
    else
      out.push_back(n.kernel_id);
  }
}

std::uint64_t kernel_invocations(const Algorithm& a, int kernel_id, const SizeModel& s) {
  std::uint64_t count = 1;
  for (const auto& l : enclosing_loops(a, kernel_id)) {
    if (__builtin_mul_overflow(count, s.size_of(l), &count))
      throw AnalysisError("invocation count overflow");
  }
  return count;
}

std::uint64_t invocation_count(const Algorithm& a, const SizeModel& s) {
  return kernel_invocations(a, a.main_kernel, s);
}

}  // namespace tcpred
