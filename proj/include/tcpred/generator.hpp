#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tcpred/ast.hpp"

namespace tcpred {

/// One way of reducing the contraction to a kernel: the kept indices define
/// the kernel operands, everything else is sliced (turned into loops).
struct Slicing {
  KernelKind kind = KernelKind::dot;
  std::string kc;  // kept contracted index ("" if the kernel has none)
  std::string fa;  // kept free index of A ("")
  std::string fb;  // kept free index of B ("")
  std::vector<std::string> kept;
  std::vector<std::string> sliced;  // name-sorted; loop orders are its permutations
};

/// All slicings admitted by the kernel rules: dot keeps one contracted index;
/// axpy keeps one free index of exactly one input; gemv keeps one contracted
/// and one free of exactly one input; ger keeps one free of each input;
/// gemm keeps one contracted and one free of each input.
std::vector<Slicing> enumerate_slicings(const Contraction& c);

struct GenerateOptions {
  // Empty set = all kernels.
  std::vector<KernelKind> kernels;
};

/// Every algorithm for the contraction: one per (slicing, loop permutation),
/// with copy kernels inserted wherever a matrix operand lacks a contiguous
/// dimension.  Deterministic order: kernels in BLAS-level order (dot, axpy,
/// gemv, ger, gemm), then slicing enumeration order, then lexicographic loop
/// order.
std::vector<Algorithm> generate_algorithms(const Contraction& c, const GenerateOptions& opt = {});

/// Loop-nest pseudocode, one construct per line, 4-space indentation.
std::string emit_pseudo(const Algorithm& a);

/// Illustrative C with CBLAS call signatures.
std::string emit_c(const Algorithm& a);

/// The loop-nest tree as JSON (node kind, index, children, operand selectors).
std::string emit_ast_json(const Algorithm& a);

}  // namespace tcpred
