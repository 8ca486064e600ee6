#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tcpred/errors.hpp"

namespace tcpred {

enum class Role { output_c, input_a, input_b, temporary };

/// A tensor is a name plus an ordered index list.  Storage is Fortran-style:
/// the first listed dimension is contiguous, later dimensions have strides
/// equal to the product of all earlier extents.
struct Tensor {
  std::string name;
  std::vector<std::string> dims;
  Role role = Role::temporary;

  bool has_dim(const std::string& idx) const;
  /// Position of idx within dims, or -1.
  int dim_of(const std::string& idx) const;
};

/// A two-tensor contraction in Einstein notation, with the indices
/// classified: contracted indices appear in both inputs and are summed over,
/// free indices appear in exactly one input and in the output.
struct Contraction {
  Tensor c;
  Tensor a;
  Tensor b;
  std::vector<std::string> contracted;
  std::vector<std::string> free_a;
  std::vector<std::string> free_b;
  /// All indices in order of first appearance (C, then A, then B).
  std::vector<std::string> universe;

  bool is_contracted(const std::string& idx) const;
};

/// Parses `C[a,b,c] = A[a,i] B[i,b,c]` (the `*` between the inputs is
/// optional, whitespace is ignored).  Throws ParseError on malformed text,
/// traces, unbound output indices and dangling input indices.
Contraction parse_contraction(const std::string& text);

/// Inverse of parse_contraction up to whitespace.
std::string to_string(const Contraction& c);

/// Concrete extents for the indices of one contraction plus the element
/// width used when converting to bytes.
struct SizeModel {
  std::map<std::string, std::uint64_t> extent;
  std::uint64_t element_bytes = 8;

  std::uint64_t size_of(const std::string& idx) const;
  bool assigned(const std::string& idx) const { return extent.count(idx) != 0; }
  void require_all(const Contraction& c) const;
};

/// Parses `a=400,b=400,i=8` into a SizeModel.
SizeModel parse_sizes(const std::string& text, std::uint64_t element_bytes = 8);

}  // namespace tcpred
