#include <doctest.h>

#include <map>
#include <set>

#include "test_util.hpp"

using namespace tcpred;

TEST_SUITE_BEGIN("generator");

namespace {

std::map<KernelKind, int> count_by_kernel(const std::vector<Algorithm>& algos) {
  std::map<KernelKind, int> counts;
  for (const auto& a : algos) ++counts[a.kernel];
  return counts;
}

}  // namespace

TEST_CASE("slicing rules for C_abc = A_ai B_ibc") {
  const Contraction c = parse_contraction("C[a,b,c] = A[a,i] B[i,b,c]");
  const auto slicings = enumerate_slicings(c);
  int dot = 0, axpy = 0, gemv = 0, ger = 0, gemm = 0;
  std::vector<std::vector<std::string>> gemm_kept;
  for (const auto& sl : slicings) {
    switch (sl.kind) {
      case KernelKind::dot: ++dot; break;
      case KernelKind::axpy: ++axpy; break;
      case KernelKind::gemv: ++gemv; break;
      case KernelKind::ger: ++ger; break;
      case KernelKind::gemm:
        ++gemm;
        gemm_kept.push_back(sl.kept);
        break;
      default: break;
    }
  }
  CHECK(dot == 1);
  CHECK(axpy == 3);
  CHECK(gemv == 3);
  CHECK(ger == 2);
  CHECK(gemm == 2);
  REQUIRE(gemm_kept.size() == 2);
  CHECK(gemm_kept[0] == std::vector<std::string>{"i", "a", "b"});
  CHECK(gemm_kept[1] == std::vector<std::string>{"i", "a", "c"});
}

TEST_CASE("algorithm counts for the three studied contractions") {
  {
    const auto algos = generate_algorithms(parse_contraction("C[a,b,c] = A[a,i] B[i,b,c]"));
    CHECK(algos.size() == 36);
    const auto counts = count_by_kernel(algos);
    CHECK(counts.at(KernelKind::dot) == 6);
    CHECK(counts.at(KernelKind::axpy) == 18);
    CHECK(counts.at(KernelKind::gemv) == 6);
    CHECK(counts.at(KernelKind::ger) == 4);
    CHECK(counts.at(KernelKind::gemm) == 2);
  }
  {
    const auto algos = generate_algorithms(parse_contraction("C[a] = A[i,a,j] B[j,i]"));
    CHECK(algos.size() == 8);
    const auto counts = count_by_kernel(algos);
    CHECK(counts.at(KernelKind::dot) == 4);
    CHECK(counts.at(KernelKind::axpy) == 2);
    CHECK(counts.at(KernelKind::gemv) == 2);
    CHECK(counts.count(KernelKind::ger) == 0);
    CHECK(counts.count(KernelKind::gemm) == 0);
  }
  {
    const auto algos = generate_algorithms(parse_contraction("C[a,b,c] = A[i,j,a] B[j,b,i,c]"));
    CHECK(algos.size() == 176);
    const auto counts = count_by_kernel(algos);
    CHECK(counts.at(KernelKind::dot) == 48);
    CHECK(counts.at(KernelKind::axpy) == 72);
    CHECK(counts.at(KernelKind::gemv) == 36);
    CHECK(counts.at(KernelKind::ger) == 12);
    CHECK(counts.at(KernelKind::gemm) == 8);
  }
}

TEST_CASE("count law: slicings times permutations of the sliced indices") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Contraction c = testing::random_contraction(rng);
    const auto slicings = enumerate_slicings(c);
    std::size_t expected = 0;
    for (const auto& sl : slicings) {
      std::size_t f = 1;
      for (std::size_t n = 2; n <= sl.sliced.size(); ++n) f *= n;
      expected += f;
    }
    CHECK(generate_algorithms(c).size() == expected);
  }
}

TEST_CASE("names are unique and match the published ones") {
  auto names_of = [](const std::vector<Algorithm>& algos) {
    std::set<std::string> names;
    for (const auto& a : algos) names.insert(a.name);
    REQUIRE(names.size() == algos.size());  // uniqueness
    return names;
  };
  const auto n1 = names_of(generate_algorithms(parse_contraction("C[a,b,c] = A[a,i] B[i,b,c]")));
  for (const char* expect : {"cab_dot", "bci_axpy", "aib_axpy", "bc_gemv", "ca_gemv", "ci_ger",
                             "bi_ger", "c_gemm", "b_gemm"})
    CHECK(n1.count(expect) == 1);

  const auto n2 = names_of(generate_algorithms(parse_contraction("C[a] = A[i,a,j] B[j,i]")));
  const std::set<std::string> expect2 = {"aj_dot",  "ja_dot",  "ai_dot", "ia_dot",
                                         "ij_axpy", "ji_axpy", "j_gemv", "i'_gemv"};
  CHECK(n2 == expect2);

  const auto algos3 = generate_algorithms(parse_contraction("C[a,b,c] = A[i,j,a] B[j,b,i,c]"));
  std::set<std::string> gemm3;
  for (const auto& a : algos3)
    if (a.kernel == KernelKind::gemm) gemm3.insert(a.name);
  const std::set<std::string> expect3 = {"cj'_gemm", "jc'_gemm", "ci'_gemm", "i'c_gemm",
                                         "bj'_gemm", "jb'_gemm", "bi'_gemm", "i'b_gemm"};
  CHECK(gemm3 == expect3);
}

namespace {
const Algorithm& find_algo(const std::vector<Algorithm>& algos, const std::string& name) {
  for (const auto& a : algos)
    if (a.name == name) return a;
  REQUIRE(false);
  return algos.front();
}
}  // namespace

TEST_CASE("emitted pseudocode") {
  const auto algos = generate_algorithms(parse_contraction("C[a,b,c] = A[a,i] B[i,b,c]"));
  CHECK(emit_pseudo(find_algo(algos, "ca_gemv")) ==
        "for c = 1:c\n"
        "    for a = 1:a\n"
        "        C[a,:,c] += A[a,:] B[:,:,c] (gemv)\n");
  CHECK(emit_pseudo(find_algo(algos, "b_gemm")) ==
        "for b = 1:b\n"
        "    C[:,b,:] += A[:,:] B[:,b,:] (gemm)\n");
  CHECK(emit_pseudo(find_algo(algos, "cab_dot")) ==
        "for c = 1:c\n"
        "    for a = 1:a\n"
        "        for b = 1:b\n"
        "            C[a,b,c] += A[a,:] B[:,b,c] (dot)\n");

  const auto algos2 = generate_algorithms(parse_contraction("C[a] = A[i,a,j] B[j,i]"));
  CHECK(emit_pseudo(find_algo(algos2, "i'_gemv")) ==
        "for i = 1:i\n"
        "    A~[:,:] := A[i,:,:] (copy)\n"
        "    C[:] += A~[:,:] B[:,i] (gemv)\n");
  CHECK(emit_pseudo(find_algo(algos2, "j_gemv")) ==
        "for j = 1:j\n"
        "    C[:] += A[:,:,j]^T B[j,:] (gemv)\n");

  const auto algos3 = generate_algorithms(parse_contraction("C[a,b,c] = A[i,j,a] B[j,b,i,c]"));
  CHECK(emit_pseudo(find_algo(algos3, "i'c_gemm")) ==
        "for i = 1:i\n"
        "    A~[:,:] := A[i,:,:] (copy)\n"
        "    for c = 1:c\n"
        "        C[:,:,c] += A~[:,:]^T B[:,:,i,c] (gemm)\n");
  CHECK(emit_pseudo(find_algo(algos3, "cj'_gemm")) ==
        "for c = 1:c\n"
        "    for j = 1:j\n"
        "        B~[:,:] := B[j,:,:,c] (copy)\n"
        "        C[:,:,c] += A[:,j,:]^T B~[:,:]^T (gemm)\n");
}

TEST_CASE("copy insertion leaves contiguous calls untouched") {
  const auto algos = generate_algorithms(parse_contraction("C[a,b,c] = A[a,i] B[i,b,c]"));
  for (const auto& a : algos) CHECK(a.copy_count == 0);
  const auto algos2 = generate_algorithms(parse_contraction("C[a] = A[i,a,j] B[j,i]"));
  CHECK(find_algo(algos2, "i'_gemv").copy_count == 1);
  CHECK(find_algo(algos2, "j_gemv").copy_count == 0);
}

TEST_CASE("matrix contiguity invariant on every emitted kernel call") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const Contraction c = testing::random_contraction(rng);
    for (const auto& a : generate_algorithms(c)) {
      for (const auto& k : a.kernels) {
        for (int s = 0; s < k.num_slots(); ++s) {
          const Operand& op = k.slot(s);
          if (!op.is_matrix() || k.kind == KernelKind::copy) continue;
          const Tensor& t = a.tensor_named(op.region.tensor);
          const bool contiguous =
              std::find(op.math_dims.begin(), op.math_dims.end(), t.dims[0]) !=
              op.math_dims.end();
          CHECK(contiguous);
        }
      }
    }
  }
}

TEST_CASE("invocation counts") {
  const auto algos = generate_algorithms(parse_contraction("C[a,b,c] = A[a,i] B[i,b,c]"));
  SizeModel s = parse_sizes("a=400,b=400,c=400,i=8");
  CHECK(invocation_count(find_algo(algos, "ca_gemv"), s) == 160'000);
  SizeModel s2 = parse_sizes("a=128,b=128,c=128,i=8");
  CHECK(invocation_count(find_algo(algos, "b_gemm"), s2) == 128);
  SizeModel s3 = parse_sizes("a=8,b=8,c=8,i=8");
  CHECK(invocation_count(find_algo(algos, "cab_dot"), s3) == 512);
}

TEST_CASE("every algorithm of the paper contractions matches the naive oracle") {
  ReferenceBackend ref;
  const char* texts[] = {"C[a,b,c] = A[a,i] B[i,b,c]", "C[a] = A[i,a,j] B[j,i]",
                         "C[a,b,c] = A[i,j,a] B[j,b,i,c]"};
  std::mt19937 rng(3);
  for (const char* t : texts) {
    const Contraction c = parse_contraction(t);
    const SizeModel s = testing::random_sizes(c, rng, 2, 4);
    const std::uint64_t seed = 99 + rng() % 1000;
    for (const auto& a : generate_algorithms(c)) {
      const auto got = testing::run_and_collect(a, s, ref, seed);
      const auto want = testing::naive_and_collect(a, s, seed);
      CHECK_MESSAGE(testing::close_rel(got, want, 1e-12), "algorithm ", a.name);
    }
  }
}

TEST_CASE("random contractions match the naive oracle") {
  ReferenceBackend ref;
  std::mt19937 rng(17);
  for (int trial = 0; trial < 12; ++trial) {
    const Contraction c = testing::random_contraction(rng);
    const SizeModel s = testing::random_sizes(c, rng, 1, 4);
    const std::uint64_t seed = rng();
    for (const auto& a : generate_algorithms(c)) {
      const auto got = testing::run_and_collect(a, s, ref, seed);
      const auto want = testing::naive_and_collect(a, s, seed);
      CHECK_MESSAGE(testing::close_rel(got, want, 1e-12), "algorithm ", a.name, " for ",
                    to_string(c));
    }
  }
}

TEST_CASE("ast json carries the tree structure") {
  const auto algos = generate_algorithms(parse_contraction("C[a] = A[i,a,j] B[j,i]"));
  const std::string j = emit_ast_json(find_algo(algos, "i'_gemv"));
  CHECK(j.find("\"algorithm\": \"i'_gemm\"") == std::string::npos);
  CHECK(j.find("\"algorithm\": \"i'_gemv\"") != std::string::npos);
  CHECK(j.find("\"kind\": \"loop\"") != std::string::npos);
  CHECK(j.find("\"op\": \"copy\"") != std::string::npos);
  CHECK(j.find("\"selectors\"") != std::string::npos);
}

TEST_SUITE_END();
