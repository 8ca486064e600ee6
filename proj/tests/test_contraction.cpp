#include <doctest.h>

#include <random>

#include "tcpred/contraction.hpp"
#include "tcpred/region.hpp"

using namespace tcpred;

TEST_SUITE_BEGIN("contraction");

TEST_CASE("classification of the running example") {
  const Contraction c = parse_contraction("C[a,b,c] = A[a,i] B[i,b,c]");
  CHECK(c.contracted == std::vector<std::string>{"i"});
  CHECK(c.free_a == std::vector<std::string>{"a"});
  CHECK(c.free_b == std::vector<std::string>{"b", "c"});
  CHECK(c.universe == std::vector<std::string>{"a", "b", "c", "i"});
}

TEST_CASE("classification with two contracted indices and empty freeB") {
  const Contraction c = parse_contraction("C[a] = A[i,a,j] B[j,i]");
  CHECK(c.contracted == std::vector<std::string>{"i", "j"});
  CHECK(c.free_a == std::vector<std::string>{"a"});
  CHECK(c.free_b.empty());
}

TEST_CASE("matrix-matrix product classification") {
  const Contraction c = parse_contraction("C[a,b] = A[a,i] * B[i,b]");
  CHECK(c.contracted == std::vector<std::string>{"i"});
  CHECK(c.free_a == std::vector<std::string>{"a"});
  CHECK(c.free_b == std::vector<std::string>{"b"});
}

TEST_CASE("parse errors") {
  CHECK_THROWS_WITH_AS(parse_contraction("C[a] = A[i,i] B[i,a]"),
                       doctest::Contains("trace unsupported"), ParseError);
  CHECK_THROWS_WITH_AS(parse_contraction("C[a,b,z] = A[a,i] B[i,b]"),
                       doctest::Contains("unbound output index"), ParseError);
  CHECK_THROWS_WITH_AS(parse_contraction("C[a] = A[a,i,j] B[i]"),
                       doctest::Contains("dangling index"), ParseError);
  CHECK_THROWS_WITH_AS(parse_contraction("C[a,i] = A[a,i] B[i,a]"),
                       doctest::Contains("contracted index in output"), ParseError);
  CHECK_THROWS_WITH_AS(parse_contraction("C[a = A[a,i] B[i]"),
                       doctest::Contains("parse error at position"), ParseError);
}

TEST_CASE("parse-print-parse round trip") {
  const char* texts[] = {"C[a,b,c] = A[a,i] B[i,b,c]", "C[a] = A[i,a,j] B[j,i]",
                         "C[a,b,c] = A[i,j,a] B[j,b,i,c]"};
  for (const char* t : texts) {
    const Contraction c1 = parse_contraction(t);
    const Contraction c2 = parse_contraction(to_string(c1));
    CHECK(to_string(c1) == to_string(c2));
    CHECK(c1.contracted == c2.contracted);
    CHECK(c1.free_a == c2.free_a);
    CHECK(c1.free_b == c2.free_b);
  }
}

namespace {

SizeModel paper_sizes() {
  return parse_sizes("a=400,b=400,c=400,i=8");
}

MemoryRegion region(const Contraction& c, const std::string& tensor,
                    const std::vector<std::string>& kept) {
  if (tensor == "C") return region_of(c.c, kept);
  if (tensor == "A") return region_of(c.a, kept);
  return region_of(c.b, kept);
}

}  // namespace

TEST_CASE("region sizes from the worked example") {
  const Contraction c = parse_contraction("C[a,b,c] = A[a,i] B[i,b,c]");
  const SizeModel s = paper_sizes();
  CHECK(region_size(region(c, "B", {"i", "b"}), s) == 3200);  // B[:,:,c]
  CHECK(region_size(region(c, "A", {"i"}), s) == 8);          // A[a,:]
  CHECK(region_size(region(c, "C", {"b"}), s) == 400);        // C[a,:,c]
  CHECK(region_size(region(c, "A", {}), s) == 1);             // A[a,i]
}

TEST_CASE("join_region") {
  const Contraction c = parse_contraction("C[a,b,c] = A[a,i] B[i,b,c]");
  const MemoryRegion a_ai = region(c, "A", {"i"});
  CHECK(to_string(a_ai) == "A[a,:]");
  CHECK(to_string(join_region(a_ai, "a")) == "A[:,:]");
  const MemoryRegion b_slice = region(c, "B", {"i", "b"});
  CHECK(join_region(b_slice, "a") == b_slice);
  const MemoryRegion c_slice = region(c, "C", {"b"});
  CHECK(to_string(join_region(c_slice, "c")) == "C[a,:,:]");
  // idempotent
  CHECK(join_region(join_region(a_ai, "a"), "a") == join_region(a_ai, "a"));
  // commutative across distinct indices
  CHECK(join_region(join_region(c_slice, "a"), "c") == join_region(join_region(c_slice, "c"), "a"));
}

TEST_CASE("regions_total_size matches the paper's sums") {
  const Contraction c = parse_contraction("C[a,b,c] = A[a,i] B[i,b,c]");
  const SizeModel s = paper_sizes();
  const std::vector<MemoryRegion> m1 = {region(c, "A", {"a", "i"}), region(c, "B", {"i", "b"}),
                                        region(c, "C", {"b", "c"})};
  CHECK(regions_total_size(m1, s) == 166'400);
  const std::vector<MemoryRegion> m2 = {region(c, "A", {"a", "i"}),
                                        region(c, "B", {"i", "b", "c"}),
                                        region(c, "C", {"a", "b", "c"})};
  CHECK(regions_total_size(m2, s) == 65'283'200);
  CHECK(regions_total_size(std::vector<MemoryRegion>{}, s) == 0);
}

TEST_CASE("join never shrinks a region and region_size scales multiplicatively") {
  std::mt19937 rng(20240817);
  const Contraction c = parse_contraction("C[a,b,c] = A[i,j,a] B[j,b,i,c]");
  SizeModel s;
  for (int trial = 0; trial < 200; ++trial) {
    for (const auto& idx : c.universe) s.extent[idx] = 1 + rng() % 9;
    const Tensor& t = trial % 3 == 0 ? c.c : (trial % 3 == 1 ? c.a : c.b);
    std::vector<std::string> kept;
    for (const auto& d : t.dims)
      if (rng() % 2) kept.push_back(d);
    const MemoryRegion r = region_of(t, kept);
    const std::string l = c.universe[rng() % c.universe.size()];
    CHECK(region_size(join_region(r, l), s) >= region_size(r, s));

    if (!kept.empty()) {
      const std::string grown = kept[rng() % kept.size()];
      SizeModel s2 = s;
      s2.extent[grown] *= 3;
      CHECK(region_size(r, s2) == region_size(r, s) * 3);
    }
  }
}

TEST_CASE("size assignment parsing") {
  const SizeModel s = parse_sizes("a=b=c=400, i=8");
  CHECK(s.size_of("a") == 400);
  CHECK(s.size_of("c") == 400);
  CHECK(s.size_of("i") == 8);
  CHECK_THROWS_AS(parse_sizes("a=0"), ParseError);
  CHECK_THROWS_AS(parse_sizes("a="), ParseError);
  CHECK_THROWS_AS((void)s.size_of("z"), AnalysisError);
}

TEST_SUITE_END();
