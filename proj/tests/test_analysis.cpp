#include <doctest.h>

#include <set>

#include "test_util.hpp"
#include "tcpred/analysis.hpp"
#include "tcpred/cache_sim.hpp"

using namespace tcpred;

TEST_SUITE_BEGIN("analysis");

namespace {

const Algorithm& find_algo(const std::vector<Algorithm>& algos, const std::string& name) {
  for (const auto& a : algos)
    if (a.name == name) return a;
  REQUIRE(false);
  return algos.front();
}

std::set<std::string> m_texts(const OperandAnalysis& oa) {
  std::set<std::string> out;
  for (const auto& e : oa.m) out.insert(to_string(e.region));
  return out;
}

struct Fixture {
  std::vector<Algorithm> algos =
      generate_algorithms(parse_contraction("C[a,b,c] = A[a,i] B[i,b,c]"));
  SizeModel s = parse_sizes("a=400,b=400,c=400,i=8");
  CacheConfig cache;  // 6 MB, 64 B lines, 8 B elements
};

}  // namespace

TEST_CASE("ca_gemv access distances reproduce the worked example") {
  Fixture f;
  const Algorithm& ca = find_algo(f.algos, "ca_gemv");
  // slot 0 = C[a,:,c], slot 1 = A[a,:], slot 2 = B[:,:,c]
  const OperandAnalysis b = access_distance(ca, ca.main_kernel, 2, f.s);
  CHECK(b.distance == 0);
  CHECK(b.m.empty());
  CHECK(!b.root_case);
  CHECK(b.size == 3200);

  const OperandAnalysis a = access_distance(ca, ca.main_kernel, 1, f.s);
  CHECK(a.distance == 166'400);
  CHECK(a.size == 8);
  CHECK(!a.root_case);
  CHECK(m_texts(a) == std::set<std::string>{"A[:,:]", "B[:,:,c]", "C[:,:,c]"});

  const OperandAnalysis c = access_distance(ca, ca.main_kernel, 0, f.s);
  CHECK(c.distance == 65'283'200);
  CHECK(c.size == 400);
  CHECK(c.root_case);
  CHECK(m_texts(c) == std::set<std::string>{"A[:,:]", "B[:,:,:]", "C[:,:,:]"});
}

TEST_CASE("cold-root option marks root-case operands flushed") {
  Fixture f;
  const Algorithm& ca = find_algo(f.algos, "ca_gemv");
  AnalysisOptions opt;
  opt.cold_root = true;
  CHECK(access_distance(ca, ca.main_kernel, 0, f.s, opt).cold);
  CHECK(!access_distance(ca, ca.main_kernel, 1, f.s, opt).cold);
}

TEST_CASE("prefetch detection on the example algorithms") {
  Fixture f;
  const Algorithm& ca = find_algo(f.algos, "ca_gemv");
  for (int slot : {0, 1}) {  // C[a,:,c] and A[a,:]
    OperandAnalysis oa = access_distance(ca, ca.main_kernel, slot, f.s);
    detect_prefetch(ca, ca.main_kernel, f.s, f.cache, oa);
    CHECK(oa.prefetched);
    CHECK(oa.flavor == PrefetchFlavor::line_sharing);
    CHECK(oa.prefetch_distance == 0);
    // extension 1 along the first dimension: the touch is the whole operand
    CHECK(oa.prefetch_touch == oa.operand);
  }
  OperandAnalysis b = access_distance(ca, ca.main_kernel, 2, f.s);
  detect_prefetch(ca, ca.main_kernel, f.s, f.cache, b);
  CHECK(!b.prefetched);  // does not vary across the inner loop

  const Algorithm& bi = find_algo(f.algos, "bi_ger");
  OperandAnalysis x = access_distance(bi, bi.main_kernel, 1, f.s);  // A[:,i]
  detect_prefetch(bi, bi.main_kernel, f.s, f.cache, x);
  CHECK(x.prefetched);
  CHECK(x.flavor == PrefetchFlavor::streaming);  // consecutive columns
  // streaming touch clips to one cache line along the first dimension
  CHECK(region_size(x.prefetch_touch, f.s, f.cache.line_elements()) == 8);
  OperandAnalysis y = access_distance(bi, bi.main_kernel, 2, f.s);  // B[i,b,:]
  detect_prefetch(bi, bi.main_kernel, f.s, f.cache, y);
  CHECK(y.prefetched);
  CHECK(y.flavor == PrefetchFlavor::line_sharing);

  const Algorithm& ci = find_algo(f.algos, "ci_ger");
  OperandAnalysis ax = access_distance(ci, ci.main_kernel, 1, f.s);  // A[:,i]
  detect_prefetch(ci, ci.main_kernel, f.s, f.cache, ax);
  CHECK(ax.prefetched);
  CHECK(ax.flavor == PrefetchFlavor::streaming);
}

TEST_CASE("prefetch flags are invariant under size changes above line size") {
  std::mt19937 rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const Contraction c = testing::random_contraction(rng);
    const SizeModel s1 = testing::random_sizes(c, rng, 9, 16);
    const SizeModel s2 = testing::random_sizes(c, rng, 17, 64);
    CacheConfig cache;
    for (const auto& a : generate_algorithms(c)) {
      for (int slot = 0; slot < a.main().num_slots(); ++slot) {
        OperandAnalysis o1 = access_distance(a, a.main_kernel, slot, s1);
        OperandAnalysis o2 = access_distance(a, a.main_kernel, slot, s2);
        detect_prefetch(a, a.main_kernel, s1, cache, o1);
        detect_prefetch(a, a.main_kernel, s2, cache, o2);
        CHECK(o1.prefetched == o2.prefetched);
        CHECK(o1.flavor == o2.flavor);
      }
    }
  }
}

TEST_CASE("a dimension fitting within one cache line enables line sharing") {
  // A[:,i] varies across i (second dimension of A); with a < line elements
  // consecutive vectors share lines, with a >= line elements they stream.
  Fixture f;
  const Algorithm& ci = find_algo(f.algos, "ci_ger");
  SizeModel tiny = parse_sizes("a=4,b=400,c=400,i=8");
  OperandAnalysis oa = access_distance(ci, ci.main_kernel, 1, tiny);
  detect_prefetch(ci, ci.main_kernel, tiny, f.cache, oa);
  CHECK(oa.prefetched);
  CHECK(oa.flavor == PrefetchFlavor::line_sharing);
}

TEST_CASE("variant weights for ca_gemv: steady to failure is 7:1") {
  Fixture f;
  const Algorithm& ca = find_algo(f.algos, "ca_gemv");
  const auto plans = enumerate_variants(ca, f.s, f.cache);
  REQUIRE(plans.size() == 1);
  const KernelVariants& kv = plans[0];
  CHECK(kv.invocations == 160'000);
  REQUIRE(kv.variants.size() == 2);  // inner loop has 400 iterations: no first-iteration variant
  CHECK(kv.variants[0].label.kind == VariantLabel::steady);
  CHECK(kv.variants[0].weight == 140'000);
  CHECK(kv.variants[1].label.kind == VariantLabel::prefetch_failure);
  CHECK(kv.variants[1].weight == 20'000);
  for (const auto& oa : kv.variants[1].per_operand) CHECK(!oa.prefetched);
}

TEST_CASE("ci_ger produces a first-iteration variant for the short inner loop") {
  Fixture f;
  const Algorithm& ci = find_algo(f.algos, "ci_ger");
  const auto plans = enumerate_variants(ci, f.s, f.cache);
  const KernelVariants& kv = plans[0];
  CHECK(kv.invocations == 3200);
  bool found = false;
  std::uint64_t total = 0;
  for (const auto& v : kv.variants) {
    total += v.weight;
    if (v.label.kind == VariantLabel::first_iteration) {
      found = true;
      CHECK(v.label.loop == "i");
      CHECK(v.weight == 400);
      for (const auto& oa : v.per_operand) CHECK(!oa.prefetched);
    }
  }
  CHECK(found);
  CHECK(total == kv.invocations);
}

TEST_CASE("first-iteration distances of ci_ger follow the modified start") {
  Fixture f;
  const Algorithm& ci = find_algo(f.algos, "ci_ger");
  // slot 1 = A[:,i]: joined across i gives A[:,:], independent of c, so the
  // distance is the seeded block footprint.
  const OperandAnalysis a = access_distance_first_iteration(ci, ci.main_kernel, 1, "i", f.s);
  CHECK(a.distance == 160'000 + 3'200 + 3'200);
  // slot 0 = C[:,:,c]: varies across c, walks to the root.
  const OperandAnalysis c = access_distance_first_iteration(ci, ci.main_kernel, 0, "i", f.s);
  CHECK(c.root_case);
  CHECK(c.distance == 64'000'000 + 1'280'000 + 3'200);
}

TEST_CASE("b_gemm at large extents has only the steady variant") {
  Fixture f;
  const Algorithm& b = find_algo(f.algos, "b_gemm");
  SizeModel s = parse_sizes("a=128,b=128,c=128,i=8");
  const auto plans = enumerate_variants(b, s, f.cache);
  REQUIRE(plans[0].variants.size() == 1);
  CHECK(plans[0].variants[0].label.kind == VariantLabel::steady);
  CHECK(plans[0].variants[0].weight == 128);
}

TEST_CASE("copy kernels get their own variant plans") {
  const auto algos2 = generate_algorithms(parse_contraction("C[a] = A[i,a,j] B[j,i]"));
  const Algorithm& ip = find_algo(algos2, "i'_gemv");
  SizeModel s = parse_sizes("a=64,i=8,j=64");
  CacheConfig cache;
  const auto plans = enumerate_variants(ip, s, cache);
  REQUIRE(plans.size() == 2);  // gemv + copy
  CHECK(plans[0].kernel == ip.main_kernel);
  CHECK(plans[0].invocations == 8);
  CHECK(plans[1].invocations == 8);
  for (const auto& kv : plans) {
    std::uint64_t total = 0;
    for (const auto& v : kv.variants) total += v.weight;
    CHECK(total == kv.invocations);
  }
}

TEST_CASE("weights partition the invocation count on random inputs") {
  std::mt19937 rng(5);
  CacheConfig cache;
  cache.capacity_bytes = 1 << 16;
  cache.line_bytes = 32;  // 4-element lines so failure variants fire at small extents
  for (int trial = 0; trial < 8; ++trial) {
    const Contraction c = testing::random_contraction(rng);
    const SizeModel s = testing::random_sizes(c, rng, 2, 6);
    for (const auto& a : generate_algorithms(c)) {
      for (const auto& kv : enumerate_variants(a, s, cache)) {
        std::uint64_t total = 0;
        for (const auto& v : kv.variants) total += v.weight;
        CHECK(total == kv.invocations);
      }
    }
  }
}

TEST_CASE("access distance is monotone in every index size") {
  std::mt19937 rng(29);
  for (int trial = 0; trial < 6; ++trial) {
    const Contraction c = testing::random_contraction(rng);
    const SizeModel s = testing::random_sizes(c, rng, 2, 6);
    for (const auto& a : generate_algorithms(c)) {
      for (int slot = 0; slot < a.main().num_slots(); ++slot) {
        const std::uint64_t base = access_distance(a, a.main_kernel, slot, s).distance;
        for (const auto& idx : c.universe) {
          SizeModel grown = s;
          grown.extent[idx] += 3;
          CHECK(access_distance(a, a.main_kernel, slot, grown).distance >= base);
        }
      }
    }
  }
}

TEST_CASE("stage gating") {
  Fixture f;
  const Algorithm& ca = find_algo(f.algos, "ca_gemv");
  const auto repeated = enumerate_variants(ca, f.s, f.cache, Stage::repeated);
  REQUIRE(repeated[0].variants.size() == 1);
  for (const auto& oa : repeated[0].variants[0].per_operand) {
    CHECK(oa.distance == 0);
    CHECK(!oa.prefetched);
  }
  const auto distance = enumerate_variants(ca, f.s, f.cache, Stage::distance);
  REQUIRE(distance[0].variants.size() == 1);
  CHECK(distance[0].variants[0].per_operand[0].distance == 65'283'200);
  CHECK(!distance[0].variants[0].per_operand[0].prefetched);
  const auto prefetch = enumerate_variants(ca, f.s, f.cache, Stage::prefetch);
  REQUIRE(prefetch[0].variants.size() == 1);
  CHECK(prefetch[0].variants[0].per_operand[0].prefetched);
  const auto failure = enumerate_variants(ca, f.s, f.cache, Stage::failure);
  CHECK(failure[0].variants.size() == 2);
}

TEST_SUITE_END();
