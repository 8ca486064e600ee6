#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "tcpred/backend.hpp"
#include "tcpred/generator.hpp"

namespace tcpred::testing {

/// A well-formed random contraction: up to 2 contracted and up to 2 free
/// indices per input, shuffled dimension orders.
inline Contraction random_contraction(std::mt19937& rng) {
  for (;;) {
    const int nk = static_cast<int>(rng() % 3);
    const int nfa = static_cast<int>(rng() % 3);
    const int nfb = static_cast<int>(rng() % 3);
    if (nfa + nfb == 0 || nk + nfa == 0 || nk + nfb == 0) continue;
    static const char* free_names[] = {"a", "b", "c", "d"};
    static const char* contracted_names[] = {"i", "j"};
    std::vector<std::string> fa, fb, kk;
    int f = 0;
    for (int n = 0; n < nfa; ++n) fa.push_back(free_names[f++]);
    for (int n = 0; n < nfb; ++n) fb.push_back(free_names[f++]);
    for (int n = 0; n < nk; ++n) kk.push_back(contracted_names[n]);
    std::vector<std::string> ad = fa, bd = fb, cd;
    ad.insert(ad.end(), kk.begin(), kk.end());
    bd.insert(bd.end(), kk.begin(), kk.end());
    cd = fa;
    cd.insert(cd.end(), fb.begin(), fb.end());
    std::shuffle(ad.begin(), ad.end(), rng);
    std::shuffle(bd.begin(), bd.end(), rng);
    std::shuffle(cd.begin(), cd.end(), rng);
    auto tensor_text = [](const char* name, const std::vector<std::string>& dims) {
      std::string t = std::string(name) + "[";
      for (std::size_t d = 0; d < dims.size(); ++d) t += (d ? "," : "") + dims[d];
      return t + "]";
    };
    return parse_contraction(tensor_text("C", cd) + " = " + tensor_text("A", ad) + " " +
                             tensor_text("B", bd));
  }
}

inline SizeModel random_sizes(const Contraction& c, std::mt19937& rng, std::uint64_t lo,
                              std::uint64_t hi) {
  SizeModel s;
  for (const auto& idx : c.universe) s.extent[idx] = lo + rng() % (hi - lo + 1);
  return s;
}

/// Executes the algorithm on seeded buffers and returns the C tensor.
inline std::vector<double> run_and_collect(const Algorithm& a, const SizeModel& s,
                                           KernelBackend& backend, std::uint64_t seed) {
  const ExecPlan plan = make_plan(a, s);
  BufferSet buf = BufferSet::allocate(a, plan, 0, seed, 1ull << 30);
  run_plan(plan, buf, [&](const BoundKernel& bk) { backend.execute(bk); });
  const std::uint64_t n = plan.layouts[0].total;
  return std::vector<double>(buf.tensor(0), buf.tensor(0) + n);
}

/// The naive nested-loop result on identically seeded inputs.
inline std::vector<double> naive_and_collect(const Algorithm& a, const SizeModel& s,
                                             std::uint64_t seed) {
  const ExecPlan plan = make_plan(a, s);
  BufferSet buf = BufferSet::allocate(a, plan, 0, seed, 1ull << 30);
  std::vector<double> out(plan.layouts[0].total, 0.0);
  naive_contract(a.contraction, s, buf.tensor(1), buf.tensor(2), out.data());
  return out;
}

inline bool close_rel(const std::vector<double>& x, const std::vector<double>& y, double tol) {
  if (x.size() != y.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double scale = std::max({1.0, std::fabs(x[i]), std::fabs(y[i])});
    if (std::fabs(x[i] - y[i]) > tol * scale) return false;
  }
  return true;
}

}  // namespace tcpred::testing
