#include "tcpred/analysis.hpp"

#include <algorithm>
#include <map>

namespace tcpred {

namespace {

struct KernelCtx {
  // bodies[d] is the body at nesting depth d on the way to the kernel
  // (bodies[0] = root body); child_pos[d] is the position of the next path
  // element inside bodies[d]; loops[d] is the loop whose body is bodies[d+1].
  std::vector<const std::vector<Node>*> bodies;
  std::vector<int> child_pos;
  std::vector<const Node*> loops;
};

bool find_ctx(const std::vector<Node>& body, int kernel_id, KernelCtx& ctx) {
  for (std::size_t i = 0; i < body.size(); ++i) {
    const Node& n = body[i];
    if (n.is_loop()) {
      ctx.bodies.push_back(&body);
      ctx.child_pos.push_back(static_cast<int>(i));
      ctx.loops.push_back(&n);
      if (find_ctx(n.body, kernel_id, ctx)) return true;
      ctx.bodies.pop_back();
      ctx.child_pos.pop_back();
      ctx.loops.pop_back();
    } else if (n.kernel_id == kernel_id) {
      ctx.bodies.push_back(&body);
      ctx.child_pos.push_back(static_cast<int>(i));
      return true;
    }
  }
  return false;
}

KernelCtx kernel_ctx(const Algorithm& a, int kernel_id) {
  KernelCtx ctx;
  if (!find_ctx(a.root, kernel_id, ctx))
    throw AnalysisError("kernel not found in loop nest");
  return ctx;
}

using MMap = std::map<SlotKey, MemoryRegion>;

MemoryRegion join_all(MemoryRegion r, const std::vector<std::string>& loops) {
  for (const auto& l : loops) r = join_region(std::move(r), l);
  return r;
}

void collect_node(const Algorithm& a, const Node& n, std::vector<std::string>& joins, MMap& m) {
  if (n.is_loop()) {
    joins.push_back(n.loop);
    for (const auto& ch : n.body) collect_node(a, ch, joins, m);
    joins.pop_back();
  } else {
    const KernelCall& k = a.kernels[static_cast<std::size_t>(n.kernel_id)];
    for (int s = 0; s < k.num_slots(); ++s)
      m[{n.kernel_id, s}] = join_all(k.slot(s).region, joins);
  }
}

// Operands of every kernel in `body` except the element at `skip`, each
// joined across its own inner loops only.
void collect_siblings(const Algorithm& a, const std::vector<Node>& body, int skip, MMap& m) {
  std::vector<std::string> joins;
  for (std::size_t i = 0; i < body.size(); ++i)
    if (static_cast<int>(i) != skip) collect_node(a, body[i], joins, m);
}

std::uint64_t m_total(const MMap& m, const SizeModel& s) {
  std::uint64_t total = 0;
  for (const auto& [key, region] : m) {
    std::uint64_t sz = region_size(region, s);
    if (__builtin_add_overflow(total, sz, &total)) throw AnalysisError("access distance overflow");
  }
  return total;
}

OperandAnalysis finish(const Algorithm&, SlotKey key, const MemoryRegion& op, const MMap& m,
                       const SizeModel& s, bool root, const AnalysisOptions& opt) {
  OperandAnalysis oa;
  oa.slot = key;
  oa.operand = op;
  oa.size = region_size(op, s);
  for (const auto& [k, r] : m) oa.m.push_back({k, r});
  oa.root_case = root;
  oa.cold = root && opt.cold_root;
  oa.distance = m_total(m, s);
  return oa;
}

// The shared upward walk.  `start_depth` is the body depth to resume from
// (L = at the kernel itself); M and R carry any pre-seeded state.
OperandAnalysis back_traverse(const Algorithm& a, const KernelCtx& ctx, SlotKey key,
                              const MemoryRegion& operand, MemoryRegion r, MMap m,
                              int start_depth, const SizeModel& s, const AnalysisOptions& opt) {
  const int depth = static_cast<int>(ctx.loops.size());
  for (int d = start_depth; d >= 1; --d) {
    const Node& surrounding = *ctx.loops[static_cast<std::size_t>(d - 1)];
    collect_siblings(a, *ctx.bodies[static_cast<std::size_t>(d)],
                     ctx.child_pos[static_cast<std::size_t>(d)], m);
    if (!r.depends_on(surrounding.loop))  // case 1: same region one iteration ago
      return finish(a, key, operand, m, s, false, opt);
    // case 2: everything under the loop was accessed since the last access;
    // join across the crossed loop and keep walking up.
    {
      std::vector<std::string> joins{surrounding.loop};
      MMap under;
      for (const auto& ch : surrounding.body) collect_node(a, ch, joins, under);
      for (auto& [k, reg] : under) m[k] = std::move(reg);
    }
    r = join_region(std::move(r), surrounding.loop);
  }
  (void)depth;
  collect_siblings(a, *ctx.bodies[0], ctx.child_pos[0], m);
  return finish(a, key, operand, m, s, true, opt);  // case 3: the AST's root
}

}  // namespace

OperandAnalysis access_distance(const Algorithm& a, int kernel_id, int slot, const SizeModel& s,
                                const AnalysisOptions& opt) {
  const KernelCtx ctx = kernel_ctx(a, kernel_id);
  const KernelCall& k = a.kernels[static_cast<std::size_t>(kernel_id)];
  if (slot < 0 || slot >= k.num_slots()) throw AnalysisError("operand not found in kernel");
  const MemoryRegion& op = k.slot(slot).region;
  return back_traverse(a, ctx, {kernel_id, slot}, op, op, {},
                       static_cast<int>(ctx.loops.size()), s, opt);
}

OperandAnalysis access_distance_first_iteration(const Algorithm& a, int kernel_id, int slot,
                                                const std::string& loop, const SizeModel& s,
                                                const AnalysisOptions& opt) {
  const KernelCtx ctx = kernel_ctx(a, kernel_id);
  const KernelCall& k = a.kernels[static_cast<std::size_t>(kernel_id)];
  if (slot < 0 || slot >= k.num_slots()) throw AnalysisError("operand not found in kernel");
  int j = -1;
  for (std::size_t d = 0; d < ctx.loops.size(); ++d)
    if (ctx.loops[d]->loop == loop) j = static_cast<int>(d);
  if (j < 0) throw AnalysisError("loop '" + loop + "' does not enclose the kernel");

  // The start node is the loop itself: M holds everything under it joined
  // across it, and the tracked region enters pre-joined the same way.
  MMap m;
  {
    std::vector<std::string> joins{ctx.loops[static_cast<std::size_t>(j)]->loop};
    for (const auto& ch : ctx.loops[static_cast<std::size_t>(j)]->body)
      collect_node(a, ch, joins, m);
  }
  MemoryRegion r = k.slot(slot).region;
  for (std::size_t d = static_cast<std::size_t>(j); d < ctx.loops.size(); ++d)
    r = join_region(std::move(r), ctx.loops[d]->loop);
  return back_traverse(a, ctx, {kernel_id, slot}, k.slot(slot).region, std::move(r), std::move(m),
                       j, s, opt);
}

void detect_prefetch(const Algorithm& a, int kernel_id, const SizeModel& s,
                     const CacheConfig& cache, OperandAnalysis& oa) {
  oa.prefetched = false;
  oa.flavor = PrefetchFlavor::none;
  const KernelCtx ctx = kernel_ctx(a, kernel_id);
  if (ctx.loops.empty()) return;
  const std::string& inner = ctx.loops.back()->loop;
  const MemoryRegion& r = oa.operand;
  int m = -1;
  for (std::size_t d = 0; d < r.sel.size(); ++d)
    if (r.sel[d].kind == Sel::bound && r.sel[d].index == inner) m = static_cast<int>(d);
  if (m < 0) return;  // does not vary across the directly surrounding loop

  const std::uint64_t line = cache.line_elements();
  bool prefix_entire = true;
  std::uint64_t stride = 1;
  for (int d = 0; d < m; ++d) {
    const std::uint64_t extent = s.size_of(r.dims[static_cast<std::size_t>(d)]);
    if (r.sel[static_cast<std::size_t>(d)].kind != Sel::full && extent != 1)
      prefix_entire = false;
    stride *= extent;
  }
  // Consecutive iterations step `stride` elements: contiguous streaming when
  // the whole prefix is swept, line sharing when the step stays inside a line.
  if (!(prefix_entire || stride <= line)) return;
  oa.prefetched = true;
  oa.flavor = stride < line ? PrefetchFlavor::line_sharing : PrefetchFlavor::streaming;

  MMap siblings;
  collect_siblings(a, *ctx.bodies.back(), ctx.child_pos.back(), siblings);
  oa.prefetch_distance = m_total(siblings, s);

  oa.prefetch_touch = r;
  if (!r.sel.empty() && r.sel[0].kind == Sel::full && s.size_of(r.dims[0]) > line)
    oa.prefetch_touch.sel[0] = {Sel::first_line, {}};
}

Stage parse_stage(const std::string& name) {
  if (name == "repeated") return Stage::repeated;
  if (name == "distance") return Stage::distance;
  if (name == "prefetch") return Stage::prefetch;
  if (name == "failure") return Stage::failure;
  if (name == "first-iter" || name == "first_iter" || name == "full") return Stage::first_iter;
  throw AnalysisError("unknown stage '" + name + "'");
}

const char* stage_name(Stage st) {
  switch (st) {
    case Stage::repeated: return "repeated";
    case Stage::distance: return "distance";
    case Stage::prefetch: return "prefetch";
    case Stage::failure: return "failure";
    case Stage::first_iter: return "first-iter";
  }
  return "?";
}

std::string VariantLabel::text() const {
  switch (kind) {
    case steady: return "steady";
    case prefetch_failure: return "prefetch-failure";
    case first_iteration: return "first-iteration(" + loop + ")";
  }
  return "?";
}

std::vector<KernelVariants> enumerate_variants(const Algorithm& a, const SizeModel& s,
                                               const CacheConfig& cache, Stage stage,
                                               double threshold, const AnalysisOptions& opt) {
  cache.validate();
  std::vector<KernelVariants> out;
  for (const auto& k : a.kernels) {
    KernelVariants kv;
    kv.kernel = k.id;
    kv.loops = enclosing_loops(a, k.id);
    kv.invocations = kernel_invocations(a, k.id, s);

    std::vector<OperandAnalysis> steady;
    for (int sl = 0; sl < k.num_slots(); ++sl) {
      OperandAnalysis oa = access_distance(a, k.id, sl, s, opt);
      if (stage == Stage::repeated) {
        oa.m.clear();
        oa.distance = 0;
        oa.root_case = false;
        oa.cold = false;
      }
      if (stage >= Stage::prefetch) detect_prefetch(a, k.id, s, cache, oa);
      steady.push_back(std::move(oa));
    }

    std::vector<BenchmarkVariant> extra;
    if (stage >= Stage::failure && !kv.loops.empty()) {
      const bool sharing = std::any_of(steady.begin(), steady.end(), [](const OperandAnalysis& o) {
        return o.prefetched && o.flavor == PrefetchFlavor::line_sharing;
      });
      const std::uint64_t inner_extent = s.size_of(kv.loops.back());
      std::uint64_t w = inner_extent / cache.line_elements();
      for (std::size_t d = 0; d + 1 < kv.loops.size(); ++d) w *= s.size_of(kv.loops[d]);
      if (sharing && w > 0) {
        BenchmarkVariant v;
        v.label.kind = VariantLabel::prefetch_failure;
        v.per_operand = steady;
        for (auto& oa : v.per_operand)
          if (oa.prefetched && oa.flavor == PrefetchFlavor::line_sharing) {
            oa.prefetched = false;
            oa.flavor = PrefetchFlavor::none;
          }
        v.weight = w;
        extra.push_back(std::move(v));
      }
    }

    if (stage == Stage::first_iter && !kv.loops.empty()) {
      // Innermost outward, stopping at the first loop whose first iterations
      // fall below the threshold share of invocations.
      int j_min = static_cast<int>(kv.loops.size());
      for (int j = static_cast<int>(kv.loops.size()) - 1; j >= 0; --j) {
        const double share = 1.0 / static_cast<double>(s.size_of(kv.loops[static_cast<std::size_t>(j)]));
        if (share > threshold)
          j_min = j;
        else
          break;
      }
      auto outer_product = [&](int j) {
        std::uint64_t p = 1;
        for (int d = 0; d < j; ++d) p *= s.size_of(kv.loops[static_cast<std::size_t>(d)]);
        return p;
      };
      std::vector<BenchmarkVariant> fi;
      for (int j = static_cast<int>(kv.loops.size()) - 1; j >= j_min; --j) {
        BenchmarkVariant v;
        v.label.kind = VariantLabel::first_iteration;
        v.label.loop = kv.loops[static_cast<std::size_t>(j)];
        for (int sl = 0; sl < k.num_slots(); ++sl)
          v.per_operand.push_back(
              access_distance_first_iteration(a, k.id, sl, v.label.loop, s, opt));
        // Claims nest: a first iteration of an outer loop subsumes the first
        // iterations of everything inside it.
        v.weight = j == j_min ? outer_product(j) : outer_product(j) - outer_product(j - 1);
        if (v.weight > 0) fi.push_back(std::move(v));
      }
      for (auto& v : fi) extra.push_back(std::move(v));
    }

    std::uint64_t claimed = 0;
    for (const auto& v : extra) claimed += v.weight;
    if (claimed > kv.invocations)
      throw AnalysisError("internal: variant weights exceed invocation count for kernel " +
                          std::to_string(k.id));
    BenchmarkVariant sv;
    sv.label.kind = VariantLabel::steady;
    sv.per_operand = std::move(steady);
    sv.weight = kv.invocations - claimed;
    kv.variants.push_back(std::move(sv));
    for (auto& v : extra) kv.variants.push_back(std::move(v));
    out.push_back(std::move(kv));
  }
  return out;
}

}  // namespace tcpred
