#include "tcpred/cache_sim.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <unordered_set>

namespace tcpred {

namespace {

std::vector<int> kernel_loop_slots(const Algorithm& a, const ExecPlan& p, int kernel_id) {
  std::vector<int> slots;
  for (const auto& name : enclosing_loops(a, kernel_id)) {
    auto it = std::find(p.loop_names.begin(), p.loop_names.end(), name);
    slots.push_back(static_cast<int>(it - p.loop_names.begin()));
  }
  return slots;
}

// Slot visit order within one invocation: inputs first, then the output.
std::vector<int> slot_visit_order(const PlannedKernel& k) {
  std::vector<int> order;
  for (int s = 1; s < static_cast<int>(k.slots.size()); ++s) order.push_back(s);
  order.push_back(0);
  return order;
}

}  // namespace

Trace trace_algorithm(const Algorithm& a, const ExecPlan& p, std::uint64_t max_accesses) {
  Trace t;
  t.by_kernel.resize(a.kernels.size());

  std::uint64_t expected = 0;
  for (const auto& k : p.kernels) {
    std::uint64_t per_call = 0;
    for (const auto& sp : k.slots) per_call += sp.elements;
    std::uint64_t loops = 1;
    for (const auto& name : enclosing_loops(a, k.id)) {
      auto it = std::find(p.loop_names.begin(), p.loop_names.end(), name);
      loops *= p.loop_extents[static_cast<std::size_t>(it - p.loop_names.begin())];
    }
    expected += per_call * loops;
  }
  if (expected > max_accesses)
    throw AnalysisError("trace would contain " + std::to_string(expected) +
                        " accesses (cap " + std::to_string(max_accesses) +
                        "); reduce the index extents");
  t.accesses.reserve(expected);

  std::vector<std::vector<int>> loop_slots;
  for (const auto& k : a.kernels) loop_slots.push_back(kernel_loop_slots(a, p, k.id));

  std::vector<std::uint64_t> coords(p.loop_names.size(), 0);
  std::vector<std::uint64_t> offs;

  std::function<void(const std::vector<PlanNode>&)> walk = [&](const std::vector<PlanNode>& body) {
    for (const auto& n : body) {
      if (n.loop_slot >= 0) {
        for (std::uint64_t v = 0; v < n.extent; ++v) {
          coords[static_cast<std::size_t>(n.loop_slot)] = v;
          walk(n.body);
        }
      } else {
        const PlannedKernel& k = p.kernels[static_cast<std::size_t>(n.kernel)];
        Invocation inv;
        inv.kernel = n.kernel;
        inv.ordinal = t.by_kernel[static_cast<std::size_t>(n.kernel)].size();
        for (int ls : loop_slots[static_cast<std::size_t>(n.kernel)])
          inv.coords.push_back(coords[static_cast<std::size_t>(ls)]);
        inv.first_access = t.accesses.size();
        for (int s : slot_visit_order(k)) {
          const SlotPlan& sp = k.slots[static_cast<std::size_t>(s)];
          slot_offsets(p, sp, coords, offs);
          for (std::uint64_t off : offs)
            t.accesses.push_back({static_cast<std::uint32_t>(sp.tensor), off, 1});
        }
        inv.n_accesses = t.accesses.size() - inv.first_access;
        t.by_kernel[static_cast<std::size_t>(n.kernel)].push_back(t.invocations.size());
        t.invocations.push_back(std::move(inv));
      }
    }
  };
  walk(p.root);
  return t;
}

bool LruSim::access(std::uint32_t space, std::uint64_t line) {
  const std::uint64_t k = key(space, line);
  auto it = pos_.find(k);
  if (it != pos_.end()) {
    lru_.splice(lru_.begin(), lru_, it->second);
    ++hits;
    return true;
  }
  lru_.push_front(k);
  pos_[k] = lru_.begin();
  if (pos_.size() > cap_) {
    pos_.erase(lru_.back());
    lru_.pop_back();
  }
  ++misses;
  return false;
}

bool LruSim::resident(std::uint32_t space, std::uint64_t line) const {
  return pos_.count(key(space, line)) != 0;
}

namespace {

struct Fenwick {
  std::vector<std::int64_t> tree;
  explicit Fenwick(std::size_t n) : tree(n + 1, 0) {}
  void add(std::size_t i, std::int64_t v) {
    for (++i; i < tree.size(); i += i & (~i + 1)) tree[i] += v;
  }
  std::int64_t prefix(std::size_t i) const {  // sum of [0, i]
    std::int64_t s = 0;
    for (++i; i > 0; i -= i & (~i + 1)) s += tree[i];
    return s;
  }
};

template <class F>
void for_each_line(const Access& a, std::uint64_t line_elems, F&& f) {
  const std::uint64_t first = a.offset / line_elems;
  const std::uint64_t last = (a.offset + a.width - 1) / line_elems;
  for (std::uint64_t l = first; l <= last; ++l) f(l);
}

}  // namespace

SimResult simulate(const Trace& t, const ExecPlan& p, const CacheConfig& cache) {
  cache.validate();
  SimResult res;
  const std::uint64_t line_elems = cache.line_elements();
  const std::uint64_t cap_lines = cache.capacity_lines();

  std::uint64_t total_lines = 0;
  for (const auto& a : t.accesses)
    for_each_line(a, line_elems, [&](std::uint64_t) { ++total_lines; });

  Fenwick fw(total_lines);
  std::unordered_map<std::uint64_t, std::uint64_t> last;  // line key -> position
  res.stack_lines.reserve(total_lines);

  // Slot attribution: walk invocations in parallel with the access stream.
  std::size_t inv_i = 0;
  std::uint64_t pos = 0;
  for (std::size_t ai = 0; ai < t.accesses.size(); ++ai) {
    std::pair<int, int> slot_key{-1, -1};
    while (inv_i < t.invocations.size() &&
           ai >= t.invocations[inv_i].first_access + t.invocations[inv_i].n_accesses)
      ++inv_i;
    if (inv_i < t.invocations.size() && ai >= t.invocations[inv_i].first_access) {
      const Invocation& inv = t.invocations[inv_i];
      const PlannedKernel& k = p.kernels[static_cast<std::size_t>(inv.kernel)];
      std::uint64_t rel = ai - inv.first_access;
      for (int s : slot_visit_order(k)) {
        const std::uint64_t n = k.slots[static_cast<std::size_t>(s)].elements;
        if (rel < n) {
          slot_key = {inv.kernel, s};
          break;
        }
        rel -= n;
      }
    }
    const Access& a = t.accesses[ai];
    for_each_line(a, line_elems, [&](std::uint64_t l) {
      const std::uint64_t k = (static_cast<std::uint64_t>(a.space) << 40) | l;
      auto it = last.find(k);
      std::uint64_t dist = UINT64_MAX;
      if (it != last.end()) {
        dist = static_cast<std::uint64_t>(fw.prefix(pos) - fw.prefix(it->second));
        fw.add(it->second, -1);
      }
      fw.add(pos, 1);
      last[k] = pos;
      res.stack_lines.push_back(dist);
      const bool hit = dist != UINT64_MAX && dist < cap_lines;
      ++res.line_accesses;
      hit ? ++res.hits : ++res.misses;
      if (slot_key.first >= 0) {
        SimSlotStats& st = res.per_slot[slot_key];
        ++st.line_accesses;
        hit ? ++st.hits : ++st.misses;
      }
      ++pos;
    });
  }
  return res;
}

namespace {

std::uint64_t elem_key(std::uint32_t space, std::uint64_t off) {
  return (static_cast<std::uint64_t>(space) << 40) | off;
}

}  // namespace

DistanceMeasurement measured_access_distance(const Algorithm& a, const ExecPlan& p,
                                             const Trace& t, int kernel_id, int slot,
                                             std::uint64_t ordinal) {
  DistanceMeasurement dm;
  const auto& kv = t.by_kernel[static_cast<std::size_t>(kernel_id)];
  if (ordinal >= kv.size()) throw AnalysisError("invocation ordinal out of range");
  const Invocation& inv = t.invocations[kv[ordinal]];
  const PlannedKernel& pk = p.kernels[static_cast<std::size_t>(kernel_id)];
  const std::vector<int> lslots = kernel_loop_slots(a, p, kernel_id);
  const std::vector<std::string> lnames = enclosing_loops(a, kernel_id);

  auto full_coords = [&](const Invocation& i2) {
    std::vector<std::uint64_t> c(p.loop_names.size(), 0);
    const std::vector<int>& ls = i2.kernel == kernel_id
                                     ? lslots
                                     : kernel_loop_slots(a, p, i2.kernel);
    for (std::size_t d = 0; d < ls.size(); ++d)
      c[static_cast<std::size_t>(ls[d])] = i2.coords[d];
    return c;
  };
  const std::uint64_t base = p.offset_of(pk.slots[static_cast<std::size_t>(slot)],
                                         full_coords(inv));

  std::int64_t prev = -1;
  for (std::int64_t q = static_cast<std::int64_t>(ordinal) - 1; q >= 0; --q) {
    const Invocation& cand = t.invocations[kv[static_cast<std::size_t>(q)]];
    if (p.offset_of(pk.slots[static_cast<std::size_t>(slot)], full_coords(cand)) == base) {
      prev = q;
      break;
    }
  }

  // Raw distinct elements strictly between the previous and current access
  // of this operand (from the trace start when there is no previous access).
  auto slot_run_start = [&](const Invocation& i2, int s) {
    std::uint64_t start = i2.first_access;
    for (int vs : slot_visit_order(pk)) {
      if (vs == s) break;
      start += pk.slots[static_cast<std::size_t>(vs)].elements;
    }
    return start;
  };
  {
    std::uint64_t from = 0;
    if (prev >= 0) {
      const Invocation& pi = t.invocations[kv[static_cast<std::size_t>(prev)]];
      from = slot_run_start(pi, slot) + pk.slots[static_cast<std::size_t>(slot)].elements;
    }
    const std::uint64_t to = slot_run_start(inv, slot);
    std::unordered_set<std::uint64_t> seen;
    for (std::uint64_t ai = from; ai < to; ++ai)
      seen.insert(elem_key(t.accesses[ai].space, t.accesses[ai].offset));
    dm.raw_elements = seen.size();
  }

  dm.found_previous = prev >= 0;
  int j = -1;
  if (prev >= 0) {
    const Invocation& pi = t.invocations[kv[static_cast<std::size_t>(prev)]];
    for (std::size_t d = 0; d < inv.coords.size(); ++d)
      if (pi.coords[d] != inv.coords[d]) {
        j = static_cast<int>(d);
        break;
      }
    if (j < 0) throw AnalysisError("duplicate invocation coordinates in trace");
  }
  dm.recurrence_level = j;

  // Region-join counting convention: each slot contributes the distinct
  // elements it touches across the current level-j block; slots of the
  // tracked kernel are excluded when the recurrence sits at its innermost
  // level (operands of one invocation count as simultaneous).
  const bool exclude_own =
      prev >= 0 ? j == static_cast<int>(inv.coords.size()) - 1 : lnames.empty();
  std::uint64_t conv = 0;
  std::vector<std::uint64_t> offs;
  for (const auto& k : a.kernels) {
    const std::vector<std::string> snames = enclosing_loops(a, k.id);
    std::vector<int> match;  // positions in snames that must match inv
    if (prev >= 0)
      for (int d = 0; d <= j; ++d) {
        auto it = std::find(snames.begin(), snames.end(), lnames[static_cast<std::size_t>(d)]);
        if (it != snames.end()) match.push_back(static_cast<int>(it - snames.begin()));
      }
    std::vector<std::uint64_t> want(match.size());
    if (prev >= 0)
      for (std::size_t d = 0, w = 0; d <= static_cast<std::size_t>(j); ++d) {
        auto it = std::find(snames.begin(), snames.end(), lnames[d]);
        if (it != snames.end()) want[w++] = inv.coords[d];
      }
    for (int s = 0; s < static_cast<int>(p.kernels[static_cast<std::size_t>(k.id)].slots.size());
         ++s) {
      if (exclude_own && k.id == kernel_id) continue;
      std::unordered_set<std::uint64_t> elems;
      for (std::uint64_t ii : t.by_kernel[static_cast<std::size_t>(k.id)]) {
        const Invocation& cand = t.invocations[ii];
        bool ok = true;
        for (std::size_t m = 0; m < match.size(); ++m)
          if (cand.coords[static_cast<std::size_t>(match[m])] != want[m]) ok = false;
        if (!ok) continue;
        slot_offsets(p, p.kernels[static_cast<std::size_t>(k.id)].slots[static_cast<std::size_t>(s)],
                     full_coords(cand), offs);
        for (std::uint64_t o : offs) elems.insert(o);
      }
      conv += elems.size();
    }
  }
  dm.convention_elements = conv;
  return dm;
}

TracePrefetchResult trace_prefetch_detect(const Algorithm& a, const ExecPlan& p,
                                          const CacheConfig& cache, int kernel_id, int slot) {
  TracePrefetchResult res;
  const std::vector<int> lslots = kernel_loop_slots(a, p, kernel_id);
  if (lslots.empty()) return res;
  const SlotPlan& sp =
      p.kernels[static_cast<std::size_t>(kernel_id)].slots[static_cast<std::size_t>(slot)];
  const std::uint64_t line_elems = cache.line_elements();

  // Walk consecutive iterations of the directly surrounding loop at every
  // combination of the outer loops (capped), comparing the operand's element
  // sets: prefetch shows as the leading line being shared with, or directly
  // adjacent to, the previous iteration's elements.
  std::vector<std::uint64_t> extents;
  for (int ls : lslots) extents.push_back(p.loop_extents[static_cast<std::size_t>(ls)]);
  std::vector<std::uint64_t> idx(extents.size(), 0);
  std::vector<std::uint64_t> coords(p.loop_names.size(), 0);
  std::vector<std::uint64_t> cur, prev;
  std::uint64_t pairs = 0;
  for (;;) {
    if (pairs >= 4096) break;
    if (idx.back() >= 1) {
      ++pairs;
      for (std::size_t d = 0; d < idx.size(); ++d)
        coords[static_cast<std::size_t>(lslots[d])] = idx[d];
      slot_offsets(p, sp, coords, cur);
      coords[static_cast<std::size_t>(lslots.back())] = idx.back() - 1;
      slot_offsets(p, sp, coords, prev);
      if (cur != prev) {
        res.varies = true;
        const std::uint64_t e0 = *std::min_element(cur.begin(), cur.end());
        std::unordered_set<std::uint64_t> prev_elems(prev.begin(), prev.end());
        bool share = false;
        for (std::uint64_t pe : prev) share = share || pe / line_elems == e0 / line_elems;
        const bool adjacent = e0 > 0 && prev_elems.count(e0 - 1) != 0;
        res.detected = res.detected || share || adjacent;
      }
    }
    std::size_t d = idx.size();
    while (d > 0 && ++idx[d - 1] == extents[d - 1]) idx[--d] = 0;
    if (d == 0) break;
  }
  return res;
}

void dump_trace_binary(const Trace& t, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw AnalysisError("cannot open '" + path + "' for writing");
  const char magic[8] = {'T', 'C', 'P', 'T', 'R', 'C', '0', '1'};
  out.write(magic, 8);
  std::uint64_t n = t.accesses.size();
  out.write(reinterpret_cast<const char*>(&n), 8);
  std::size_t inv_i = 0;
  for (std::size_t ai = 0; ai < t.accesses.size(); ++ai) {
    while (inv_i < t.invocations.size() &&
           ai >= t.invocations[inv_i].first_access + t.invocations[inv_i].n_accesses)
      ++inv_i;
    const std::uint64_t tag = inv_i < t.invocations.size() ? t.invocations[inv_i].ordinal : 0;
    const Access& acc = t.accesses[ai];
    out.write(reinterpret_cast<const char*>(&acc.space), 4);
    out.write(reinterpret_cast<const char*>(&acc.width), 4);
    out.write(reinterpret_cast<const char*>(&acc.offset), 8);
    out.write(reinterpret_cast<const char*>(&tag), 8);
  }
}

void dump_trace_text(const Trace& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw AnalysisError("cannot open '" + path + "' for writing");
  std::size_t inv_i = 0;
  for (std::size_t ai = 0; ai < t.accesses.size(); ++ai) {
    while (inv_i < t.invocations.size() &&
           ai >= t.invocations[inv_i].first_access + t.invocations[inv_i].n_accesses)
      ++inv_i;
    const Access& acc = t.accesses[ai];
    out << acc.space << ' ' << acc.offset << ' ' << acc.width << ' '
        << (inv_i < t.invocations.size() ? t.invocations[inv_i].ordinal : 0) << '\n';
  }
}

std::map<std::pair<std::uint32_t, std::uint64_t>, bool> kernel_line_profile_in_trace(
    const Trace& t, const CacheConfig& cache, std::uint64_t cap_lines, std::uint64_t inv_index,
    bool prior_execution) {
  const std::uint64_t line_elems = cache.line_elements();
  LruSim lru(cap_lines);
  auto feed = [&](std::uint64_t from, std::uint64_t to) {
    for (std::uint64_t ai = from; ai < to; ++ai)
      for_each_line(t.accesses[ai], line_elems,
                    [&](std::uint64_t l) { lru.access(t.accesses[ai].space, l); });
  };
  if (prior_execution) feed(0, t.accesses.size());
  const Invocation& inv = t.invocations[inv_index];
  feed(0, inv.first_access);
  std::map<std::pair<std::uint32_t, std::uint64_t>, bool> profile;
  for (std::uint64_t ai = inv.first_access; ai < inv.first_access + inv.n_accesses; ++ai) {
    const Access& a = t.accesses[ai];
    for_each_line(a, line_elems, [&](std::uint64_t l) {
      const bool hit = lru.access(a.space, l);
      profile.emplace(std::make_pair(a.space, l), hit);  // first touch decides
    });
  }
  return profile;
}

std::map<std::pair<std::uint32_t, std::uint64_t>, bool> kernel_line_profile_after_setup(
    const Algorithm& a, const ExecPlan& p, const SetupList& sl, int kernel_id,
    const std::vector<std::uint64_t>& coords, const CacheConfig& cache,
    std::uint64_t cap_lines) {
  const std::uint64_t line_elems = cache.line_elements();
  LruSim lru(cap_lines);
  std::uint64_t remote_line = 0;
  std::vector<std::uint64_t> offs;
  if (!sl.omitted) {
    for (const auto& act : sl.actions) {
      if (act.kind == ActionKind::touch_remote) {
        const std::uint64_t lines = (act.size + line_elems - 1) / line_elems;
        for (std::uint64_t l = 0; l < lines; ++l) lru.access(kRemoteSpace, remote_line++);
      } else {
        std::uint32_t space = 0;
        region_offsets(a, p, act.region, coords, line_elems, space, offs);
        for (std::uint64_t off : offs) lru.access(space, off / line_elems);
      }
    }
  }
  const PlannedKernel& pk = p.kernels[static_cast<std::size_t>(kernel_id)];
  std::map<std::pair<std::uint32_t, std::uint64_t>, bool> profile;
  for (int s : slot_visit_order(pk)) {
    const SlotPlan& sp = pk.slots[static_cast<std::size_t>(s)];
    slot_offsets(p, sp, coords, offs);
    for (std::uint64_t off : offs) {
      const bool hit = lru.access(static_cast<std::uint32_t>(sp.tensor), off / line_elems);
      profile.emplace(std::make_pair(static_cast<std::uint32_t>(sp.tensor), off / line_elems),
                      hit);
    }
  }
  return profile;
}

}  // namespace tcpred
