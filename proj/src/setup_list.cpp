#include "tcpred/setup_list.hpp"

#include <algorithm>
#include <sstream>

namespace tcpred {

std::uint64_t truncation_limit(const CacheConfig& cache) {
  return 5 * cache.capacity_elements() / 4;
}

SetupList build_setup(const std::vector<OperandAnalysis>& ops, const SizeModel& s,
                      const CacheConfig& cache) {
  const std::uint64_t limit = truncation_limit(cache);
  struct Entry {
    std::uint64_t distance;
    SetupAction action;
  };
  std::vector<Entry> entries;
  for (const auto& oa : ops) {
    Entry e;
    e.distance = oa.cold ? limit + 1 : oa.effective_distance();
    e.action.kind = oa.prefetched ? ActionKind::touch_prefetch_line : ActionKind::touch_operand;
    e.action.region = oa.prefetched ? oa.prefetch_touch : oa.operand;
    e.action.slot = oa.slot;
    e.action.size = region_size(e.action.region, s, cache.line_elements());
    entries.push_back(std::move(e));
  }
  // Descending distance; ties keep kernel-signature order (output, inputs).
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& x, const Entry& y) {
    return x.distance != y.distance ? x.distance > y.distance : x.action.slot < y.action.slot;
  });

  // Assemble back to front so each remote filler is the gap between the
  // running suffix total and the next operand's distance.
  SetupList sl;
  std::vector<SetupAction> rev;
  std::uint64_t suffix = 0;
  for (auto it = entries.rbegin(); it != entries.rend();) {
    const std::uint64_t d = it->distance;
    // Equal-distance touches are consumed together below, so a later group
    // whose distance falls short of the running total is an analysis bug.
    if (d < suffix)
      throw AnalysisError("internal: negative remote filler; distances inconsistent");
    if (d > suffix) {
      SetupAction remote;
      remote.kind = ActionKind::touch_remote;
      remote.size = d - suffix;
      rev.push_back(remote);
      suffix = d;
    }
    while (it != entries.rend() && it->distance == d) {
      rev.push_back(it->action);
      suffix += it->action.size;
      ++it;
    }
  }
  sl.actions.assign(rev.rbegin(), rev.rend());

  std::uint64_t total = 0;
  for (const auto& a : sl.actions) total += a.size;
  if (total > limit) {
    std::size_t keep = sl.actions.size();
    std::uint64_t kept = 0;
    while (keep > 0 && kept + sl.actions[keep - 1].size <= limit) {
      kept += sl.actions[keep - 1].size;
      --keep;
    }
    std::vector<SetupAction> cut;
    if (kept < limit) {
      SetupAction remote;
      remote.kind = ActionKind::touch_remote;
      remote.size = limit - kept;
      cut.push_back(remote);
    }
    cut.insert(cut.end(), sl.actions.begin() + static_cast<std::ptrdiff_t>(keep),
               sl.actions.end());
    sl.actions = std::move(cut);
    sl.truncated = true;
  }

  sl.omitted = std::all_of(sl.actions.begin(), sl.actions.end(), [](const SetupAction& a) {
    return a.kind != ActionKind::touch_remote;
  });
  return sl;
}

std::uint64_t setup_total(const SetupList& sl) {
  std::uint64_t total = 0;
  for (const auto& a : sl.actions) total += a.size;
  return total;
}

std::string to_string(const SetupList& sl) {
  std::ostringstream os;
  for (std::size_t i = 0; i < sl.actions.size(); ++i) {
    if (i) os << ", ";
    const SetupAction& a = sl.actions[i];
    if (a.kind == ActionKind::touch_remote)
      os << '[' << a.size << ']';
    else
      os << to_string(a.region);
  }
  if (sl.actions.empty()) os << "(empty)";
  if (sl.omitted) os << "  (omitted)";
  return os.str();
}

}  // namespace tcpred
