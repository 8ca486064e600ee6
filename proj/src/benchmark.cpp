#include "tcpred/benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <mutex>

#ifdef __linux__
#include <sched.h>
#endif

namespace tcpred {

namespace {

std::atomic<double> g_checksum{0.0};
std::mutex g_bench_mutex;  // benchmarks are globally exclusive

std::uint64_t now_ns() {
  return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(
                                        std::chrono::steady_clock::now().time_since_epoch())
                                        .count());
}

void pin_current_thread() {
#ifdef __linux__
  static std::once_flag once;
  std::call_once(once, [] {
    cpu_set_t set;
    CPU_ZERO(&set);
    if (sched_getaffinity(0, sizeof(set), &set) != 0) return;
    for (int cpu = 0; cpu < CPU_SETSIZE; ++cpu) {
      if (CPU_ISSET(cpu, &set)) {
        cpu_set_t one;
        CPU_ZERO(&one);
        CPU_SET(cpu, &one);
        sched_setaffinity(0, sizeof(one), &one);  // best effort
        break;
      }
    }
  });
#endif
}

std::uint64_t timer_resolution_ns() {
  std::uint64_t best = UINT64_MAX;
  std::uint64_t prev = now_ns();
  for (int i = 0; i < 200; ++i) {
    std::uint64_t t = now_ns();
    if (t > prev) best = std::min(best, t - prev);
    prev = t;
  }
  return best == UINT64_MAX ? 1 : best;
}

struct SetupReplayer {
  const MicroBenchmark& mb;
  const BufferSet& buf;
  const std::vector<std::uint64_t>& coords;
  std::uint64_t remote_cursor = 0;
  double sink = 0;
  std::vector<std::uint64_t> offs;

  void replay(const SetupList& sl, SyntheticBackend* syn) {
    const std::uint64_t line = mb.machine.cache.line_elements();
    for (const auto& act : sl.actions) {
      if (act.kind == ActionKind::touch_remote) {
        if (syn) {
          syn->touch_remote(act.size);
          continue;
        }
        const std::uint64_t reads = (act.size + line - 1) / line;
        const double* remote = buf.remote();
        const std::uint64_t n = buf.remote_elems();
        double acc = 0;
        for (std::uint64_t r = 0; r < reads; ++r) {
          acc += remote[remote_cursor];
          remote_cursor += line;
          if (remote_cursor >= n) remote_cursor = 0;
        }
        sink += acc;
      } else {
        std::uint32_t space = 0;
        region_offsets(*mb.algo, *mb.plan, act.region, coords, line, space, offs);
        if (syn) {
          for (std::uint64_t off : offs) syn->touch_element(space, off);
        } else {
          const double* base = buf.tensor(space);
          double acc = 0;
          for (std::uint64_t off : offs) acc += base[off];
          sink += acc;
        }
      }
    }
  }
};

}  // namespace

std::uint64_t kernel_flop_count(const ExecPlan& p, int kernel_id) {
  return p.kernels[static_cast<std::size_t>(kernel_id)].flops_per_call;
}

TimingResult run_micro_benchmark(const MicroBenchmark& mb, int kernel_id, const SetupList& sl,
                                 const std::string& variant_label, const BenchObserver& obs) {
  std::lock_guard<std::mutex> lock(g_bench_mutex);
  if (!mb.algo || !mb.plan || !mb.backend) throw BackendError("micro-benchmark not configured");
  const KernelCall& k = mb.algo->kernels[static_cast<std::size_t>(kernel_id)];
  if (!mb.backend->supports(k.kind))
    throw BackendError(std::string("backend does not support kernel '") + kernel_name(k.kind) +
                       "'");
  auto* syn = dynamic_cast<SyntheticBackend*>(mb.backend);
  const std::uint64_t remote_elems = 2 * mb.machine.cache.capacity_elements();
  BufferSet buf = syn ? BufferSet::virtual_space(*mb.plan, remote_elems)
                      : BufferSet::allocate(*mb.algo, *mb.plan, remote_elems, mb.seed,
                                            mb.max_bytes);
  if (!syn) pin_current_thread();

  const std::vector<std::uint64_t> coords = mid_coords(*mb.plan);
  const BoundKernel bound =
      bind_kernel(*mb.plan, mb.plan->kernels[static_cast<std::size_t>(kernel_id)], buf, coords);

  TimingResult res;
  res.backend = std::string(mb.backend->id());
  res.variant = variant_label;
  res.timer_resolution_ns = timer_resolution_ns();
  SetupReplayer replayer{mb, buf, coords, 0, 0.0, {}};
  if (syn) syn->begin_benchmark();

  for (int rep = 0; rep < 10; ++rep) {
    if (obs) obs(rep, BenchPhase::setup_begin);
    if (!sl.omitted) replayer.replay(sl, syn);
    if (obs) obs(rep, BenchPhase::setup_end);

    if (obs) obs(rep, BenchPhase::timer_start);
    const std::uint64_t t0 = now_ns();
    mb.backend->execute(bound);
    if (obs) obs(rep, BenchPhase::kernel_done);
    const std::uint64_t t1 = now_ns();
    if (obs) obs(rep, BenchPhase::timer_stop);
    res.samples_ns.push_back(syn ? syn->last_kernel_ns() : (t1 > t0 ? t1 - t0 : 0));
  }
  g_checksum.store(g_checksum.load() + replayer.sink);

  std::vector<std::uint64_t> sorted = res.samples_ns;
  std::sort(sorted.begin(), sorted.end());
  res.median_ns = sorted[4];  // lower median of ten
  res.timer_warning = !syn && res.timer_resolution_ns * 100 > res.median_ns;
  return res;
}

std::uint64_t flops_of(const Contraction& c, const SizeModel& s) {
  std::uint64_t f = 2;
  for (const auto& idx : c.universe) {
    if (__builtin_mul_overflow(f, s.size_of(idx), &f))
      throw AnalysisError("flop count overflow");
  }
  return f;
}

double benchmark_checksum() { return g_checksum.load(); }

}  // namespace tcpred
