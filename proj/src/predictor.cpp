#include "tcpred/predictor.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace tcpred {

namespace {

std::uint64_t now_ns() {
  return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(
                                        std::chrono::steady_clock::now().time_since_epoch())
                                        .count());
}

std::string variant_name(const Algorithm& a, int kernel, const VariantLabel& label) {
  if (kernel == a.main_kernel) return label.text();
  return "copy[" + std::to_string(kernel) + "]:" + label.text();
}

}  // namespace

Prediction predict(const Algorithm& a, const SizeModel& s, const MachineConfig& m,
                   KernelBackend& backend, const PredictorOptions& opt) {
  m.validate();
  s.require_all(a.contraction);
  Prediction pred;
  pred.algorithm = a.name;
  pred.kernel = a.kernel;
  pred.stage = opt.stage;
  pred.invocations = invocation_count(a, s);
  pred.flops = flops_of(a.contraction, s);

  const ExecPlan plan = make_plan(a, s);
  AnalysisOptions aopt;
  aopt.cold_root = opt.cold_root;
  const std::vector<KernelVariants> plans =
      enumerate_variants(a, s, m.cache, opt.stage, opt.threshold, aopt);

  MicroBenchmark mb;
  mb.algo = &a;
  mb.plan = &plan;
  mb.machine = m;
  mb.backend = &backend;
  mb.seed = opt.seed;
  mb.max_bytes = opt.max_bytes;

  unsigned __int128 total = 0;
  for (const auto& kv : plans) {
    std::uint64_t weight_sum = 0;
    for (const auto& v : kv.variants) {
      const SetupList sl = build_setup(v.per_operand, s, m.cache);
      VariantTiming vt;
      vt.kernel = kv.kernel;
      vt.label = variant_name(a, kv.kernel, v.label);
      vt.weight = v.weight;
      vt.setup = sl;
      if (v.weight > 0) {
        const TimingResult tr = run_micro_benchmark(mb, kv.kernel, sl, vt.label);
        vt.median_ns = tr.median_ns;
      }
      total += static_cast<unsigned __int128>(vt.weight) * vt.median_ns;
      pred.benchmark_ns += vt.median_ns;
      weight_sum += vt.weight;
      pred.variants.push_back(std::move(vt));
    }
    if (weight_sum != kv.invocations)
      throw AnalysisError("internal: variant weights do not sum to the invocation count");
  }
  if (total > UINT64_MAX) throw AnalysisError("predicted time overflows");
  pred.total_ns = static_cast<std::uint64_t>(total);

  if (pred.total_ns > 0) {
    const double seconds = static_cast<double>(pred.total_ns) * 1e-9;
    pred.flops_per_cycle = static_cast<double>(pred.flops) / (seconds * m.clock_hz);
    const double bound = m.flops_per_cycle * static_cast<double>(m.threads);
    if (pred.flops_per_cycle > bound * (1.0 + 1e-9))
      throw BackendError("misconfiguration: predicted " + std::to_string(pred.flops_per_cycle) +
                         " flops/cycle exceeds the machine bound of " + std::to_string(bound));
  }
  return pred;
}

Ranking rank(const Contraction& c, const SizeModel& s, const MachineConfig& m,
             KernelBackend& backend, const PredictorOptions& opt, const GenerateOptions& gen) {
  Ranking r;
  const std::uint64_t t0 = now_ns();
  for (const auto& a : generate_algorithms(c, gen)) r.predictions.push_back(predict(a, s, m, backend, opt));
  std::stable_sort(r.predictions.begin(), r.predictions.end(),
                   [](const Prediction& x, const Prediction& y) {
                     return x.total_ns != y.total_ns ? x.total_ns < y.total_ns
                                                     : x.algorithm < y.algorithm;
                   });
  r.wall_ns = now_ns() - t0;
  return r;
}

namespace {

std::vector<std::uint64_t> expand_spec(const std::string& spec) {
  std::vector<std::uint64_t> out;
  auto to_u64 = [](const std::string& t) -> std::uint64_t {
    if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos)
      throw ParseError("bad size value '" + t + "'");
    return std::stoull(t);
  };
  if (spec.find(';') != std::string::npos) {
    std::istringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ';')) out.push_back(to_u64(item));
    return out;
  }
  auto c1 = spec.find(':');
  if (c1 == std::string::npos) {
    out.push_back(to_u64(spec));
    return out;
  }
  auto c2 = spec.find(':', c1 + 1);
  if (c2 == std::string::npos) throw ParseError("range needs lo:hi:step, got '" + spec + "'");
  const std::uint64_t lo = to_u64(spec.substr(0, c1));
  const std::uint64_t hi = to_u64(spec.substr(c1 + 1, c2 - c1 - 1));
  const std::string step = spec.substr(c2 + 1);
  if (step.size() < 2 || (step[0] != '*' && step[0] != '+'))
    throw ParseError("range step must be *F or +D, got '" + step + "'");
  const std::uint64_t amount = to_u64(step.substr(1));
  if (amount < (step[0] == '*' ? 2u : 1u)) throw ParseError("range step too small");
  for (std::uint64_t v = lo; v <= hi; v = step[0] == '*' ? v * amount : v + amount)
    out.push_back(v);
  if (out.empty()) throw ParseError("empty range '" + spec + "'");
  return out;
}

}  // namespace

std::vector<SizeModel> parse_size_grid(const std::string& text, std::uint64_t element_bytes) {
  struct Segment {
    std::vector<std::string> names;
    std::vector<std::uint64_t> values;
  };
  std::vector<Segment> segments;
  std::istringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part.erase(std::remove_if(part.begin(), part.end(), ::isspace), part.end());
    if (part.empty()) continue;
    Segment seg;
    std::size_t pos = 0;
    for (;;) {
      auto eq = part.find('=', pos);
      if (eq == std::string::npos) throw ParseError("size segment needs name=value: '" + part + "'");
      seg.names.push_back(part.substr(pos, eq - pos));
      pos = eq + 1;
      // more names chained with '=' until the value spec starts with a digit
      if (pos < part.size() && !std::isdigit(static_cast<unsigned char>(part[pos]))) continue;
      break;
    }
    seg.values = expand_spec(part.substr(pos));
    segments.push_back(std::move(seg));
  }
  if (segments.empty()) return {};

  std::vector<SizeModel> grid;
  std::vector<std::size_t> pick(segments.size(), 0);
  for (;;) {
    SizeModel sm;
    sm.element_bytes = element_bytes;
    for (std::size_t g = 0; g < segments.size(); ++g)
      for (const auto& n : segments[g].names) sm.extent[n] = segments[g].values[pick[g]];
    grid.push_back(std::move(sm));
    std::size_t g = segments.size();
    while (g > 0 && ++pick[g - 1] == segments[g - 1].values.size()) pick[--g] = 0;
    if (g == 0) break;
  }
  return grid;
}

std::string sweep_csv(const Contraction& c, const std::vector<SizeModel>& grid,
                      const MachineConfig& m, KernelBackend& backend,
                      const PredictorOptions& opt, const GenerateOptions& gen) {
  std::ostringstream os;
  os << "algorithm,kernel";
  for (const auto& idx : c.universe) os << ',' << idx;
  os << ",time_ns,flops_per_cycle,stage,note\n";
  const std::vector<Algorithm> algos = generate_algorithms(c, gen);
  for (const auto& sizes : grid) {
    for (const auto& a : algos) {
      os << a.name << ',' << kernel_name(a.kernel);
      for (const auto& idx : c.universe) os << ',' << sizes.size_of(idx);
      try {
        const Prediction p = predict(a, sizes, m, backend, opt);
        char fpc[32];
        std::snprintf(fpc, sizeof(fpc), "%.9g", p.flops_per_cycle);
        os << ',' << p.total_ns << ',' << fpc << ',' << stage_name(opt.stage) << ",\n";
      } catch (const std::exception& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), ',', ';');
        os << ",,," << stage_name(opt.stage) << ",error: " << msg << '\n';
      }
    }
  }
  return os.str();
}

std::vector<EfficiencyRow> efficiency_report(const Contraction& c, const SizeModel& s,
                                             const MachineConfig& m, KernelBackend& backend,
                                             bool execute_allowed, std::uint64_t budget_ns,
                                             const PredictorOptions& opt,
                                             const GenerateOptions& gen) {
  if (!backend.is_synthetic() && !execute_allowed)
    throw AnalysisError("efficiency report executes full algorithms; pass the explicit opt-in");
  std::vector<EfficiencyRow> rows;
  for (const auto& a : generate_algorithms(c, gen)) {
    EfficiencyRow row;
    row.algorithm = a.name;
    row.kernel = a.kernel;
    try {
      const Prediction p = predict(a, s, m, backend, opt);
      row.benchmark_ns = p.benchmark_ns;
      if (backend.is_synthetic()) {
        row.execution_ns = p.total_ns;
      } else {
        const ExecPlan plan = make_plan(a, s);
        BufferSet buf = BufferSet::allocate(a, plan, 0, opt.seed, opt.max_bytes);
        const auto t0 = std::chrono::steady_clock::now();
        run_plan(plan, buf, [&](const BoundKernel& bk) { backend.execute(bk); }, budget_ns);
        row.execution_ns = static_cast<std::uint64_t>(
            std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() -
                                                                 t0)
                .count());
      }
      row.ratio = row.benchmark_ns
                      ? static_cast<double>(row.execution_ns) / static_cast<double>(row.benchmark_ns)
                      : 0.0;
    } catch (const std::exception& e) {
      row.note = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace tcpred
