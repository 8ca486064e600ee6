#include "tcpred/exec.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <random>

#ifdef TCPRED_HAVE_CBLAS
#include <cblas.h>
#endif

namespace tcpred {

TensorLayout layout_of(const Tensor& t, const SizeModel& s) {
  TensorLayout l;
  std::uint64_t stride = 1;
  for (const auto& d : t.dims) {
    l.extent.push_back(s.size_of(d));
    l.stride.push_back(stride);
    if (__builtin_mul_overflow(stride, s.size_of(d), &stride))
      throw AnalysisError("tensor '" + t.name + "' too large");
  }
  l.total = stride;
  return l;
}

std::uint64_t ExecPlan::offset_of(const SlotPlan& sp,
                                  const std::vector<std::uint64_t>& coords) const {
  std::uint64_t off = 0;
  for (const auto& [slot, stride] : sp.terms) off += coords[static_cast<std::size_t>(slot)] * stride;
  return off;
}

namespace {

std::uint64_t kernel_flops(KernelKind kind, const std::vector<SlotPlan>& slots) {
  auto dim = [&](int s, std::size_t d) { return slots[static_cast<std::size_t>(s)].math[d].first; };
  switch (kind) {
    case KernelKind::dot: return 2 * dim(1, 0);
    case KernelKind::axpy: return 2 * dim(0, 0);
    case KernelKind::gemv: {
      const int m = slots[1].math.size() == 2 ? 1 : 2;
      return 2 * dim(m, 0) * dim(m, 1);
    }
    case KernelKind::ger: return 2 * dim(0, 0) * dim(0, 1);
    case KernelKind::gemm: return 2 * dim(0, 0) * dim(0, 1) * dim(1, 1);
    case KernelKind::copy: return 0;
  }
  return 0;
}

SlotPlan make_slot_plan(const Algorithm& a, const ExecPlan& p, const Operand& op,
                        const std::vector<std::string>& loop_names) {
  SlotPlan sp;
  const Tensor& t = a.tensor_named(op.region.tensor);
  for (std::size_t i = 0; i < a.tensors.size(); ++i)
    if (a.tensors[i].name == t.name) sp.tensor = static_cast<int>(i);
  const TensorLayout& lay = p.layouts[static_cast<std::size_t>(sp.tensor)];

  for (std::size_t d = 0; d < op.region.sel.size(); ++d) {
    const Selector& sel = op.region.sel[d];
    if (sel.kind == Sel::bound) {
      auto it = std::find(loop_names.begin(), loop_names.end(), sel.index);
      if (it == loop_names.end())
        throw AnalysisError("operand bound to unknown loop '" + sel.index + "'");
      sp.terms.push_back({static_cast<int>(it - loop_names.begin()), lay.stride[d]});
    } else {
      sp.storage.push_back({lay.extent[d], lay.stride[d]});
      sp.elements *= lay.extent[d];
    }
  }
  for (const auto& md : op.math_dims) {
    int d = t.dim_of(md);
    sp.math.push_back({lay.extent[static_cast<std::size_t>(d)],
                       lay.stride[static_cast<std::size_t>(d)]});
  }
  return sp;
}

void collect_loops(const std::vector<Node>& body, std::vector<std::string>& names) {
  for (const auto& n : body)
    if (n.is_loop()) {
      names.push_back(n.loop);
      collect_loops(n.body, names);
    }
}

PlanNode lower_node(const Node& n, const ExecPlan& p, const SizeModel& s) {
  PlanNode out;
  if (n.is_loop()) {
    auto it = std::find(p.loop_names.begin(), p.loop_names.end(), n.loop);
    out.loop_slot = static_cast<int>(it - p.loop_names.begin());
    out.extent = s.size_of(n.loop);
    for (const auto& ch : n.body) out.body.push_back(lower_node(ch, p, s));
  } else {
    out.kernel = n.kernel_id;
  }
  return out;
}

}  // namespace

ExecPlan make_plan(const Algorithm& a, const SizeModel& s) {
  ExecPlan p;
  p.element_bytes = s.element_bytes;
  for (const auto& t : a.tensors) p.layouts.push_back(layout_of(t, s));
  collect_loops(a.root, p.loop_names);
  for (const auto& l : p.loop_names) p.loop_extents.push_back(s.size_of(l));
  for (const auto& k : a.kernels) {
    PlannedKernel pk;
    pk.id = k.id;
    pk.kind = k.kind;
    for (int sl = 0; sl < k.num_slots(); ++sl)
      pk.slots.push_back(make_slot_plan(a, p, k.slot(sl), p.loop_names));
    pk.flops_per_call = kernel_flops(k.kind, pk.slots);
    p.kernels.push_back(std::move(pk));
  }
  for (const auto& n : a.root) p.root.push_back(lower_node(n, p, s));
  return p;
}

std::vector<std::uint64_t> mid_coords(const ExecPlan& p) {
  std::vector<std::uint64_t> coords;
  for (auto e : p.loop_extents) coords.push_back(e / 2);
  return coords;
}

BufferSet::BufferSet(BufferSet&& o) noexcept { *this = std::move(o); }

BufferSet& BufferSet::operator=(BufferSet&& o) noexcept {
  std::swap(data_, o.data_);
  std::swap(owned_, o.owned_);
  std::swap(remote_, o.remote_);
  std::swap(remote_elems_, o.remote_elems_);
  std::swap(virtual_, o.virtual_);
  return *this;
}

BufferSet::~BufferSet() {
  for (void* p : owned_) std::free(p);
}

BufferSet BufferSet::allocate(const Algorithm& a, const ExecPlan& p, std::uint64_t remote_elems,
                              std::uint64_t seed, std::uint64_t max_bytes) {
  BufferSet b;
  std::uint64_t total_bytes = remote_elems * sizeof(double);
  for (const auto& l : p.layouts) total_bytes += l.total * sizeof(double);
  if (max_bytes && total_bytes > max_bytes)
    throw BackendError("benchmark buffers need " + std::to_string(total_bytes) +
                       " bytes, above the limit of " + std::to_string(max_bytes));

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  auto alloc = [&](std::uint64_t elems) {
    std::uint64_t bytes = (elems * sizeof(double) + 4095) / 4096 * 4096;
    void* ptr = std::aligned_alloc(4096, bytes);
    if (!ptr) throw BackendError("allocation of " + std::to_string(bytes) + " bytes failed");
    b.owned_.push_back(ptr);
    return static_cast<double*>(ptr);
  };
  for (std::size_t i = 0; i < p.layouts.size(); ++i) {
    double* ptr = alloc(p.layouts[i].total);
    const Role role = a.tensors[i].role;
    if (role == Role::input_a || role == Role::input_b)
      for (std::uint64_t e = 0; e < p.layouts[i].total; ++e) ptr[e] = dist(rng);
    else
      std::memset(ptr, 0, p.layouts[i].total * sizeof(double));
    b.data_.push_back(ptr);
  }
  if (remote_elems) {
    b.remote_ = alloc(remote_elems);
    std::memset(b.remote_, 1, remote_elems * sizeof(double));
  }
  b.remote_elems_ = remote_elems;
  return b;
}

BufferSet BufferSet::virtual_space(const ExecPlan& p, std::uint64_t remote_elems) {
  BufferSet b;
  b.virtual_ = true;
  // Disjoint fake address ranges, one per tensor; never dereferenced.
  std::uint64_t base = 1ull << 40;
  for (const auto& l : p.layouts) {
    b.data_.push_back(reinterpret_cast<double*>(base));
    base += (l.total * sizeof(double) + 4095) / 4096 * 4096 + 4096;
  }
  b.remote_ = reinterpret_cast<double*>(base);
  b.remote_elems_ = remote_elems;
  return b;
}

BoundKernel bind_kernel(const ExecPlan& p, const PlannedKernel& k, const BufferSet& buf,
                        const std::vector<std::uint64_t>& coords) {
  BoundKernel bk;
  bk.kind = k.kind;
  bk.flops = k.flops_per_call;
  bk.n_ins = static_cast<int>(k.slots.size()) - 1;
  for (int s = 0; s < static_cast<int>(k.slots.size()); ++s) {
    const SlotPlan& sp = k.slots[static_cast<std::size_t>(s)];
    BoundOp op;
    op.base = p.offset_of(sp, coords);
    op.ptr = buf.tensor(static_cast<std::size_t>(sp.tensor)) + op.base;
    op.math = &sp.math;
    op.storage = &sp.storage;
    op.space = sp.tensor;
    (s == 0 ? bk.out : (s == 1 ? bk.in0 : bk.in1)) = op;
  }
  return bk;
}

void reference_execute(const BoundKernel& k) {
  switch (k.kind) {
    case KernelKind::dot: {
      const auto& [n, sx] = (*k.in0.math)[0];
      const auto& [n2, sy] = (*k.in1.math)[0];
      (void)n2;
      double acc = 0;
      for (std::uint64_t i = 0; i < n; ++i) acc += k.in0.ptr[i * sx] * k.in1.ptr[i * sy];
      k.out.ptr[0] += acc;
      break;
    }
    case KernelKind::axpy: {
      const BoundOp& x = k.in0.math->empty() ? k.in1 : k.in0;
      const BoundOp& a = k.in0.math->empty() ? k.in0 : k.in1;
      const double alpha = a.ptr[0];
      const auto& [n, sx] = (*x.math)[0];
      const auto& [ny, sy] = (*k.out.math)[0];
      (void)ny;
      for (std::uint64_t i = 0; i < n; ++i) k.out.ptr[i * sy] += alpha * x.ptr[i * sx];
      break;
    }
    case KernelKind::gemv: {
      const bool mat_first = k.in0.math->size() == 2;
      const BoundOp& m = mat_first ? k.in0 : k.in1;
      const BoundOp& x = mat_first ? k.in1 : k.in0;
      const auto& [rows, sr] = (*m.math)[0];
      const auto& [cols, sc] = (*m.math)[1];
      const std::uint64_t sx = (*x.math)[0].second;
      const std::uint64_t sy = (*k.out.math)[0].second;
      for (std::uint64_t r = 0; r < rows; ++r) {
        double acc = 0;
        for (std::uint64_t c = 0; c < cols; ++c) acc += m.ptr[r * sr + c * sc] * x.ptr[c * sx];
        k.out.ptr[r * sy] += acc;
      }
      break;
    }
    case KernelKind::ger: {
      const auto& [rows, sr] = (*k.out.math)[0];
      const auto& [cols, sc] = (*k.out.math)[1];
      const std::uint64_t sx = (*k.in0.math)[0].second;
      const std::uint64_t sy = (*k.in1.math)[0].second;
      for (std::uint64_t c = 0; c < cols; ++c)
        for (std::uint64_t r = 0; r < rows; ++r)
          k.out.ptr[r * sr + c * sc] += k.in0.ptr[r * sx] * k.in1.ptr[c * sy];
      break;
    }
    case KernelKind::gemm: {
      const auto& [m, scm] = (*k.out.math)[0];
      const auto& [n, scn] = (*k.out.math)[1];
      const auto& [ma, sam] = (*k.in0.math)[0];
      const auto& [kk, sak] = (*k.in0.math)[1];
      const auto& [kb, sbk] = (*k.in1.math)[0];
      const auto& [nb, sbn] = (*k.in1.math)[1];
      (void)ma;
      (void)kb;
      (void)nb;
      for (std::uint64_t j = 0; j < n; ++j)
        for (std::uint64_t l = 0; l < kk; ++l) {
          const double b = k.in1.ptr[l * sbk + j * sbn];
          for (std::uint64_t i = 0; i < m; ++i)
            k.out.ptr[i * scm + j * scn] += k.in0.ptr[i * sam + l * sak] * b;
        }
      break;
    }
    case KernelKind::copy: {
      const Dims& sd = *k.in0.math;
      const Dims& dd = *k.out.math;
      if (sd.empty()) {
        k.out.ptr[0] = k.in0.ptr[0];
      } else if (sd.size() == 1) {
        for (std::uint64_t i = 0; i < sd[0].first; ++i)
          k.out.ptr[i * dd[0].second] = k.in0.ptr[i * sd[0].second];
      } else {
        for (std::uint64_t j = 0; j < sd[1].first; ++j)
          for (std::uint64_t i = 0; i < sd[0].first; ++i)
            k.out.ptr[i * dd[0].second + j * dd[1].second] =
                k.in0.ptr[i * sd[0].second + j * sd[1].second];
      }
      break;
    }
  }
}

bool native_available() {
#ifdef TCPRED_HAVE_CBLAS
  return true;
#else
  return false;
#endif
}

#ifdef TCPRED_HAVE_CBLAS
namespace {

// Orientation of a stored matrix operand for CBLAS: the operand must have a
// unit-stride math dimension; returns (transposed-view, ld).
std::pair<bool, std::uint64_t> blas_view(const Dims& md) {
  if (md[0].second == 1) return {false, md[1].second};
  if (md[1].second == 1) return {true, md[0].second};
  throw BackendError("matrix operand without contiguous dimension reached the native backend");
}

}  // namespace

void native_execute(const BoundKernel& k) {
  switch (k.kind) {
    case KernelKind::dot: {
      const auto& [n, sx] = (*k.in0.math)[0];
      k.out.ptr[0] += cblas_ddot(static_cast<int>(n), k.in0.ptr, static_cast<int>(sx), k.in1.ptr,
                                 static_cast<int>((*k.in1.math)[0].second));
      break;
    }
    case KernelKind::axpy: {
      const BoundOp& x = k.in0.math->empty() ? k.in1 : k.in0;
      const BoundOp& a = k.in0.math->empty() ? k.in0 : k.in1;
      const auto& [n, sx] = (*x.math)[0];
      cblas_daxpy(static_cast<int>(n), a.ptr[0], x.ptr, static_cast<int>(sx), k.out.ptr,
                  static_cast<int>((*k.out.math)[0].second));
      break;
    }
    case KernelKind::gemv: {
      const bool mat_first = k.in0.math->size() == 2;
      const BoundOp& m = mat_first ? k.in0 : k.in1;
      const BoundOp& x = mat_first ? k.in1 : k.in0;
      const auto [trans, ld] = blas_view(*m.math);
      const std::uint64_t rows = (*m.math)[0].first, cols = (*m.math)[1].first;
      // Stored column-major as (rows x cols) when not transposed-view,
      // otherwise as (cols x rows) with the product transposed back.
      cblas_dgemv(CblasColMajor, trans ? CblasTrans : CblasNoTrans,
                  static_cast<int>(trans ? cols : rows), static_cast<int>(trans ? rows : cols),
                  1.0, m.ptr, static_cast<int>(ld), x.ptr,
                  static_cast<int>((*x.math)[0].second), 1.0, k.out.ptr,
                  static_cast<int>((*k.out.math)[0].second));
      break;
    }
    case KernelKind::ger: {
      const Dims& cd = *k.out.math;
      const bool swapped = cd[0].second != 1;  // write C^T = y x^T instead
      const BoundOp& x = swapped ? k.in1 : k.in0;
      const BoundOp& y = swapped ? k.in0 : k.in1;
      const std::uint64_t m = swapped ? cd[1].first : cd[0].first;
      const std::uint64_t n = swapped ? cd[0].first : cd[1].first;
      const std::uint64_t ld = swapped ? cd[0].second : cd[1].second;
      if ((swapped ? cd[1].second : cd[0].second) != 1)
        throw BackendError("ger output without contiguous dimension reached the native backend");
      cblas_dger(CblasColMajor, static_cast<int>(m), static_cast<int>(n), 1.0, x.ptr,
                 static_cast<int>((*x.math)[0].second), y.ptr,
                 static_cast<int>((*y.math)[0].second), k.out.ptr, static_cast<int>(ld));
      break;
    }
    case KernelKind::gemm: {
      const Dims& cd = *k.out.math;
      const bool swapped = cd[0].second != 1;  // compute C^T = B^T A^T
      const Dims& ad = swapped ? *k.in1.math : *k.in0.math;
      const Dims& bd = swapped ? *k.in0.math : *k.in1.math;
      const double* pa = swapped ? k.in1.ptr : k.in0.ptr;
      const double* pb = swapped ? k.in0.ptr : k.in1.ptr;
      // In the swapped view the math dims of each input reverse.
      Dims av = swapped ? Dims{ad[1], ad[0]} : ad;
      Dims bv = swapped ? Dims{bd[1], bd[0]} : bd;
      const auto [ta, lda] = blas_view(av);
      const auto [tb, ldb] = blas_view(bv);
      const std::uint64_t m = swapped ? cd[1].first : cd[0].first;
      const std::uint64_t n = swapped ? cd[0].first : cd[1].first;
      const std::uint64_t kk = av[1].first;
      cblas_dgemm(CblasColMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans,
                  static_cast<int>(m), static_cast<int>(n), static_cast<int>(kk), 1.0, pa,
                  static_cast<int>(lda), pb, static_cast<int>(ldb), 1.0, k.out.ptr,
                  static_cast<int>(swapped ? cd[0].second : cd[1].second));
      break;
    }
    case KernelKind::copy: reference_execute(k); break;
  }
}
#else
void native_execute(const BoundKernel&) {
  throw BackendError("native BLAS backend not compiled in");
}
#endif

namespace {

struct Runner {
  const ExecPlan& p;
  const BufferSet& buf;
  const std::function<void(const BoundKernel&)>& exec;
  std::vector<std::uint64_t> coords;
  std::uint64_t budget_ns;
  std::chrono::steady_clock::time_point deadline;
  std::uint64_t calls = 0;

  void run(const std::vector<PlanNode>& body) {
    for (const auto& n : body) {
      if (n.loop_slot >= 0) {
        for (std::uint64_t v = 0; v < n.extent; ++v) {
          coords[static_cast<std::size_t>(n.loop_slot)] = v;
          run(n.body);
        }
      } else {
        exec(bind_kernel(p, p.kernels[static_cast<std::size_t>(n.kernel)], buf, coords));
        if (budget_ns && (++calls & 0xFFF) == 0 && std::chrono::steady_clock::now() > deadline)
          throw BackendError("time budget exceeded while executing algorithm");
      }
    }
  }
};

}  // namespace

void run_plan(const ExecPlan& p, const BufferSet& buf,
              const std::function<void(const BoundKernel&)>& exec, std::uint64_t budget_ns) {
  Runner r{p, buf, exec, std::vector<std::uint64_t>(p.loop_names.size(), 0), budget_ns,
           std::chrono::steady_clock::now() + std::chrono::nanoseconds(budget_ns), 0};
  r.run(p.root);
}

void slot_offsets(const ExecPlan& p, const SlotPlan& sp, const std::vector<std::uint64_t>& coords,
                  std::vector<std::uint64_t>& out) {
  out.clear();
  const std::uint64_t base = p.offset_of(sp, coords);
  const std::size_t rank = sp.storage.size();
  if (rank == 0) {
    out.push_back(base);
    return;
  }
  std::vector<std::uint64_t> idx(rank, 0);
  for (;;) {
    std::uint64_t off = base;
    for (std::size_t d = 0; d < rank; ++d) off += idx[d] * sp.storage[d].second;
    out.push_back(off);
    std::size_t d = 0;
    while (d < rank && ++idx[d] == sp.storage[d].first) idx[d++] = 0;
    if (d == rank) break;
  }
}

void region_offsets(const Algorithm& a, const ExecPlan& p, const MemoryRegion& r,
                    const std::vector<std::uint64_t>& coords, std::uint64_t line_elems,
                    std::uint32_t& space, std::vector<std::uint64_t>& out) {
  out.clear();
  int tensor = -1;
  for (std::size_t i = 0; i < a.tensors.size(); ++i)
    if (a.tensors[i].name == r.tensor) tensor = static_cast<int>(i);
  if (tensor < 0) throw AnalysisError("region over unknown tensor '" + r.tensor + "'");
  space = static_cast<std::uint32_t>(tensor);
  const TensorLayout& lay = p.layouts[static_cast<std::size_t>(tensor)];

  std::uint64_t base = 0;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> dims;  // (count, stride)
  for (std::size_t d = 0; d < r.sel.size(); ++d) {
    switch (r.sel[d].kind) {
      case Sel::bound: {
        auto it = std::find(p.loop_names.begin(), p.loop_names.end(), r.sel[d].index);
        if (it == p.loop_names.end())
          throw AnalysisError("region bound to unknown loop '" + r.sel[d].index + "'");
        base += coords[static_cast<std::size_t>(it - p.loop_names.begin())] * lay.stride[d];
        break;
      }
      case Sel::full: dims.push_back({lay.extent[d], lay.stride[d]}); break;
      case Sel::first_line:
        dims.push_back({std::min(line_elems, lay.extent[d]), lay.stride[d]});
        break;
    }
  }
  if (dims.empty()) {
    out.push_back(base);
    return;
  }
  std::vector<std::uint64_t> idx(dims.size(), 0);
  for (;;) {
    std::uint64_t off = base;
    for (std::size_t d = 0; d < dims.size(); ++d) off += idx[d] * dims[d].second;
    out.push_back(off);
    std::size_t d = 0;
    while (d < dims.size() && ++idx[d] == dims[d].first) idx[d++] = 0;
    if (d == dims.size()) break;
  }
}

void naive_contract(const Contraction& c, const SizeModel& s, const double* a, const double* b,
                    double* out) {
  const TensorLayout lc = layout_of(c.c, s);
  const TensorLayout la = layout_of(c.a, s);
  const TensorLayout lb = layout_of(c.b, s);
  std::vector<std::string> all = c.universe;
  std::vector<std::uint64_t> val(all.size(), 0);

  auto offset = [&](const Tensor& t, const TensorLayout& l) {
    std::uint64_t off = 0;
    for (std::size_t d = 0; d < t.dims.size(); ++d) {
      for (std::size_t i = 0; i < all.size(); ++i)
        if (all[i] == t.dims[d]) off += val[i] * l.stride[d];
    }
    return off;
  };

  std::function<void(std::size_t)> rec = [&](std::size_t level) {
    if (level == all.size()) {
      out[offset(c.c, lc)] += a[offset(c.a, la)] * b[offset(c.b, lb)];
      return;
    }
    for (std::uint64_t v = 0; v < s.size_of(all[level]); ++v) {
      val[level] = v;
      rec(level + 1);
    }
  };
  for (std::uint64_t e = 0; e < lc.total; ++e) out[e] = 0;
  rec(0);
}

}  // namespace tcpred
