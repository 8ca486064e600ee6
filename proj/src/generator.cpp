#include "tcpred/generator.hpp"

#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>

namespace tcpred {

namespace {

std::vector<std::string> non_empty(std::initializer_list<std::string> xs) {
  std::vector<std::string> out;
  for (const auto& x : xs)
    if (!x.empty()) out.push_back(x);
  return out;
}

Operand make_operand(const Tensor& t, const std::vector<std::string>& kept,
                     std::vector<std::string> math_dims) {
  Operand op;
  op.region = region_of(t, kept);
  op.math_dims = std::move(math_dims);
  if (op.is_matrix()) {
    // storage order: the math dim appearing earlier in the tensor's dims
    int p0 = t.dim_of(op.math_dims[0]);
    int p1 = t.dim_of(op.math_dims[1]);
    op.transposed = p0 > p1;
  }
  return op;
}

KernelCall make_main_call(const Contraction& c, const Slicing& sl) {
  KernelCall call;
  call.kind = sl.kind;
  const auto kept_c = non_empty({sl.fa, sl.fb});
  const auto kept_a = non_empty({sl.kc, sl.fa});
  const auto kept_b = non_empty({sl.kc, sl.fb});
  switch (sl.kind) {
    case KernelKind::dot:
      call.out = make_operand(c.c, {}, {});
      call.ins = {make_operand(c.a, kept_a, {sl.kc}), make_operand(c.b, kept_b, {sl.kc})};
      break;
    case KernelKind::axpy:
      if (!sl.fa.empty()) {
        call.out = make_operand(c.c, kept_c, {sl.fa});
        call.ins = {make_operand(c.a, kept_a, {sl.fa}), make_operand(c.b, {}, {})};
      } else {
        call.out = make_operand(c.c, kept_c, {sl.fb});
        call.ins = {make_operand(c.a, {}, {}), make_operand(c.b, kept_b, {sl.fb})};
      }
      break;
    case KernelKind::gemv:
      if (!sl.fa.empty()) {
        call.out = make_operand(c.c, kept_c, {sl.fa});
        call.ins = {make_operand(c.a, kept_a, {sl.fa, sl.kc}),
                    make_operand(c.b, kept_b, {sl.kc})};
      } else {
        call.out = make_operand(c.c, kept_c, {sl.fb});
        call.ins = {make_operand(c.a, kept_a, {sl.kc}),
                    make_operand(c.b, kept_b, {sl.fb, sl.kc})};
      }
      break;
    case KernelKind::ger:
      call.out = make_operand(c.c, kept_c, {sl.fa, sl.fb});
      call.ins = {make_operand(c.a, kept_a, {sl.fa}), make_operand(c.b, kept_b, {sl.fb})};
      break;
    case KernelKind::gemm:
      call.out = make_operand(c.c, kept_c, {sl.fa, sl.fb});
      call.ins = {make_operand(c.a, kept_a, {sl.fa, sl.kc}),
                  make_operand(c.b, kept_b, {sl.kc, sl.fb})};
      break;
    case KernelKind::copy: throw AnalysisError("copy is not a slicing kernel");
  }
  return call;
}

// A matrix operand satisfies the BLAS interface when one of its dimensions
// is contiguous, i.e. the tensor's first dimension is among its Full dims
// (possibly used through a transpose flag).
bool matrix_contiguous(const Tensor& t, const Operand& op) {
  return std::find(op.math_dims.begin(), op.math_dims.end(), t.dims[0]) != op.math_dims.end();
}

struct CopyRec {
  KernelCall call;
  bool post = false;  // write-back after the kernel
  int level = 0;      // number of loops that must enclose the copy
};

std::vector<std::string> storage_order(const Tensor& t, const std::vector<std::string>& dims) {
  std::vector<std::string> out = dims;
  std::sort(out.begin(), out.end(),
            [&](const std::string& x, const std::string& y) { return t.dim_of(x) < t.dim_of(y); });
  return out;
}

int copy_level(const MemoryRegion& varying, const std::vector<std::string>& perm) {
  int level = 0;
  for (std::size_t p = 0; p < perm.size(); ++p)
    if (varying.depends_on(perm[p])) level = static_cast<int>(p) + 1;
  return level;
}

Algorithm build_algorithm(const Contraction& c, const Slicing& sl,
                          const std::vector<std::string>& perm) {
  Algorithm algo;
  algo.contraction = c;
  algo.kernel = sl.kind;
  algo.sliced = perm;
  algo.tensors = {c.c, c.a, c.b};

  KernelCall main = make_main_call(c, sl);
  std::vector<CopyRec> copies;

  for (int s = 0; s < main.num_slots(); ++s) {
    Operand& op = main.slot(s);
    if (!op.is_matrix()) continue;
    const Tensor& src = algo.tensor_named(op.region.tensor);
    if (matrix_contiguous(src, op)) continue;

    Tensor temp;
    temp.name = src.name + "~";
    temp.dims = storage_order(src, op.math_dims);
    temp.role = Role::temporary;
    algo.tensors.push_back(temp);

    Operand temp_op = make_operand(temp, temp.dims, temp.dims);
    Operand slice_op;
    slice_op.region = op.region;
    slice_op.math_dims = temp.dims;

    const int level = copy_level(op.region, perm);
    KernelCall pre;
    pre.kind = KernelKind::copy;
    pre.out = temp_op;
    pre.ins = {slice_op};
    copies.push_back({pre, false, level});
    if (s == 0) {
      KernelCall post;  // accumulating output: copy in, compute, copy back
      post.kind = KernelKind::copy;
      post.out = slice_op;
      post.ins = {temp_op};
      copies.push_back({post, true, level});
    }

    op.region = temp_op.region;
    op.transposed = op.is_matrix() && temp.dims[0] != op.math_dims[0];
  }

  main.id = 0;
  algo.kernels.push_back(main);
  algo.main_kernel = 0;
  algo.copy_count = static_cast<int>(copies.size());
  for (auto& cp : copies) {
    cp.call.id = static_cast<int>(algo.kernels.size());
    algo.kernels.push_back(cp.call);
  }

  // Innermost body outward; copies attach at the deepest loop their slice
  // depends on, which hoists them above all independent inner loops.
  const int depth = static_cast<int>(perm.size());
  std::vector<Node> body;
  auto attach = [&](std::vector<Node>& dst, int level, bool post) {
    for (std::size_t i = 0; i < copies.size(); ++i)
      if (copies[i].level == level && copies[i].post == post)
        dst.push_back(Node{"", {}, copies[i].call.id});
  };
  attach(body, depth, false);
  body.push_back(Node{"", {}, main.id});
  attach(body, depth, true);
  for (int d = depth; d >= 1; --d) {
    Node loop{perm[static_cast<std::size_t>(d - 1)], std::move(body), -1};
    body.clear();
    attach(body, d - 1, false);
    body.push_back(std::move(loop));
    attach(body, d - 1, true);
  }
  algo.root = std::move(body);

  std::ostringstream name;
  for (int p = 0; p < depth; ++p) {
    name << perm[static_cast<std::size_t>(p)];
    for (const auto& cp : copies)
      if (cp.level == p + 1) name << '\'';
  }
  for (const auto& cp : copies)
    if (cp.level == 0) name << '\'';
  name << '_' << kernel_name(sl.kind);
  algo.name = name.str();
  return algo;
}

}  // namespace

std::vector<Slicing> enumerate_slicings(const Contraction& c) {
  std::vector<Slicing> out;
  auto add = [&](KernelKind kind, const std::string& kc, const std::string& fa,
                 const std::string& fb) {
    Slicing sl;
    sl.kind = kind;
    sl.kc = kc;
    sl.fa = fa;
    sl.fb = fb;
    sl.kept = non_empty({kc, fa, fb});
    for (const auto& idx : c.universe)
      if (std::find(sl.kept.begin(), sl.kept.end(), idx) == sl.kept.end())
        sl.sliced.push_back(idx);
    std::sort(sl.sliced.begin(), sl.sliced.end());
    out.push_back(std::move(sl));
  };

  for (const auto& kc : c.contracted) add(KernelKind::dot, kc, "", "");
  for (const auto& fa : c.free_a) add(KernelKind::axpy, "", fa, "");
  for (const auto& fb : c.free_b) add(KernelKind::axpy, "", "", fb);
  for (const auto& kc : c.contracted) {
    for (const auto& fa : c.free_a) add(KernelKind::gemv, kc, fa, "");
    for (const auto& fb : c.free_b) add(KernelKind::gemv, kc, "", fb);
  }
  for (const auto& fa : c.free_a)
    for (const auto& fb : c.free_b) add(KernelKind::ger, "", fa, fb);
  for (const auto& kc : c.contracted)
    for (const auto& fa : c.free_a)
      for (const auto& fb : c.free_b) add(KernelKind::gemm, kc, fa, fb);
  return out;
}

std::vector<Algorithm> generate_algorithms(const Contraction& c, const GenerateOptions& opt) {
  std::vector<Algorithm> out;
  for (const auto& sl : enumerate_slicings(c)) {
    if (!opt.kernels.empty() &&
        std::find(opt.kernels.begin(), opt.kernels.end(), sl.kind) == opt.kernels.end())
      continue;
    std::vector<std::string> perm = sl.sliced;
    do {
      out.push_back(build_algorithm(c, sl, perm));
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  return out;
}

namespace {

std::string operand_text(const KernelCall& k, int slot) {
  const Operand& op = k.slot(slot);
  std::string s = to_string(op.region);
  if (!op.is_matrix()) return s;
  bool display_t = op.transposed;
  // A gemv whose matrix is the B operand reads as a vector-matrix product:
  // the matrix appears in its (contracted, free) orientation, so the marker
  // flips relative to the computational y = M x view.
  if (k.kind == KernelKind::gemv && slot == 2) display_t = !display_t;
  if (display_t) s += "^T";
  return s;
}

void emit_pseudo_body(std::ostringstream& os, const Algorithm& a, const std::vector<Node>& body,
                      int depth) {
  const std::string ind(static_cast<std::size_t>(depth) * 4, ' ');
  for (const auto& n : body) {
    if (n.is_loop()) {
      os << ind << "for " << n.loop << " = 1:" << n.loop << '\n';
      emit_pseudo_body(os, a, n.body, depth + 1);
    } else {
      const KernelCall& k = a.kernels[static_cast<std::size_t>(n.kernel_id)];
      if (k.kind == KernelKind::copy)
        os << ind << operand_text(k, 0) << " := " << operand_text(k, 1) << " (copy)\n";
      else
        os << ind << operand_text(k, 0) << " += " << operand_text(k, 1) << ' '
           << operand_text(k, 2) << " (" << kernel_name(k.kind) << ")\n";
    }
  }
}

}  // namespace

std::string emit_pseudo(const Algorithm& a) {
  std::ostringstream os;
  emit_pseudo_body(os, a, a.root, 0);
  return os.str();
}

namespace {

std::string c_ident(const std::string& name) {
  std::string out;
  for (char ch : name) out += (ch == '\'') ? 'q' : ch;
  for (auto& ch : out)
    if (ch == '~') ch = 't';
  return out;
}

std::string stride_expr(const Tensor& t, int dim) {
  if (dim == 0) return "1";
  std::string e;
  for (int d = 0; d < dim; ++d) {
    if (d) e += "*";
    e += "(size_t)n_" + t.dims[static_cast<std::size_t>(d)];
  }
  return e;
}

struct CEmit {
  const Algorithm& a;
  std::ostringstream os;

  std::string svar(const std::string& tensor, int dim) {
    return "s_" + c_ident(tensor) + "_" + std::to_string(dim);
  }
  std::string addr(const MemoryRegion& r) {
    std::string e = c_ident(r.tensor);
    for (std::size_t d = 0; d < r.sel.size(); ++d)
      if (r.sel[d].kind == Sel::bound)
        e += " + " + r.sel[d].index + "*" + svar(r.tensor, static_cast<int>(d));
    return e;
  }
  std::string sv(const Operand& op, const std::string& math_dim) {
    const Tensor& t = a.tensor_named(op.region.tensor);
    return svar(t.name, t.dim_of(math_dim));
  }
  std::string ext(const std::string& idx) { return "n_" + idx; }

  void kernel_line(const KernelCall& k, const std::string& ind) {
    switch (k.kind) {
      case KernelKind::dot:
        os << ind << "*(" << addr(k.out.region) << ") += cblas_ddot(" << ext(k.ins[0].math_dims[0])
           << ", " << addr(k.ins[0].region) << ", " << sv(k.ins[0], k.ins[0].math_dims[0]) << ", "
           << addr(k.ins[1].region) << ", " << sv(k.ins[1], k.ins[1].math_dims[0]) << ");\n";
        break;
      case KernelKind::axpy: {
        const bool alpha_a = k.ins[0].is_scalar();
        const Operand& x = alpha_a ? k.ins[1] : k.ins[0];
        const Operand& alpha = alpha_a ? k.ins[0] : k.ins[1];
        os << ind << "cblas_daxpy(" << ext(x.math_dims[0]) << ", *(" << addr(alpha.region) << "), "
           << addr(x.region) << ", " << sv(x, x.math_dims[0]) << ", " << addr(k.out.region) << ", "
           << sv(k.out, k.out.math_dims[0]) << ");\n";
        break;
      }
      case KernelKind::gemv: {
        const bool mat_a = k.ins[0].is_matrix();
        const Operand& m = mat_a ? k.ins[0] : k.ins[1];
        const Operand& x = mat_a ? k.ins[1] : k.ins[0];
        const std::string rows = m.math_dims[0], cols = m.math_dims[1];
        // column-major view of the stored matrix; Trans when the unit-stride
        // dimension is the math column
        const bool trans = m.transposed;
        const std::string st_rows = trans ? cols : rows, st_cols = trans ? rows : cols;
        os << ind << "cblas_dgemv(CblasColMajor, " << (trans ? "CblasTrans" : "CblasNoTrans")
           << ", " << ext(st_rows) << ", " << ext(st_cols) << ", 1.0, " << addr(m.region) << ", "
           << sv(m, st_cols) << ", " << addr(x.region) << ", " << sv(x, x.math_dims[0])
           << ", 1.0, " << addr(k.out.region) << ", " << sv(k.out, k.out.math_dims[0]) << ");\n";
        break;
      }
      case KernelKind::ger: {
        const Operand& x = k.ins[0];
        const Operand& y = k.ins[1];
        const bool swapped = k.out.transposed;
        const Operand& xx = swapped ? y : x;
        const Operand& yy = swapped ? x : y;
        const std::string m = swapped ? k.out.math_dims[1] : k.out.math_dims[0];
        const std::string n = swapped ? k.out.math_dims[0] : k.out.math_dims[1];
        os << ind << "cblas_dger(CblasColMajor, " << ext(m) << ", " << ext(n) << ", 1.0, "
           << addr(xx.region) << ", " << sv(xx, xx.math_dims[0]) << ", " << addr(yy.region)
           << ", " << sv(yy, yy.math_dims[0]) << ", " << addr(k.out.region) << ", "
           << sv(k.out, n) << ");\n";
        break;
      }
      case KernelKind::gemm: {
        const bool swapped = k.out.transposed;  // compute C^T = B^T A^T
        const Operand& oa = swapped ? k.ins[1] : k.ins[0];
        const Operand& ob = swapped ? k.ins[0] : k.ins[1];
        const std::string m = swapped ? k.out.math_dims[1] : k.out.math_dims[0];
        const std::string n = swapped ? k.out.math_dims[0] : k.out.math_dims[1];
        const std::string kk = k.ins[0].math_dims[1];
        const bool ta = swapped ? !oa.transposed : oa.transposed;
        const bool tb = swapped ? !ob.transposed : ob.transposed;
        os << ind << "cblas_dgemm(CblasColMajor, " << (ta ? "CblasTrans" : "CblasNoTrans") << ", "
           << (tb ? "CblasTrans" : "CblasNoTrans") << ", " << ext(m) << ", " << ext(n) << ", "
           << ext(kk) << ", 1.0, " << addr(oa.region) << ", "
           << sv(oa, ta ? (swapped ? n : m) : kk) << ", " << addr(ob.region) << ", "
           << sv(ob, tb ? kk : (swapped ? m : n)) << ", 1.0, " << addr(k.out.region) << ", "
           << sv(k.out, n) << ");\n";
        break;
      }
      case KernelKind::copy: {
        const Operand& src = k.ins[0];
        const Operand& dst = k.out;
        if (src.math_dims.size() == 1) {
          os << ind << "cblas_dcopy(" << ext(src.math_dims[0]) << ", " << addr(src.region) << ", "
             << sv(src, src.math_dims[0]) << ", " << addr(dst.region) << ", "
             << sv(dst, dst.math_dims[0]) << ");\n";
        } else {
          const std::string q = "q_" + std::to_string(k.id);
          os << ind << "for (int " << q << " = 0; " << q << " < " << ext(src.math_dims[1])
             << "; ++" << q << ")\n";
          os << ind << "    cblas_dcopy(" << ext(src.math_dims[0]) << ", " << addr(src.region)
             << " + " << q << "*" << sv(src, src.math_dims[1]) << ", "
             << sv(src, src.math_dims[0]) << ", " << addr(dst.region) << " + " << q << "*"
             << sv(dst, dst.math_dims[1]) << ", " << sv(dst, dst.math_dims[0]) << ");\n";
        }
        break;
      }
    }
  }

  void body(const std::vector<Node>& nodes, int depth) {
    const std::string ind(static_cast<std::size_t>(depth) * 4 + 4, ' ');
    for (const auto& n : nodes) {
      if (n.is_loop()) {
        os << ind << "for (int " << n.loop << " = 0; " << n.loop << " < " << ext(n.loop) << "; ++"
           << n.loop << ") {\n";
        body(n.body, depth + 1);
        os << ind << "}\n";
      } else {
        kernel_line(a.kernels[static_cast<std::size_t>(n.kernel_id)], ind);
      }
    }
  }
};

}  // namespace

std::string emit_c(const Algorithm& a) {
  CEmit e{a, {}};
  auto& os = e.os;
  os << "#include <cblas.h>\n#include <stdlib.h>\n\n";
  os << "/* " << to_string(a.contraction) << "  --  algorithm " << a.name << " */\n";
  os << "void " << c_ident(a.name) << "(";
  for (const auto& idx : a.contraction.universe) os << "int n_" << idx << ", ";
  os << "double *" << a.contraction.c.name << ", const double *" << a.contraction.a.name
     << ", const double *" << a.contraction.b.name << ") {\n";
  for (const auto& t : a.tensors) {
    for (std::size_t d = 1; d < t.dims.size(); ++d)
      os << "    const size_t " << e.svar(t.name, static_cast<int>(d)) << " = "
         << stride_expr(t, static_cast<int>(d)) << ";\n";
    os << "    const size_t " << e.svar(t.name, 0) << " = 1;\n";
    if (t.role == Role::temporary) {
      os << "    double *" << c_ident(t.name) << " = malloc(sizeof(double)";
      for (const auto& d : t.dims) os << " * n_" << d;
      os << ");\n";
    }
  }
  e.body(a.root, 0);
  for (const auto& t : a.tensors)
    if (t.role == Role::temporary) os << "    free(" << c_ident(t.name) << ");\n";
  os << "}\n";
  return e.os.str();
}

namespace {

nlohmann::ordered_json operand_json(const Operand& op) {
  nlohmann::ordered_json j;
  j["tensor"] = op.region.tensor;
  nlohmann::ordered_json sel = nlohmann::ordered_json::array();
  for (const auto& s : op.region.sel) {
    switch (s.kind) {
      case Sel::full: sel.push_back(":"); break;
      case Sel::bound: sel.push_back(s.index); break;
      case Sel::first_line: sel.push_back(":line"); break;
    }
  }
  j["selectors"] = sel;
  j["math_dims"] = op.math_dims;
  j["transposed"] = op.transposed;
  return j;
}

nlohmann::ordered_json node_json(const Algorithm& a, const Node& n) {
  nlohmann::ordered_json j;
  if (n.is_loop()) {
    j["kind"] = "loop";
    j["index"] = n.loop;
    nlohmann::ordered_json body = nlohmann::ordered_json::array();
    for (const auto& ch : n.body) body.push_back(node_json(a, ch));
    j["body"] = body;
  } else {
    const KernelCall& k = a.kernels[static_cast<std::size_t>(n.kernel_id)];
    j["kind"] = "kernel";
    j["op"] = kernel_name(k.kind);
    nlohmann::ordered_json ops = nlohmann::ordered_json::array();
    nlohmann::ordered_json out = operand_json(k.out);
    out["role"] = "out";
    ops.push_back(out);
    for (const auto& in : k.ins) {
      nlohmann::ordered_json oj = operand_json(in);
      oj["role"] = "in";
      ops.push_back(oj);
    }
    j["operands"] = ops;
  }
  return j;
}

}  // namespace

std::string emit_ast_json(const Algorithm& a) {
  nlohmann::ordered_json j;
  j["algorithm"] = a.name;
  j["contraction"] = to_string(a.contraction);
  j["kernel"] = kernel_name(a.kernel);
  j["sliced"] = a.sliced;
  j["copies"] = a.copy_count;
  nlohmann::ordered_json tree = nlohmann::ordered_json::array();
  for (const auto& n : a.root) tree.push_back(node_json(a, n));
  j["tree"] = tree;
  return j.dump(2);
}

}  // namespace tcpred
