#include "tcpred/contraction.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace tcpred {

bool Tensor::has_dim(const std::string& idx) const {
  return std::find(dims.begin(), dims.end(), idx) != dims.end();
}

int Tensor::dim_of(const std::string& idx) const {
  for (std::size_t d = 0; d < dims.size(); ++d)
    if (dims[d] == idx) return static_cast<int>(d);
  return -1;
}

bool Contraction::is_contracted(const std::string& idx) const {
  return std::find(contracted.begin(), contracted.end(), idx) != contracted.end();
}

namespace {

struct Cursor {
  const std::string& text;
  std::size_t pos = 0;

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  }
  bool at_end() {
    skip_ws();
    return pos >= text.size();
  }
  char peek() {
    skip_ws();
    return pos < text.size() ? text[pos] : '\0';
  }
  [[noreturn]] void fail(const std::string& expected) {
    std::ostringstream os;
    os << "parse error at position " << pos << ": expected " << expected;
    throw ParseError(os.str());
  }
  void expect(char ch) {
    skip_ws();
    if (pos >= text.size() || text[pos] != ch) fail(std::string("'") + ch + "'");
    ++pos;
  }
  std::string ident() {
    skip_ws();
    std::size_t start = pos;
    while (pos < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
      ++pos;
    if (pos == start) fail("identifier");
    return text.substr(start, pos - start);
  }
};

Tensor parse_tensor(Cursor& cur, Role role) {
  Tensor t;
  t.role = role;
  t.name = cur.ident();
  cur.expect('[');
  t.dims.push_back(cur.ident());
  while (cur.peek() == ',') {
    cur.expect(',');
    t.dims.push_back(cur.ident());
  }
  cur.expect(']');
  for (std::size_t d = 0; d < t.dims.size(); ++d)
    for (std::size_t e = d + 1; e < t.dims.size(); ++e)
      if (t.dims[d] == t.dims[e])
        throw ParseError("trace unsupported: index '" + t.dims[d] + "' repeated in tensor '" +
                         t.name + "'");
  return t;
}

void add_unique(std::vector<std::string>& v, const std::string& s) {
  if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
}

}  // namespace

Contraction parse_contraction(const std::string& text) {
  Cursor cur{text};
  Contraction c;
  c.c = parse_tensor(cur, Role::output_c);
  cur.expect('=');
  c.a = parse_tensor(cur, Role::input_a);
  if (cur.peek() == '*') cur.expect('*');
  c.b = parse_tensor(cur, Role::input_b);
  if (!cur.at_end()) cur.fail("end of input");

  for (const auto& idx : c.a.dims) {
    if (c.b.has_dim(idx)) {
      if (c.c.has_dim(idx))
        throw ParseError("contracted index in output: '" + idx + "'");
      c.contracted.push_back(idx);
    } else {
      if (!c.c.has_dim(idx)) throw ParseError("dangling index: '" + idx + "'");
      c.free_a.push_back(idx);
    }
  }
  for (const auto& idx : c.b.dims) {
    if (!c.a.has_dim(idx)) {
      if (!c.c.has_dim(idx)) throw ParseError("dangling index: '" + idx + "'");
      c.free_b.push_back(idx);
    }
  }
  for (const auto& idx : c.c.dims)
    if (!c.a.has_dim(idx) && !c.b.has_dim(idx))
      throw ParseError("unbound output index: '" + idx + "'");

  for (const auto& idx : c.c.dims) add_unique(c.universe, idx);
  for (const auto& idx : c.a.dims) add_unique(c.universe, idx);
  for (const auto& idx : c.b.dims) add_unique(c.universe, idx);
  return c;
}

namespace {
void print_tensor(std::ostream& os, const Tensor& t) {
  os << t.name << '[';
  for (std::size_t d = 0; d < t.dims.size(); ++d) {
    if (d) os << ',';
    os << t.dims[d];
  }
  os << ']';
}
}  // namespace

std::string to_string(const Contraction& c) {
  std::ostringstream os;
  print_tensor(os, c.c);
  os << " = ";
  print_tensor(os, c.a);
  os << ' ';
  print_tensor(os, c.b);
  return os.str();
}

std::uint64_t SizeModel::size_of(const std::string& idx) const {
  auto it = extent.find(idx);
  if (it == extent.end()) throw AnalysisError("no size assigned to index '" + idx + "'");
  return it->second;
}

void SizeModel::require_all(const Contraction& c) const {
  for (const auto& idx : c.universe)
    if (!assigned(idx)) throw AnalysisError("no size assigned to index '" + idx + "'");
}

SizeModel parse_sizes(const std::string& text, std::uint64_t element_bytes) {
  SizeModel s;
  s.element_bytes = element_bytes;
  Cursor cur{text};
  if (cur.at_end()) return s;
  for (;;) {
    std::vector<std::string> names;
    names.push_back(cur.ident());
    cur.expect('=');
    while (true) {
      cur.skip_ws();
      std::size_t save = cur.pos;
      if (cur.pos < text.size() && std::isdigit(static_cast<unsigned char>(text[cur.pos]))) break;
      cur.pos = save;
      names.push_back(cur.ident());
      cur.expect('=');
    }
    std::size_t start = cur.pos;
    std::uint64_t value = 0;
    while (cur.pos < text.size() && std::isdigit(static_cast<unsigned char>(text[cur.pos]))) {
      value = value * 10 + static_cast<std::uint64_t>(text[cur.pos] - '0');
      ++cur.pos;
    }
    if (cur.pos == start) cur.fail("integer");
    if (value == 0) throw ParseError("index sizes must be >= 1");
    for (const auto& n : names) s.extent[n] = value;
    if (cur.at_end()) break;
    cur.expect(',');
  }
  return s;
}

}  // namespace tcpred
