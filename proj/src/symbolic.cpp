#include "dbnet/symbolic.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace dbnet {

ExprPtr mk_var(std::string name) {
  auto e = std::make_shared<BoolExpr>();
  e->kind = BoolExpr::Kind::Var;
  e->name = std::move(name);
  return e;
}

ExprPtr mk_weight(int id) {
  auto e = std::make_shared<BoolExpr>();
  e->kind = BoolExpr::Kind::Weight;
  e->weight_id = id;
  return e;
}

ExprPtr mk_const(bool v) {
  auto e = std::make_shared<BoolExpr>();
  e->kind = BoolExpr::Kind::Const;
  e->value = v;
  return e;
}

ExprPtr mk_not(ExprPtr c) {
  auto e = std::make_shared<BoolExpr>();
  e->kind = BoolExpr::Kind::Not;
  e->kids.push_back(std::move(c));
  return e;
}

ExprPtr mk_and(std::vector<ExprPtr> kids) {
  if (kids.empty()) return mk_const(true);
  if (kids.size() == 1) return kids[0];
  auto e = std::make_shared<BoolExpr>();
  e->kind = BoolExpr::Kind::And;
  e->kids = std::move(kids);
  return e;
}

ExprPtr mk_or(std::vector<ExprPtr> kids) {
  if (kids.empty()) return mk_const(false);
  if (kids.size() == 1) return kids[0];
  auto e = std::make_shared<BoolExpr>();
  e->kind = BoolExpr::Kind::Or;
  e->kids = std::move(kids);
  return e;
}

ExprPtr mk_xor(ExprPtr a, ExprPtr b) {
  auto e = std::make_shared<BoolExpr>();
  e->kind = BoolExpr::Kind::Xor;
  e->kids = {std::move(a), std::move(b)};
  return e;
}

ExprPtr mk_gesum(std::vector<std::pair<int, ExprPtr>> terms, int threshold) {
  for (const auto& [c, t] : terms)
    if (c <= 0) throw std::invalid_argument("mk_gesum: coefficients must be > 0");
  auto e = std::make_shared<BoolExpr>();
  e->kind = BoolExpr::Kind::GeSum;
  e->terms = std::move(terms);
  e->threshold = threshold;
  return e;
}

bool expr_equal(const ExprPtr& a, const ExprPtr& b) {
  if (a == b) return true;
  if (!a || !b || a->kind != b->kind) return false;
  switch (a->kind) {
    case BoolExpr::Kind::Var: return a->name == b->name;
    case BoolExpr::Kind::Weight: return a->weight_id == b->weight_id;
    case BoolExpr::Kind::Const: return a->value == b->value;
    case BoolExpr::Kind::Not:
    case BoolExpr::Kind::And:
    case BoolExpr::Kind::Or:
    case BoolExpr::Kind::Xor: {
      if (a->kids.size() != b->kids.size()) return false;
      for (std::size_t i = 0; i < a->kids.size(); ++i)
        if (!expr_equal(a->kids[i], b->kids[i])) return false;
      return true;
    }
    case BoolExpr::Kind::GeSum: {
      if (a->threshold != b->threshold || a->terms.size() != b->terms.size())
        return false;
      for (std::size_t i = 0; i < a->terms.size(); ++i)
        if (a->terms[i].first != b->terms[i].first ||
            !expr_equal(a->terms[i].second, b->terms[i].second))
          return false;
      return true;
    }
  }
  return false;
}

std::size_t expr_size(const ExprPtr& e) {
  std::size_t n = 1;
  for (const auto& k : e->kids) n += expr_size(k);
  for (const auto& [c, t] : e->terms) n += expr_size(t);
  return n;
}

bool eval_expr(const ExprPtr& e, const std::map<std::string, bool>& inputs) {
  switch (e->kind) {
    case BoolExpr::Kind::Var: {
      auto it = inputs.find(e->name);
      if (it == inputs.end())
        throw std::invalid_argument("eval_expr: unbound input " + e->name);
      return it->second;
    }
    case BoolExpr::Kind::Weight:
      throw std::invalid_argument("eval_expr: unbound weight symbol");
    case BoolExpr::Kind::Const:
      return e->value;
    case BoolExpr::Kind::Not:
      return !eval_expr(e->kids[0], inputs);
    case BoolExpr::Kind::And:
      for (const auto& k : e->kids)
        if (!eval_expr(k, inputs)) return false;
      return true;
    case BoolExpr::Kind::Or:
      for (const auto& k : e->kids)
        if (eval_expr(k, inputs)) return true;
      return false;
    case BoolExpr::Kind::Xor:
      return eval_expr(e->kids[0], inputs) != eval_expr(e->kids[1], inputs);
    case BoolExpr::Kind::GeSum: {
      long sum = 0;
      for (const auto& [c, t] : e->terms)
        if (eval_expr(t, inputs)) sum += c;
      return sum >= e->threshold;
    }
  }
  return false;
}

// ---- symbolic forward ----

namespace {

struct SymState {
  Shape shape;
  std::vector<ExprPtr> elems;
};

}  // namespace

Program symbolic_forward(const NetSpec& spec) {
  NetSpec s = spec;
  s.validate();
  Program prog;
  for (uint32_t i = 0; i < s.input_width; ++i) {
    std::string name = i < s.feature_names.size()
                           ? s.feature_names[i]
                           : "x" + std::to_string(i + 1);
    prog.inputs.push_back(name);
  }
  SymState st;
  st.shape = Shape::vec(s.input_width);
  for (const auto& n : prog.inputs) st.elems.push_back(mk_var(n));

  int wid = 0;
  for (const auto& l : s.layers) {
    switch (l.kind) {
      case LayerKind::ConcatNegation: {
        std::vector<ExprPtr> out;
        out.reserve(st.elems.size() * 2);
        if (l.negated_first) {
          for (const auto& e : st.elems) out.push_back(mk_not(e));
          for (const auto& e : st.elems) out.push_back(e);
        } else {
          for (const auto& e : st.elems) out.push_back(e);
          for (const auto& e : st.elems) out.push_back(mk_not(e));
        }
        st.elems = std::move(out);
        st.shape = Shape::vec(st.elems.size());
        break;
      }
      case LayerKind::NegLayer: {
        std::vector<ExprPtr> out;
        out.reserve(std::size_t(l.width) * l.in_width);
        for (uint32_t r = 0; r < l.width; ++r)
          for (uint32_t c = 0; c < l.in_width; ++c)
            out.push_back(mk_not(mk_xor(st.elems[c], mk_weight(wid++))));
        st.elems = std::move(out);
        st.shape = Shape::mat(l.width, l.in_width);
        break;
      }
      case LayerKind::ImpliesLayer: {
        std::vector<ExprPtr> out;
        out.reserve(std::size_t(l.width) * l.in_width);
        for (uint32_t r = 0; r < l.width; ++r)
          for (uint32_t c = 0; c < l.in_width; ++c)
            out.push_back(mk_or({mk_not(mk_weight(wid++)), st.elems[c]}));
        st.elems = std::move(out);
        st.shape = Shape::mat(l.width, l.in_width);
        break;
      }
      case LayerKind::AndLayer: {
        std::vector<ExprPtr> out;
        for (uint32_t r = 0; r < l.width; ++r) {
          std::vector<ExprPtr> row;
          for (uint32_t c = 0; c < l.in_width; ++c)
            row.push_back(mk_or({mk_not(mk_weight(wid++)), st.elems[c]}));
          out.push_back(mk_and(std::move(row)));
        }
        st.elems = std::move(out);
        st.shape = Shape::vec(l.width);
        break;
      }
      case LayerKind::OrLayer: {
        std::vector<ExprPtr> out;
        for (uint32_t r = 0; r < l.width; ++r) {
          std::vector<ExprPtr> row;
          for (uint32_t c = 0; c < l.in_width; ++c)
            row.push_back(mk_and({mk_weight(wid++), st.elems[c]}));
          out.push_back(mk_or(std::move(row)));
        }
        st.elems = std::move(out);
        st.shape = Shape::vec(l.width);
        break;
      }
      case LayerKind::MajReduce: {
        const std::size_t rows = st.shape.rank == 2 ? st.shape.rows : 1;
        const std::size_t cols =
            st.shape.rank == 2 ? st.shape.cols : st.shape.rows;
        std::vector<ExprPtr> out;
        for (std::size_t r = 0; r < rows; ++r) {
          std::vector<std::pair<int, ExprPtr>> terms;
          for (std::size_t c = 0; c < cols; ++c)
            terms.emplace_back(1, st.elems[r * cols + c]);
          out.push_back(
              mk_gesum(std::move(terms), static_cast<int>(cols / 2 + 1)));
        }
        st.elems = std::move(out);
        st.shape = Shape::vec(rows);
        break;
      }
      case LayerKind::CountHot: {
        const std::size_t n = st.elems.size();
        std::vector<ExprPtr> out;
        for (std::size_t k = 0; k <= n; ++k) {
          // exactly k low == at least n-k high and not at least n-k+1 high
          std::vector<std::pair<int, ExprPtr>> t1, t2;
          for (const auto& e : st.elems) {
            t1.emplace_back(1, e);
            t2.emplace_back(1, e);
          }
          ExprPtr ge = mk_gesum(std::move(t1), static_cast<int>(n - k));
          ExprPtr gt = mk_gesum(std::move(t2), static_cast<int>(n - k + 1));
          out.push_back(mk_and({ge, mk_not(gt)}));
        }
        st.elems = std::move(out);
        st.shape = Shape::vec(n + 1);
        break;
      }
      case LayerKind::Harden:
      case LayerKind::Dropout:
        break;  // nop in the discrete aspect
      case LayerKind::Reshape:
        st.shape = l.reshape_to;
        break;
      case LayerKind::BucketSum:
        throw std::invalid_argument(
            "symbolic_forward: unsupported layer kind bucket_sum (integer "
            "logits are not boolean outputs)");
      case LayerKind::MaxReduceGroups: {
        const std::size_t g = l.width;
        const std::size_t sz = st.elems.size() / g;
        std::vector<ExprPtr> out;
        for (std::size_t j = 0; j < g; ++j) {
          std::vector<ExprPtr> group(st.elems.begin() + j * sz,
                                     st.elems.begin() + (j + 1) * sz);
          out.push_back(mk_or(std::move(group)));
        }
        st.elems = std::move(out);
        st.shape = Shape::vec(g);
        break;
      }
    }
  }
  prog.outputs = std::move(st.elems);
  prog.n_weights = wid;
  return prog;
}

// ---- bind ----

namespace {

ExprPtr bind_expr(const ExprPtr& e, std::span<const uint8_t> w) {
  switch (e->kind) {
    case BoolExpr::Kind::Weight:
      return mk_const(w[static_cast<std::size_t>(e->weight_id)] != 0);
    case BoolExpr::Kind::Var:
    case BoolExpr::Kind::Const:
      return e;
    case BoolExpr::Kind::Not:
      return mk_not(bind_expr(e->kids[0], w));
    case BoolExpr::Kind::And:
    case BoolExpr::Kind::Or:
    case BoolExpr::Kind::Xor: {
      std::vector<ExprPtr> kids;
      for (const auto& k : e->kids) kids.push_back(bind_expr(k, w));
      if (e->kind == BoolExpr::Kind::Xor)
        return mk_xor(kids[0], kids[1]);
      auto out = std::make_shared<BoolExpr>();
      out->kind = e->kind;
      out->kids = std::move(kids);
      return out;
    }
    case BoolExpr::Kind::GeSum: {
      std::vector<std::pair<int, ExprPtr>> terms;
      for (const auto& [c, t] : e->terms)
        terms.emplace_back(c, bind_expr(t, w));
      return mk_gesum(std::move(terms), e->threshold);
    }
  }
  return e;
}

}  // namespace

Program bind(const Program& p, std::span<const uint8_t> weight_bits) {
  if (weight_bits.size() != static_cast<std::size_t>(p.n_weights))
    throw std::invalid_argument(
        "bind: weight count mismatch, program expects " +
        std::to_string(p.n_weights) + " got " +
        std::to_string(weight_bits.size()));
  Program out;
  out.inputs = p.inputs;
  out.n_weights = 0;
  for (const auto& o : p.outputs) out.outputs.push_back(bind_expr(o, weight_bits));
  return out;
}

// ---- simplify ----

namespace {

ExprPtr simplify_once(const ExprPtr& e) {
  switch (e->kind) {
    case BoolExpr::Kind::Var:
    case BoolExpr::Kind::Weight:
    case BoolExpr::Kind::Const:
      return e;
    case BoolExpr::Kind::Not: {
      ExprPtr c = simplify_once(e->kids[0]);
      if (c->kind == BoolExpr::Kind::Const) return mk_const(!c->value);
      if (c->kind == BoolExpr::Kind::Not) return c->kids[0];
      return mk_not(std::move(c));
    }
    case BoolExpr::Kind::Xor: {
      ExprPtr a = simplify_once(e->kids[0]);
      ExprPtr b = simplify_once(e->kids[1]);
      const bool ca = a->kind == BoolExpr::Kind::Const;
      const bool cb = b->kind == BoolExpr::Kind::Const;
      if (ca && cb) return mk_const(a->value != b->value);
      if (ca) return a->value ? mk_not(std::move(b)) : b;
      if (cb) return b->value ? mk_not(std::move(a)) : a;
      return mk_xor(std::move(a), std::move(b));
    }
    case BoolExpr::Kind::And: {
      std::vector<ExprPtr> kids;
      for (const auto& k : e->kids) {
        ExprPtr c = simplify_once(k);
        if (c->kind == BoolExpr::Kind::Const) {
          if (!c->value) return mk_const(false);  // annihilator
          continue;                               // identity
        }
        kids.push_back(std::move(c));
      }
      return mk_and(std::move(kids));
    }
    case BoolExpr::Kind::Or: {
      std::vector<ExprPtr> kids;
      for (const auto& k : e->kids) {
        ExprPtr c = simplify_once(k);
        if (c->kind == BoolExpr::Kind::Const) {
          if (c->value) return mk_const(true);
          continue;
        }
        kids.push_back(std::move(c));
      }
      return mk_or(std::move(kids));
    }
    case BoolExpr::Kind::GeSum: {
      int threshold = e->threshold;
      std::vector<std::pair<int, ExprPtr>> terms;
      for (const auto& [c, t] : e->terms) {
        ExprPtr s = simplify_once(t);
        if (s->kind == BoolExpr::Kind::Const) {
          if (s->value) threshold -= c;  // fold into the threshold
          continue;                      // false terms never contribute
        }
        bool merged = false;
        for (auto& [mc, mt] : terms) {
          if (expr_equal(mt, s)) {  // merge syntactically equal terms
            mc += c;
            merged = true;
            break;
          }
        }
        if (!merged) terms.emplace_back(c, std::move(s));
      }
      if (threshold <= 0) return mk_const(true);  // guaranteed
      long total = 0;
      for (const auto& [c, t] : terms) total += c;
      if (total < threshold) return mk_const(false);  // unreachable
      if (total == threshold) {  // every term must be high
        std::vector<ExprPtr> kids;
        for (auto& [c, t] : terms) kids.push_back(std::move(t));
        return mk_and(std::move(kids));
      }
      if (threshold == 1) {  // any term suffices
        std::vector<ExprPtr> kids;
        for (auto& [c, t] : terms) kids.push_back(std::move(t));
        return mk_or(std::move(kids));
      }
      return mk_gesum(std::move(terms), threshold);
    }
  }
  return e;
}

}  // namespace

ExprPtr simplify_expr(ExprPtr e) {
  for (;;) {
    ExprPtr next = simplify_once(e);
    if (expr_equal(next, e)) return next;
    e = std::move(next);
  }
}

Program simplify(const Program& p) {
  Program out;
  out.inputs = p.inputs;
  out.n_weights = p.n_weights;
  for (const auto& o : p.outputs) out.outputs.push_back(simplify_expr(o));
  return out;
}

std::vector<uint8_t> eval_program(const Program& p,
                                  std::span<const uint8_t> input_bits) {
  if (input_bits.size() != p.inputs.size())
    throw std::invalid_argument("eval_program: input width mismatch");
  std::map<std::string, bool> env;
  for (std::size_t i = 0; i < p.inputs.size(); ++i)
    env[p.inputs[i]] = input_bits[i] != 0;
  std::vector<uint8_t> out;
  for (const auto& o : p.outputs) out.push_back(eval_expr(o, env) ? 1 : 0);
  return out;
}

// ---- printing ----

namespace {

void print_coeff_gesum(const ExprPtr& e, std::ostringstream& os);

void print_python(const ExprPtr& e, std::ostringstream& os) {
  switch (e->kind) {
    case BoolExpr::Kind::Var: os << e->name; return;
    case BoolExpr::Kind::Weight: os << "w" << e->weight_id + 1; return;
    case BoolExpr::Kind::Const: os << (e->value ? "True" : "False"); return;
    case BoolExpr::Kind::Not:
      os << "not(";
      print_python(e->kids[0], os);
      os << ")";
      return;
    case BoolExpr::Kind::And:
    case BoolExpr::Kind::Or: {
      os << (e->kind == BoolExpr::Kind::And ? "and(" : "or(");
      for (std::size_t i = 0; i < e->kids.size(); ++i) {
        if (i) os << ", ";
        print_python(e->kids[i], os);
      }
      os << ")";
      return;
    }
    case BoolExpr::Kind::Xor:
      os << "xor(";
      print_python(e->kids[0], os);
      os << ", ";
      print_python(e->kids[1], os);
      os << ")";
      return;
    case BoolExpr::Kind::GeSum: {
      os << "ge(sum((0";
      for (const auto& [c, t] : e->terms) {
        os << ", ";
        if (c != 1) {
          os << "mul(" << c << ", ";
          print_python(t, os);
          os << ")";
        } else {
          print_python(t, os);
        }
      }
      os << ")), " << e->threshold << ")";
      return;
    }
  }
}

void print_coeff_atom(const ExprPtr& e, std::ostringstream& os) {
  switch (e->kind) {
    case BoolExpr::Kind::Var: os << e->name; return;
    case BoolExpr::Kind::Weight: os << "w" << e->weight_id + 1; return;
    case BoolExpr::Kind::Const: os << (e->value ? "1" : "0"); return;
    case BoolExpr::Kind::Not:
      os << "!";
      if (e->kids[0]->kind == BoolExpr::Kind::Var ||
          e->kids[0]->kind == BoolExpr::Kind::Weight) {
        print_coeff_atom(e->kids[0], os);
      } else {
        os << "(";
        print_coeff_atom(e->kids[0], os);
        os << ")";
      }
      return;
    case BoolExpr::Kind::And:
    case BoolExpr::Kind::Or:
    case BoolExpr::Kind::Xor: {
      const char* sep = e->kind == BoolExpr::Kind::And   ? " & "
                        : e->kind == BoolExpr::Kind::Or ? " | "
                                                        : " ^ ";
      os << "(";
      for (std::size_t i = 0; i < e->kids.size(); ++i) {
        if (i) os << sep;
        print_coeff_atom(e->kids[i], os);
      }
      os << ")";
      return;
    }
    case BoolExpr::Kind::GeSum:
      os << "(";
      print_coeff_gesum(e, os);
      os << ")";
      return;
  }
}

// Base variable name when the term is a plain or negated variable.
const std::string* base_var(const ExprPtr& e, bool& negated) {
  if (e->kind == BoolExpr::Kind::Var) {
    negated = false;
    return &e->name;
  }
  if (e->kind == BoolExpr::Kind::Not &&
      e->kids[0]->kind == BoolExpr::Kind::Var) {
    negated = true;
    return &e->kids[0]->name;
  }
  return nullptr;
}

void print_coeff_term(int coeff, const ExprPtr& e, std::ostringstream& os) {
  if (coeff != 1) os << coeff << " ";
  print_coeff_atom(e, os);
}

// Renders a GeSum as "4 !very-cold + (3 warm + !warm) + ... >= 11", grouping
// positive/negated pairs of the same variable.
void print_coeff_gesum(const ExprPtr& e, std::ostringstream& os) {
  std::vector<bool> used(e->terms.size(), false);
  bool first = true;
  auto sep = [&] {
    if (!first) os << " + ";
    first = false;
  };
  for (std::size_t i = 0; i < e->terms.size(); ++i) {
    if (used[i]) continue;
    bool neg_i = false;
    const std::string* v_i = base_var(e->terms[i].second, neg_i);
    std::size_t partner = e->terms.size();
    if (v_i) {
      for (std::size_t j = i + 1; j < e->terms.size(); ++j) {
        if (used[j]) continue;
        bool neg_j = false;
        const std::string* v_j = base_var(e->terms[j].second, neg_j);
        if (v_j && *v_j == *v_i && neg_j != neg_i) {
          partner = j;
          break;
        }
      }
    }
    sep();
    if (partner == e->terms.size()) {
      print_coeff_term(e->terms[i].first, e->terms[i].second, os);
      used[i] = true;
      continue;
    }
    const int ci = e->terms[i].first, cj = e->terms[partner].first;
    if (ci == cj) {
      if (ci != 1) os << ci << " ";
      os << "(";
      print_coeff_term(1, e->terms[i].second, os);
      os << " + ";
      print_coeff_term(1, e->terms[partner].second, os);
      os << ")";
    } else {
      os << "(";
      print_coeff_term(ci, e->terms[i].second, os);
      os << " + ";
      print_coeff_term(cj, e->terms[partner].second, os);
      os << ")";
    }
    used[i] = used[partner] = true;
  }
  if (first) os << "0";
  os << " >= " << e->threshold;
}

}  // namespace

std::string pretty_print_expr(const ExprPtr& e, PrintStyle style) {
  std::ostringstream os;
  if (style == PrintStyle::PythonLike) {
    print_python(e, os);
  } else if (e->kind == BoolExpr::Kind::GeSum) {
    print_coeff_gesum(e, os);
  } else {
    print_coeff_atom(e, os);
  }
  return os.str();
}

std::string pretty_print(const Program& p, PrintStyle style) {
  std::ostringstream os;
  os << "def dbNet(";
  for (std::size_t i = 0; i < p.inputs.size(); ++i) {
    if (i) os << ", ";
    os << p.inputs[i];
  }
  os << "):\n  return [\n";
  for (std::size_t i = 0; i < p.outputs.size(); ++i) {
    os << "    " << pretty_print_expr(p.outputs[i], style);
    if (i + 1 < p.outputs.size()) os << ",";
    os << "\n";
  }
  os << "  ]\n";
  return os.str();
}

// ---- parsing (python_like style) ----

namespace {

struct Parser {
  const std::string& src;
  std::size_t at = 0;

  explicit Parser(const std::string& s) : src(s) {}

  [[noreturn]] void fail(const std::string& msg) const {
    throw std::invalid_argument("parse error at offset " + std::to_string(at) +
                                ": " + msg);
  }

  void skip_ws() {
    while (at < src.size() && (std::isspace(static_cast<unsigned char>(src[at])) != 0))
      ++at;
  }

  bool eat(char c) {
    skip_ws();
    if (at < src.size() && src[at] == c) {
      ++at;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!eat(c)) fail(std::string("expected '") + c + "'");
  }

  bool peek_is(char c) {
    skip_ws();
    return at < src.size() && src[at] == c;
  }

  static bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  }

  std::string ident() {
    skip_ws();
    std::size_t b = at;
    while (at < src.size() && ident_char(src[at])) ++at;
    if (b == at) fail("expected identifier");
    return src.substr(b, at - b);
  }

  long integer() {
    skip_ws();
    std::size_t b = at;
    if (at < src.size() && (src[at] == '-' || src[at] == '+')) ++at;
    while (at < src.size() && std::isdigit(static_cast<unsigned char>(src[at])))
      ++at;
    if (b == at) fail("expected integer");
    return std::stol(src.substr(b, at - b));
  }

  bool lookahead_word(const std::string& w) {
    skip_ws();
    if (src.compare(at, w.size(), w) != 0) return false;
    const std::size_t after = at + w.size();
    return after >= src.size() || !ident_char(src[after]);
  }

  static bool is_weight_name(const std::string& s) {
    if (s.size() < 2 || s[0] != 'w') return false;
    for (std::size_t i = 1; i < s.size(); ++i)
      if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    return true;
  }

  ExprPtr atom_from_ident(const std::string& name) {
    if (name == "True") return mk_const(true);
    if (name == "False") return mk_const(false);
    if (is_weight_name(name)) return mk_weight(std::stoi(name.substr(1)) - 1);
    return mk_var(name);
  }

  // sum((0, t1, t2, ...)) possibly nested; items collected in order
  void parse_sum_items(std::vector<std::pair<int, ExprPtr>>& terms) {
    expect('(');
    expect('(');
    bool first_item = true;
    for (;;) {
      skip_ws();
      if (peek_is(')')) break;
      if (!first_item) expect(',');
      first_item = false;
      skip_ws();
      if (lookahead_word("sum")) {
        (void)ident();
        parse_sum_items(terms);  // nested sums flatten
        continue;
      }
      if (at < src.size() && std::isdigit(static_cast<unsigned char>(src[at]))) {
        const long v = integer();
        if (v != 0) fail("unexpected integer term in sum");
        continue;  // leading zero accumulator
      }
      if (lookahead_word("mul")) {
        (void)ident();
        expect('(');
        const long c = integer();
        expect(',');
        ExprPtr t = expr();
        expect(')');
        terms.emplace_back(static_cast<int>(c), std::move(t));
        continue;
      }
      terms.emplace_back(1, expr());
    }
    expect(')');
    expect(')');
  }

  ExprPtr expr() {
    skip_ws();
    if (at >= src.size()) fail("unexpected end of input");
    if (std::isdigit(static_cast<unsigned char>(src[at]))) {
      const long v = integer();
      if (v == 0) return mk_const(false);
      if (v == 1) return mk_const(true);
      fail("unexpected integer literal");
    }
    const std::string name = ident();
    if (name == "not") {
      expect('(');
      ExprPtr e = expr();
      expect(')');
      return mk_not(std::move(e));
    }
    if (name == "and" || name == "or") {
      expect('(');
      std::vector<ExprPtr> kids;
      if (!peek_is(')')) {
        kids.push_back(expr());
        while (eat(',')) kids.push_back(expr());
      }
      expect(')');
      auto e = std::make_shared<BoolExpr>();
      e->kind = name == "and" ? BoolExpr::Kind::And : BoolExpr::Kind::Or;
      e->kids = std::move(kids);
      if (e->kids.empty()) return mk_const(name == "and");
      if (e->kids.size() == 1) return e->kids[0];
      return e;
    }
    if (name == "xor") {
      expect('(');
      ExprPtr a = expr();
      expect(',');
      ExprPtr b = expr();
      expect(')');
      return mk_xor(std::move(a), std::move(b));
    }
    if (name == "ne") {  // ne(x, 0) idiom normalizes to the variable itself
      expect('(');
      ExprPtr v = expr();
      expect(',');
      const long z = integer();
      expect(')');
      if (z != 0) fail("ne() only supports comparison with 0");
      return v;
    }
    if (name == "ge") {
      expect('(');
      skip_ws();
      if (!lookahead_word("sum")) fail("ge() expects sum(...)");
      (void)ident();
      std::vector<std::pair<int, ExprPtr>> terms;
      parse_sum_items(terms);
      expect(',');
      const long k = integer();
      expect(')');
      return mk_gesum(std::move(terms), static_cast<int>(k));
    }
    if (name == "mul") fail("mul() only allowed inside sum()");
    return atom_from_ident(name);
  }

  Program program() {
    skip_ws();
    if (!lookahead_word("def")) {
      // bare expression list fallback: a single expression
      Program p;
      p.outputs.push_back(expr());
      finish(p);
      return p;
    }
    (void)ident();  // def
    (void)ident();  // function name
    Program p;
    expect('(');
    if (!peek_is(')')) {
      p.inputs.push_back(ident());
      while (eat(',')) p.inputs.push_back(ident());
    }
    expect(')');
    expect(':');
    skip_ws();
    if (!lookahead_word("return")) fail("expected return");
    (void)ident();
    expect('[');
    if (!peek_is(']')) {
      p.outputs.push_back(expr());
      while (eat(',')) {
        skip_ws();
        if (peek_is(']')) break;  // trailing comma
        p.outputs.push_back(expr());
      }
    }
    expect(']');
    finish(p);
    return p;
  }

  void finish(Program& p) {
    int max_w = -1;
    std::function<void(const ExprPtr&)> scan = [&](const ExprPtr& e) {
      if (e->kind == BoolExpr::Kind::Weight)
        max_w = std::max(max_w, e->weight_id);
      for (const auto& k : e->kids) scan(k);
      for (const auto& [c, t] : e->terms) scan(t);
    };
    for (const auto& o : p.outputs) scan(o);
    p.n_weights = max_w + 1;
    skip_ws();
  }
};

}  // namespace

Program parse_program(const std::string& text) {
  Parser p(text);
  Program prog = p.program();
  if (p.at != p.src.size()) {
    p.skip_ws();
    if (p.at != p.src.size()) p.fail("trailing input");
  }
  return prog;
}

ExprPtr parse_expr(const std::string& text) {
  Parser p(text);
  ExprPtr e = p.expr();
  p.skip_ws();
  if (p.at != p.src.size()) p.fail("trailing input");
  return e;
}

}  // namespace dbnet
