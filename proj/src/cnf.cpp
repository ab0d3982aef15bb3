#include <sstream>
#include <stdexcept>

#include "dbnet/symbolic.hpp"

namespace dbnet {

namespace {

// Tseitin encoder. Every internal node gets an equivalence definition so the
// encoding is polarity-safe (GeSum outputs appear under negation).
struct CnfBuilder {
  Cnf cnf;
  std::map<std::string, int> var_of_input;
  int true_var = 0;  // lazily created constant-true variable

  int fresh() { return ++cnf.n_vars; }

  void clause(std::initializer_list<int> lits) {
    cnf.clauses.emplace_back(lits);
  }
  void clause(std::vector<int> lits) { cnf.clauses.push_back(std::move(lits)); }

  int const_true() {
    if (true_var == 0) {
      true_var = fresh();
      clause({true_var});
    }
    return true_var;
  }

  // a <-> AND(lits)
  int def_and(const std::vector<int>& lits) {
    const int a = fresh();
    std::vector<int> back{a};
    for (int l : lits) {
      clause({-a, l});
      back.push_back(-l);
    }
    clause(std::move(back));
    return a;
  }

  // a <-> OR(lits)
  int def_or(const std::vector<int>& lits) {
    const int a = fresh();
    std::vector<int> fwd{-a};
    for (int l : lits) {
      clause({a, -l});
      fwd.push_back(l);
    }
    clause(std::move(fwd));
    return a;
  }

  // a <-> x xor y
  int def_xor(int x, int y) {
    const int a = fresh();
    clause({-a, x, y});
    clause({-a, -x, -y});
    clause({a, -x, y});
    clause({a, x, -y});
    return a;
  }

  // Sequential counter:  returns a literal equivalent to sum(lits) >= k.
  int at_least_k(const std::vector<int>& lits, int k) {
    const int n = static_cast<int>(lits.size());
    if (k <= 0) return const_true();
    if (k > n) return -const_true();
    // s[j] tracks "at least j+1 of the first i literals", built iteratively
    std::vector<int> prev;  // prev[j-1] <-> at least j of first i-1
    for (int i = 1; i <= n; ++i) {
      const int cap = std::min(i, k);
      std::vector<int> cur(static_cast<std::size_t>(cap));
      for (int j = 1; j <= cap; ++j) {
        // cur_j <-> prev_j | (x_i & prev_{j-1});  prev_0 = true, prev_j>i-1 = false
        const int xi = lits[static_cast<std::size_t>(i - 1)];
        const int carry =
            j == 1 ? xi
                   : (j - 1 <= static_cast<int>(prev.size())
                          ? def_and({xi, prev[static_cast<std::size_t>(j - 2)]})
                          : 0);
        const bool have_prev_j = j <= static_cast<int>(prev.size());
        if (!have_prev_j) {
          // cur_j <-> carry (no way to already have j without x_i)
          if (carry == 0) {
            cur[static_cast<std::size_t>(j - 1)] = -const_true();
          } else {
            cur[static_cast<std::size_t>(j - 1)] = carry;
          }
          continue;
        }
        if (carry == 0) {
          cur[static_cast<std::size_t>(j - 1)] = prev[static_cast<std::size_t>(j - 1)];
          continue;
        }
        cur[static_cast<std::size_t>(j - 1)] =
            def_or({prev[static_cast<std::size_t>(j - 1)], carry});
      }
      prev = std::move(cur);
    }
    return prev[static_cast<std::size_t>(k - 1)];
  }

  int encode(const ExprPtr& e) {
    switch (e->kind) {
      case BoolExpr::Kind::Var: {
        auto it = var_of_input.find(e->name);
        if (it == var_of_input.end())
          throw std::invalid_argument("to_cnf: unknown input " + e->name);
        return it->second;
      }
      case BoolExpr::Kind::Weight:
        throw std::invalid_argument("to_cnf: unbound weights");
      case BoolExpr::Kind::Const:
        return e->value ? const_true() : -const_true();
      case BoolExpr::Kind::Not:
        return -encode(e->kids[0]);
      case BoolExpr::Kind::And: {
        std::vector<int> lits;
        for (const auto& k : e->kids) lits.push_back(encode(k));
        return def_and(lits);
      }
      case BoolExpr::Kind::Or: {
        std::vector<int> lits;
        for (const auto& k : e->kids) lits.push_back(encode(k));
        return def_or(lits);
      }
      case BoolExpr::Kind::Xor:
        return def_xor(encode(e->kids[0]), encode(e->kids[1]));
      case BoolExpr::Kind::GeSum: {
        std::vector<int> lits;
        for (const auto& [c, t] : e->terms) {
          const int l = encode(t);
          for (int r = 0; r < c; ++r) lits.push_back(l);
        }
        return at_least_k(lits, e->threshold);
      }
    }
    throw std::logic_error("to_cnf: unhandled node kind");
  }
};

}  // namespace

Cnf to_cnf(const Program& p, std::size_t output_index) {
  if (output_index >= p.outputs.size())
    throw std::invalid_argument("to_cnf: output index out of range");
  CnfBuilder b;
  b.cnf.input_names = p.inputs;
  for (const auto& name : p.inputs) b.var_of_input[name] = b.fresh();
  const int out = b.encode(p.outputs[output_index]);
  b.clause({out});
  return std::move(b.cnf);
}

std::string to_dimacs(const Cnf& c) {
  std::ostringstream os;
  for (std::size_t i = 0; i < c.input_names.size(); ++i)
    os << "c var " << i + 1 << " = input " << c.input_names[i] << "\n";
  os << "p cnf " << c.n_vars << " " << c.clauses.size() << "\n";
  for (const auto& cl : c.clauses) {
    for (int l : cl) os << l << " ";
    os << "0\n";
  }
  return os.str();
}

}  // namespace dbnet
