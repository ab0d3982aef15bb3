#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dbnet/netspec.hpp"

namespace dbnet {

// Immutable boolean expression AST over named inputs, weight symbols and
// integer threshold-of-sum nodes.
struct BoolExpr;
using ExprPtr = std::shared_ptr<const BoolExpr>;

struct BoolExpr {
  enum class Kind : uint8_t { Var, Weight, Const, Not, And, Or, Xor, GeSum };
  Kind kind = Kind::Const;
  std::string name;    // Var
  int weight_id = -1;  // Weight (0-based; prints as w<id+1>)
  bool value = false;  // Const
  std::vector<ExprPtr> kids;                   // Not(1), And(n>=1), Or(n>=1), Xor(2)
  std::vector<std::pair<int, ExprPtr>> terms;  // GeSum, coefficients > 0
  int threshold = 0;                           // GeSum, >= 0 after normalization
};

ExprPtr mk_var(std::string name);
ExprPtr mk_weight(int id);
ExprPtr mk_const(bool v);
ExprPtr mk_not(ExprPtr e);
ExprPtr mk_and(std::vector<ExprPtr> kids);
ExprPtr mk_or(std::vector<ExprPtr> kids);
ExprPtr mk_xor(ExprPtr a, ExprPtr b);
ExprPtr mk_gesum(std::vector<std::pair<int, ExprPtr>> terms, int threshold);

bool expr_equal(const ExprPtr& a, const ExprPtr& b);
std::size_t expr_size(const ExprPtr& e);

// Evaluation; weights must be bound (no Weight nodes) unless weight values
// are supplied.
bool eval_expr(const ExprPtr& e, const std::map<std::string, bool>& inputs);

struct Program {
  std::vector<std::string> inputs;
  std::vector<ExprPtr> outputs;
  int n_weights = 0;  // weight symbols expected when binding
};

// Evaluates the architecture over symbols: one expression per output bit,
// weights left as symbols w1..wN. Layers whose output is not boolean
// (bucket-sum heads) are rejected.
Program symbolic_forward(const NetSpec& spec);

// Substitutes Const for every Weight symbol.
Program bind(const Program& p, std::span<const uint8_t> weight_bits);

// Fixed-point rewrite: constant folding, double negation, xor-with-const,
// and/or identity and annihilator, GeSum coefficient merging and threshold
// folding. Semantics-preserving.
ExprPtr simplify_expr(ExprPtr e);
Program simplify(const Program& p);

enum class PrintStyle { PythonLike, CoeffSum };
std::string pretty_print_expr(const ExprPtr& e, PrintStyle style);
std::string pretty_print(const Program& p, PrintStyle style);

// Parses the python_like style back into a Program (round-trips exactly).
Program parse_program(const std::string& text);
ExprPtr parse_expr(const std::string& text);

std::vector<uint8_t> eval_program(const Program& p,
                                  std::span<const uint8_t> input_bits);

// CNF export: Tseitin encoding with sequential-counter cardinality
// constraints for GeSum nodes. Variables 1..m are the program inputs; the
// models restricted to them are exactly the inputs where the output is 1.
struct Cnf {
  int n_vars = 0;
  std::vector<std::vector<int>> clauses;
  std::vector<std::string> input_names;
};

Cnf to_cnf(const Program& p, std::size_t output_index);
std::string to_dimacs(const Cnf& c);

}  // namespace dbnet
