#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "dbnet/softbit.hpp"
#include "dbnet/tensor.hpp"

// Minimal reverse-mode differentiation over dense rank<=2 tensors.
// Define-by-run: ops compute forward values immediately and append a node
// with everything backward needs. Data-dependent choices (argmin, sort
// permutations, branch sides) are resolved at trace time, so backward is a
// single linear reverse sweep.
//
// A Tape is single-threaded; distinct tapes may run on distinct threads.
// Leaf/input nodes reference caller storage, which must outlive the tape use.

namespace dbnet {

struct Var {
  int32_t id = -1;
  bool valid() const { return id >= 0; }
};

struct Gradients {
  std::map<int32_t, SoftTensor> by_leaf;

  // Missing leaves read as zero.
  const SoftTensor* find(Var v) const {
    auto it = by_leaf.find(v.id);
    return it == by_leaf.end() ? nullptr : &it->second;
  }
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Drops all nodes but keeps arena capacity; re-arms backward.
  void reset();

  Var leaf(std::span<const double> data, Shape shape);
  Var leaf(const SoftTensor& t) { return leaf(t.data, t.shape); }
  Var input(std::span<const double> data, Shape shape);
  Var input(const SoftTensor& t) { return input(t.data, t.shape); }
  Var constant(std::span<const double> data, Shape shape);  // owned copy

  // Elementwise on equal shapes.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var affine(Var a, double k, double c);  // k*a + c

  // Fused soft-bit ops. The second operand may be a vector broadcast across
  // the rows of a matrix first operand.
  Var not_xor(Var w, Var x);
  Var pair_and(Var a, Var b);
  Var pair_or(Var a, Var b);
  Var pair_implies(Var w, Var x);
  Var pair_min(Var a, Var b);

  // Row reductions with arg tracking; a vector reduces to a length-1 vector.
  Var row_min(Var a);
  Var row_max(Var a);
  Var row_maj(Var a);

  Var sort_ascending(Var a);  // stable; permutation tracked
  // perm[k] = original index of the k-th sorted element.
  std::span<const int64_t> sort_perm(Var sorted) const;

  Var select(Var a, std::size_t i);  // vector element -> scalar
  Var concat(Var a, Var b);
  Var reshape(Var a, Shape s);
  Var mean_all(Var a);
  Var ste_harden(Var a);  // forward harden, backward identity
  Var gt_half(Var a);     // forward harden, gradient stops here
  Var flip_where(Var a, std::span<const uint8_t> mask);  // mask ? 1-x : x
  Var bucket_sum(Var a, std::size_t buckets);
  Var softmax_ce(Var logits, int label);

  const Shape& shape(Var v) const;
  std::span<const double> values(Var v) const;
  SoftTensor value(Var v) const;
  double scalar(Var v) const;

  // Reverse sweep from a scalar output. Each tape accepts exactly one
  // backward pass until reset().
  Gradients backward(Var output);

  // Like backward, but adds scale * d(output)/d(leaf) into accums[i] for
  // each leaves[i] instead of materializing a map.
  void backward_accumulate(Var output, std::span<const Var> leaves,
                           std::span<std::vector<double>> accums, double scale);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op : uint8_t {
    Leaf, Input, Add, Sub, Mul, Affine, NotXor, PairAnd, PairOr, PairImplies,
    PairMin, RowMin, RowMax, RowMaj, SortAsc, Select, Concat, Reshape,
    MeanAll, SteHarden, GtHalf, FlipWhere, BucketSum, SoftmaxCe,
  };

  struct Node {
    Op op = Op::Leaf;
    uint8_t flags = 0;  // 1: second operand row-broadcast
    int32_t a = -1;
    int32_t b = -1;
    Shape shape;
    const double* ext = nullptr;  // external storage for Leaf/Input
    std::size_t val = 0;          // offset into val_buf_ unless ext/alias
    std::size_t gval = 0;         // offset into grad_buf_
    std::size_t aux = 0;          // offset into aux_buf_
    double c0 = 0.0;
    double c1 = 0.0;
    int32_t i0 = 0;
  };

  int32_t push(Node n);
  std::size_t alloc_vals(std::size_t n);
  std::size_t alloc_aux(std::size_t n);
  const double* vals_of(const Node& n) const;
  double* mut_vals(const Node& n);
  const Node& node(Var v) const;
  void run_backward(Var output);

  std::vector<Node> nodes_;
  std::vector<double> val_buf_;
  std::vector<double> grad_buf_;
  std::vector<int64_t> aux_buf_;
  std::size_t val_used_ = 0;
  std::size_t grad_used_ = 0;
  std::size_t aux_used_ = 0;
  bool backward_done_ = false;
};

// Graph builders composing the soft operators from tape primitives.
Var ad_augmented_bit(Tape& t, Var x, std::size_t i);
Var ad_soft_and(Tape& t, Var x);
Var ad_soft_or(Tape& t, Var x);
Var ad_soft_implies(Tape& t, Var w, Var x);  // length-1 vectors
Var ad_soft_maj(Tape& t, Var x);
Var ad_count_hot(Tape& t, Var x, PairwiseConj conj = PairwiseConj::Min);
Var ad_soft_count(Tape& t, Var x, std::size_t k,
                  PairwiseConj conj = PairwiseConj::Min);

}  // namespace dbnet
