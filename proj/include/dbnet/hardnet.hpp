#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dbnet/netspec.hpp"
#include "dbnet/softnet.hpp"

namespace dbnet {

// Bit vector packed into 64-bit words, little-endian bit order within a word
// (bit i lives in words()[i / 64] at bit position i % 64). Padding bits past
// size() are kept zero.
class HardVec {
 public:
  HardVec() = default;
  explicit HardVec(std::size_t n) : n_(n), w_((n + 63) / 64, 0) {}

  static HardVec from_bits(std::span<const uint8_t> bits);
  // Byte serialization: bit i -> bytes[i / 8], bit position i % 8.
  static HardVec from_bytes(std::span<const uint8_t> bytes, std::size_t n);

  std::size_t size() const { return n_; }
  bool get(std::size_t i) const { return (w_[i >> 6] >> (i & 63)) & 1; }
  void set(std::size_t i, bool v) {
    if (v)
      w_[i >> 6] |= uint64_t{1} << (i & 63);
    else
      w_[i >> 6] &= ~(uint64_t{1} << (i & 63));
  }
  std::size_t popcount() const;
  std::size_t popcount_range(std::size_t begin, std::size_t end) const;
  std::span<const uint64_t> words() const { return w_; }
  // Stores a whole word, masking padding bits in the tail word.
  void set_word(std::size_t i, uint64_t v) {
    if (i + 1 == w_.size() && (n_ & 63) != 0) v &= (uint64_t{1} << (n_ & 63)) - 1;
    w_[i] = v;
  }

  std::vector<uint8_t> to_bits() const;
  std::vector<uint8_t> to_bytes() const;

  bool operator==(const HardVec&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<uint64_t> w_;
};

// Word-level boolean row ops (the padding of both operands must be canonical).
HardVec hard_xnor(const HardVec& w, const HardVec& x);         // ~(w ^ x)
HardVec hard_implies(const HardVec& w, const HardVec& x);      // ~w | x
bool hard_and_selected(const HardVec& w, const HardVec& x);    // all selected high
bool hard_or_selected(const HardVec& w, const HardVec& x);     // any selected high

// Discrete evaluation plan: every op is boolean/integer, no real arithmetic.
enum class HardOpKind : uint8_t {
  ConcatNegate,
  Xnor,            // neg layer rows
  ImpliesMask,     // implies layer rows
  AndSelected,     // and-neuron per row
  OrSelected,      // or-neuron per row
  MajThreshold,    // popcount >= floor(n/2)+1 per row
  CountLowOneHot,
  GroupAny,
  BucketPopcount,
  ReshapeRows,
  Nop,
};

const char* hard_op_name(HardOpKind k);

struct HardPlanOp {
  HardOpKind kind = HardOpKind::Nop;
  int32_t weight_block = -1;  // index into weight_rows for weighted ops
  uint32_t width = 0;         // groups/buckets for GroupAny/BucketPopcount
  uint32_t rows = 0, cols = 0;  // ReshapeRows target
  bool negated_first = false;
};

// Lossless hardened aspect of a SoftNet: 1-bit weights plus a plan of
// discrete ops.
struct HardNet {
  NetSpec spec;
  std::vector<HardVec> weight_blocks;            // row-major n*m bits per layer
  std::vector<std::vector<HardVec>> weight_rows; // same bits split per row
  std::vector<HardPlanOp> plan;

  std::size_t weight_bits() const;
  std::size_t weight_bytes() const { return (weight_bits() + 7) / 8; }
};

HardNet harden_net(const SoftNet& soft);
// Rebuilds the evaluation plan and per-row weight views from spec + blocks
// (used when loading a hard model from disk).
HardNet assemble_hard_net(NetSpec spec, std::vector<HardVec> blocks);

HardVec embed_hard(std::span<const uint8_t> bits);

// Integer logits: bucket popcounts for bucket-sum heads, else the final bits
// as 0/1 values. Prediction is the argmax, ties toward the lowest index.
std::vector<int64_t> hard_logits(const HardNet& net, const HardVec& input);
int hard_predict(const HardNet& net, const HardVec& input);

}  // namespace dbnet
