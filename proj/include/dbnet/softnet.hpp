#pragma once

#include <cstdint>
#include <span>

#include "dbnet/netspec.hpp"
#include "dbnet/tape.hpp"

namespace dbnet {

// A NetSpec plus trained real weights. Weights stay in [0,1]; the optimizer
// clamps after every step.
struct SoftNet {
  NetSpec spec;
  std::vector<SoftTensor> weights;  // one matrix per weighted layer

  static SoftNet create(NetSpec spec);
  void init_weights(uint64_t seed);
  std::size_t weight_bits() const { return spec.weight_bits(); }
};

// Layer building blocks over tape primitives. W is n x m, x is a length-m
// vector broadcast across rows.
Var neg_layer(Tape& t, Var W, Var x);      // elementwise not-xor
Var implies_layer(Tape& t, Var W, Var x);  // elementwise mask-to-true-or-nop
Var and_layer(Tape& t, Var W, Var x);      // n conjunction neurons
Var or_layer(Tape& t, Var W, Var x);       // n disjunction neurons
Var maj_reduce(Tape& t, Var x);            // majority along rows
Var harden_layer(Tape& t, Var x);          // straight-through harden
// Train mode flips each element with probability p using the seeded stream;
// eval mode is a nop.
Var dropout_layer(Tape& t, Var x, double p, bool train_mode, uint64_t seed);

// Registers the net's weight tensors as leaves on a tape, in layer order.
std::vector<Var> register_weight_leaves(const SoftNet& net, Tape& tape);

// Builds the forward graph for one input row (bits embedded as 0.0/1.0
// doubles by the caller). dropout_seed drives the per-row dropout masks in
// train mode; eval mode ignores it and dropout is a nop.
Var softnet_forward(const SoftNet& net, Tape& tape,
                    std::span<const Var> weight_vars,
                    std::span<const double> input, bool train_mode,
                    uint64_t dropout_seed);

// argmax with ties broken toward the lowest index.
int argmax_label(std::span<const double> outputs);
int argmax_label(std::span<const int64_t> outputs);

std::vector<double> embed_bits(std::span<const uint8_t> bits);

// Eval-mode forward returning the output vector (allocates a scratch tape).
std::vector<double> soft_outputs(const SoftNet& net,
                                 std::span<const uint8_t> row_bits);
int soft_predict(const SoftNet& net, std::span<const uint8_t> row_bits);

}  // namespace dbnet
