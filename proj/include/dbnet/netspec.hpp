#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dbnet/tensor.hpp"

namespace dbnet {

enum class LayerKind : uint8_t {
  ConcatNegation,
  NegLayer,
  ImpliesLayer,
  AndLayer,
  OrLayer,
  MajReduce,
  CountHot,
  Harden,
  Dropout,
  Reshape,
  BucketSum,
  MaxReduceGroups,
};

bool is_weighted(LayerKind k);
const char* layer_kind_name(LayerKind k);
LayerKind layer_kind_from_name(const std::string& name);

struct InitScheme {
  enum class Kind : uint8_t { Constant, BernoulliMix, Uniform };
  Kind kind = Kind::Constant;
  double a = 0.5;  // Constant: value; BernoulliMix: hi; Uniform: lo
  double b = 0.0;  // BernoulliMix: lo; Uniform: hi
  double p = 0.0;  // BernoulliMix: probability of hi

  static InitScheme constant(double c) { return {Kind::Constant, c, 0, 0}; }
  static InitScheme bernoulli_mix(double hi, double lo, double p_hi) {
    return {Kind::BernoulliMix, hi, lo, p_hi};
  }
  static InitScheme uniform(double lo, double hi) {
    return {Kind::Uniform, lo, hi, 0};
  }
};

struct LayerSpec {
  LayerKind kind = LayerKind::Harden;
  uint32_t width = 0;     // n for weighted layers; group/bucket count otherwise
  uint32_t in_width = 0;  // m for weighted layers, filled in by validate()
  InitScheme init;
  double dropout_p = 0.0;
  Shape reshape_to;            // Reshape target
  bool negated_first = false;  // ConcatNegation emits [1-x, x] instead of [x, 1-x]
};

// Declarative architecture: the single source of truth for the soft, hard,
// and symbolic aspects of a net.
struct NetSpec {
  std::vector<LayerSpec> layers;
  uint32_t input_width = 0;
  uint32_t n_labels = 0;
  std::string experiment;  // provenance tag used by the CLI
  std::vector<std::string> feature_names;

  // Walks the layer chain, filling in weighted in_widths and checking shape
  // consistency end to end. Throws std::invalid_argument on inconsistency.
  void validate();
  Shape output_shape() const;
  std::size_t weight_bits() const;
  std::vector<Shape> weight_shapes() const;
};

struct ArchParams {
  std::size_t toy_features = 1;
  std::size_t toy_width = 2;
  double iris_dropout_p = 0.1;
  bool xor_head_negated_first = true;  // head order [1-y, y]
};

// The four reference architectures: toy, iris, xor, mnist.
NetSpec build_architecture(const std::string& name, const ArchParams& p = {});

SoftTensor init_weights(const InitScheme& scheme, Shape shape,
                        std::mt19937_64& rng);

// A weight parked exactly on the 1/2 threshold is a genuine optimizer
// attractor (its not-xor output is constantly 1/2), but hard-equivalence
// only covers off-threshold values, so soft and hard predictions can split
// there. Snap such weights just below 1/2 -- the side harden() assigns --
// far enough that a float32 round trip also stays below.
double snap_off_half(double w);

}  // namespace dbnet
