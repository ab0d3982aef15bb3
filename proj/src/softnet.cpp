#include "dbnet/softnet.hpp"

#include <stdexcept>

#include "dbnet/rng.hpp"

namespace dbnet {

SoftNet SoftNet::create(NetSpec spec) {
  spec.validate();
  SoftNet net;
  net.spec = std::move(spec);
  for (Shape s : net.spec.weight_shapes())
    net.weights.push_back(SoftTensor::zeros(s));
  return net;
}

void SoftNet::init_weights(uint64_t seed) {
  std::mt19937_64 rng(splitmix64(seed));
  std::size_t wi = 0;
  for (const auto& l : spec.layers) {
    if (!is_weighted(l.kind)) continue;
    weights[wi] = dbnet::init_weights(l.init, weights[wi].shape, rng);
    ++wi;
  }
}

Var neg_layer(Tape& t, Var W, Var x) { return t.not_xor(W, x); }

Var implies_layer(Tape& t, Var W, Var x) { return t.pair_implies(W, x); }

Var and_layer(Tape& t, Var W, Var x) {
  return t.row_min(t.pair_implies(W, x));
}

Var or_layer(Tape& t, Var W, Var x) { return t.row_max(t.pair_and(W, x)); }

Var maj_reduce(Tape& t, Var x) { return t.row_maj(x); }

Var harden_layer(Tape& t, Var x) { return t.ste_harden(x); }

Var dropout_layer(Tape& t, Var x, double p, bool train_mode, uint64_t seed) {
  if (!train_mode || p <= 0.0) return x;
  const std::size_t n = t.shape(x).size();
  std::vector<uint8_t> mask(n);
  std::mt19937_64 rng(splitmix64(seed));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& m : mask) m = u(rng) < p ? 1 : 0;
  return t.flip_where(x, mask);
}

std::vector<Var> register_weight_leaves(const SoftNet& net, Tape& tape) {
  std::vector<Var> vars;
  vars.reserve(net.weights.size());
  for (const auto& w : net.weights) vars.push_back(tape.leaf(w));
  return vars;
}

Var softnet_forward(const SoftNet& net, Tape& tape,
                    std::span<const Var> weight_vars,
                    std::span<const double> input, bool train_mode,
                    uint64_t dropout_seed) {
  if (input.size() != net.spec.input_width)
    throw std::invalid_argument("softnet_forward: input width mismatch");
  Var x = tape.input(input, Shape::vec(input.size()));
  std::size_t wi = 0;
  std::size_t li = 0;
  for (const auto& l : net.spec.layers) {
    ++li;
    switch (l.kind) {
      case LayerKind::ConcatNegation: {
        Var neg = tape.affine(x, -1.0, 1.0);
        x = l.negated_first ? tape.concat(neg, x) : tape.concat(x, neg);
        break;
      }
      case LayerKind::NegLayer:
        x = neg_layer(tape, weight_vars[wi++], x);
        break;
      case LayerKind::ImpliesLayer:
        x = implies_layer(tape, weight_vars[wi++], x);
        break;
      case LayerKind::AndLayer:
        x = and_layer(tape, weight_vars[wi++], x);
        break;
      case LayerKind::OrLayer:
        x = or_layer(tape, weight_vars[wi++], x);
        break;
      case LayerKind::MajReduce:
        x = maj_reduce(tape, x);
        break;
      case LayerKind::CountHot:
        x = ad_count_hot(tape, x, PairwiseConj::Min);
        break;
      case LayerKind::Harden:
        x = harden_layer(tape, x);
        break;
      case LayerKind::Dropout:
        x = dropout_layer(tape, x, l.dropout_p, train_mode,
                          dropout_seed ^ (li * 0xD6E8FEB86659FD93ull));
        break;
      case LayerKind::Reshape:
        x = tape.reshape(x, l.reshape_to);
        break;
      case LayerKind::BucketSum:
        x = tape.bucket_sum(x, l.width);
        break;
      case LayerKind::MaxReduceGroups: {
        const std::size_t n = tape.shape(x).size();
        x = tape.row_max(tape.reshape(x, Shape::mat(l.width, n / l.width)));
        break;
      }
    }
  }
  return x;
}

int argmax_label(std::span<const double> outputs) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < outputs.size(); ++i)
    if (outputs[i] > outputs[best]) best = i;
  return static_cast<int>(best);
}

int argmax_label(std::span<const int64_t> outputs) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < outputs.size(); ++i)
    if (outputs[i] > outputs[best]) best = i;
  return static_cast<int>(best);
}

std::vector<double> embed_bits(std::span<const uint8_t> bits) {
  std::vector<double> out(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) out[i] = bits[i] ? 1.0 : 0.0;
  return out;
}

std::vector<double> soft_outputs(const SoftNet& net,
                                 std::span<const uint8_t> row_bits) {
  Tape tape;
  std::vector<double> input = embed_bits(row_bits);
  std::vector<Var> wv = register_weight_leaves(net, tape);
  Var out = softnet_forward(net, tape, wv, input, false, 0);
  auto v = tape.values(out);
  return {v.begin(), v.end()};
}

int soft_predict(const SoftNet& net, std::span<const uint8_t> row_bits) {
  auto out = soft_outputs(net, row_bits);
  return argmax_label(out);
}

}  // namespace dbnet
