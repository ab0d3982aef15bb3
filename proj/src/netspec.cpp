#include "dbnet/netspec.hpp"

#include <stdexcept>

namespace dbnet {

bool is_weighted(LayerKind k) {
  return k == LayerKind::NegLayer || k == LayerKind::ImpliesLayer ||
         k == LayerKind::AndLayer || k == LayerKind::OrLayer;
}

const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::ConcatNegation: return "concat_negation";
    case LayerKind::NegLayer: return "neg";
    case LayerKind::ImpliesLayer: return "implies";
    case LayerKind::AndLayer: return "and";
    case LayerKind::OrLayer: return "or";
    case LayerKind::MajReduce: return "maj_reduce";
    case LayerKind::CountHot: return "count_hot";
    case LayerKind::Harden: return "harden";
    case LayerKind::Dropout: return "dropout";
    case LayerKind::Reshape: return "reshape";
    case LayerKind::BucketSum: return "bucket_sum";
    case LayerKind::MaxReduceGroups: return "max_reduce_groups";
  }
  return "?";
}

LayerKind layer_kind_from_name(const std::string& name) {
  for (int k = 0; k <= static_cast<int>(LayerKind::MaxReduceGroups); ++k)
    if (name == layer_kind_name(static_cast<LayerKind>(k)))
      return static_cast<LayerKind>(k);
  throw std::invalid_argument("unknown layer kind: " + name);
}

namespace {

[[noreturn]] void bad_spec(const std::string& msg) {
  throw std::invalid_argument("NetSpec: " + msg);
}

Shape step_shape(LayerSpec& l, const Shape& in) {
  switch (l.kind) {
    case LayerKind::ConcatNegation:
      if (in.rank != 1) bad_spec("concat_negation needs a vector input");
      return Shape::vec(in.size() * 2);
    case LayerKind::NegLayer:
    case LayerKind::ImpliesLayer:
      if (in.rank != 1) bad_spec("weighted layers need a vector input");
      if (l.width == 0) bad_spec("weighted layer width must be positive");
      l.in_width = in.rows;
      return Shape::mat(l.width, in.rows);
    case LayerKind::AndLayer:
    case LayerKind::OrLayer:
      if (in.rank != 1) bad_spec("weighted layers need a vector input");
      if (l.width == 0) bad_spec("weighted layer width must be positive");
      l.in_width = in.rows;
      return Shape::vec(l.width);
    case LayerKind::MajReduce:
      return in.rank == 2 ? Shape::vec(in.rows) : Shape::vec(1);
    case LayerKind::CountHot:
      if (in.rank != 1) bad_spec("count_hot needs a vector input");
      return Shape::vec(in.size() + 1);
    case LayerKind::Harden:
    case LayerKind::Dropout:
      return in;
    case LayerKind::Reshape:
      if (l.reshape_to.size() != in.size())
        bad_spec("reshape to " + l.reshape_to.str() + " from " + in.str());
      return l.reshape_to;
    case LayerKind::BucketSum:
      if (in.rank != 1 || l.width == 0 || in.size() % l.width != 0)
        bad_spec("bucket_sum needs a vector divisible into buckets");
      return Shape::vec(l.width);
    case LayerKind::MaxReduceGroups:
      if (in.rank != 1 || l.width == 0 || in.size() % l.width != 0)
        bad_spec("max_reduce_groups needs a vector divisible into groups");
      return Shape::vec(l.width);
  }
  bad_spec("unhandled layer kind");
}

}  // namespace

void NetSpec::validate() {
  if (input_width == 0) bad_spec("input width must be positive");
  if (n_labels < 2) bad_spec("need at least two labels");
  Shape s = Shape::vec(input_width);
  for (auto& l : layers) s = step_shape(l, s);
  if (!(s == Shape::vec(n_labels)))
    bad_spec("final shape " + s.str() + " does not match label count " +
             std::to_string(n_labels));
}

Shape NetSpec::output_shape() const {
  NetSpec copy = *this;
  copy.validate();
  Shape s = Shape::vec(copy.input_width);
  for (auto& l : copy.layers) s = step_shape(l, s);
  return s;
}

std::size_t NetSpec::weight_bits() const {
  std::size_t bits = 0;
  for (const auto& l : layers)
    if (is_weighted(l.kind)) bits += std::size_t(l.width) * l.in_width;
  return bits;
}

std::vector<Shape> NetSpec::weight_shapes() const {
  std::vector<Shape> out;
  for (const auto& l : layers)
    if (is_weighted(l.kind)) out.push_back(Shape::mat(l.width, l.in_width));
  return out;
}

NetSpec build_architecture(const std::string& name, const ArchParams& p) {
  NetSpec spec;
  spec.experiment = name;
  if (name == "toy" || name == "toy5") {
    const std::size_t m = name == "toy5" ? 5 : p.toy_features;
    const std::size_t n = name == "toy5" ? 8 : p.toy_width;
    if ((n * m) % 2 != 0) bad_spec("toy width*features must be even");
    spec.input_width = static_cast<uint32_t>(m);
    spec.n_labels = 2;
    if (m == 1)
      spec.feature_names = {"outside"};
    else if (m == 5)
      spec.feature_names = {"very-cold", "cold", "warm", "very-warm", "outside"};
    else
      for (std::size_t i = 0; i < m; ++i)
        spec.feature_names.push_back("f" + std::to_string(i + 1));
    LayerSpec neg;
    neg.kind = LayerKind::NegLayer;
    neg.width = static_cast<uint32_t>(n);
    neg.init = InitScheme::uniform(0.499, 0.501);
    spec.layers.push_back(neg);
    LayerSpec rs;
    rs.kind = LayerKind::Reshape;
    rs.reshape_to = Shape::mat(2, n * m / 2);
    spec.layers.push_back(rs);
    { LayerSpec l_; l_.kind = LayerKind::MajReduce; spec.layers.push_back(l_); }
    { LayerSpec l_; l_.kind = LayerKind::Harden; spec.layers.push_back(l_); }
  } else if (name == "iris") {
    spec.input_width = 16;
    spec.n_labels = 3;
    { LayerSpec l_; l_.kind = LayerKind::ConcatNegation; spec.layers.push_back(l_); }
    LayerSpec l;
    l.kind = LayerKind::AndLayer;
    l.width = 59;
    l.init = InitScheme::constant(0.3);
    spec.layers.push_back(l);
    LayerSpec drop;
    drop.kind = LayerKind::Dropout;
    drop.dropout_p = p.iris_dropout_p;
    spec.layers.push_back(drop);
    { LayerSpec l_; l_.kind = LayerKind::CountHot; spec.layers.push_back(l_); }
    LayerSpec mr;
    mr.kind = LayerKind::MaxReduceGroups;
    mr.width = 3;
    spec.layers.push_back(mr);
    { LayerSpec l_; l_.kind = LayerKind::Harden; spec.layers.push_back(l_); }
  } else if (name == "xor") {
    spec.input_width = 12;
    spec.n_labels = 2;
    for (std::size_t i = 0; i < 12; ++i)
      spec.feature_names.push_back("x" + std::to_string(i + 1));
    { LayerSpec l_; l_.kind = LayerKind::ConcatNegation; spec.layers.push_back(l_); }
    LayerSpec la;
    la.kind = LayerKind::AndLayer;
    la.width = 32;
    la.init = InitScheme::bernoulli_mix(0.501, 0.3, 0.01);
    spec.layers.push_back(la);
    LayerSpec lo;
    lo.kind = LayerKind::OrLayer;
    lo.width = 32;
    lo.init = InitScheme::bernoulli_mix(0.7, 0.499, 0.99);
    spec.layers.push_back(lo);
    LayerSpec ln;
    ln.kind = LayerKind::NegLayer;
    ln.width = 16;
    ln.init = InitScheme::uniform(0.499, 0.501);
    spec.layers.push_back(ln);
    LayerSpec rs;
    rs.kind = LayerKind::Reshape;
    rs.reshape_to = Shape::vec(16 * 32);
    spec.layers.push_back(rs);
    { LayerSpec l_; l_.kind = LayerKind::MajReduce; spec.layers.push_back(l_); }
    LayerSpec head;
    head.kind = LayerKind::ConcatNegation;
    head.negated_first = p.xor_head_negated_first;
    spec.layers.push_back(head);
    // no hardening layer: this net trains against the soft [1-y, y] pair,
    // matching its reference layer chain
  } else if (name == "mnist") {
    spec.input_width = 784;
    spec.n_labels = 10;
    LayerSpec li;
    li.kind = LayerKind::ImpliesLayer;
    li.width = 60;
    li.init = InitScheme::bernoulli_mix(0.501, 0.3, 0.01);
    spec.layers.push_back(li);
    LayerSpec rs;
    rs.kind = LayerKind::Reshape;
    rs.reshape_to = Shape::mat(2940, 16);
    spec.layers.push_back(rs);
    { LayerSpec l_; l_.kind = LayerKind::MajReduce; spec.layers.push_back(l_); }
    LayerSpec ln;
    ln.kind = LayerKind::NegLayer;
    ln.width = 20;
    ln.init = InitScheme::bernoulli_mix(0.501, 0.3, 0.01);
    spec.layers.push_back(ln);
    { LayerSpec l_; l_.kind = LayerKind::Harden; spec.layers.push_back(l_); }
    LayerSpec rs2;
    rs2.kind = LayerKind::Reshape;
    rs2.reshape_to = Shape::vec(20 * 2940);
    spec.layers.push_back(rs2);
    LayerSpec bs;
    bs.kind = LayerKind::BucketSum;
    bs.width = 10;
    spec.layers.push_back(bs);
  } else {
    bad_spec("unknown architecture: " + name);
  }
  spec.validate();
  return spec;
}

double snap_off_half(double w) {
  static const double kJustBelowHalf =
      static_cast<double>(std::nextafter(0.5f, 0.0f));
  return w == 0.5 ? kJustBelowHalf : w;
}

SoftTensor init_weights(const InitScheme& scheme, Shape shape,
                        std::mt19937_64& rng) {
  SoftTensor t = SoftTensor::zeros(shape);
  switch (scheme.kind) {
    case InitScheme::Kind::Constant:
      for (auto& v : t.data) v = scheme.a;
      break;
    case InitScheme::Kind::BernoulliMix: {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (auto& v : t.data) v = u(rng) < scheme.p ? scheme.a : scheme.b;
      break;
    }
    case InitScheme::Kind::Uniform: {
      std::uniform_real_distribution<double> u(scheme.a, scheme.b);
      for (auto& v : t.data) v = u(rng);
      break;
    }
  }
  for (auto& v : t.data) v = snap_off_half(v);
  return t;
}

}  // namespace dbnet
