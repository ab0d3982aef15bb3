#pragma once

// Random small architectures for cross-aspect (soft/hard/symbolic) checks.

#include <random>

#include "dbnet/netspec.hpp"

namespace archgen {

// Template families keep the shape chain valid by construction.
inline dbnet::NetSpec random_arch(std::mt19937_64& rng, std::size_t max_inputs = 6) {
  using namespace dbnet;
  const std::size_t m = 2 + rng() % (max_inputs - 1);
  NetSpec spec;
  spec.input_width = static_cast<uint32_t>(m);
  for (std::size_t i = 0; i < m; ++i)
    spec.feature_names.push_back("x" + std::to_string(i + 1));
  auto push = [&spec](LayerSpec l) { spec.layers.push_back(l); };
  auto weighted = [&rng](LayerKind k, uint32_t width) {
    LayerSpec l;
    l.kind = k;
    l.width = width;
    l.init = InitScheme::uniform(0.05, 0.95);
    return l;
  };
  switch (rng() % 5) {
    case 0: {  // and -> or
      const uint32_t labels = 2 + rng() % 2;
      push(weighted(LayerKind::AndLayer, 2 + rng() % 4));
      push(weighted(LayerKind::OrLayer, labels));
      spec.n_labels = labels;
      break;
    }
    case 1: {  // concat-neg -> and -> group max
      const uint32_t g = 2 + rng() % 2;
      const uint32_t width = g * (1 + rng() % 3);
      LayerSpec cn;
      cn.kind = LayerKind::ConcatNegation;
      push(cn);
      push(weighted(LayerKind::AndLayer, width));
      LayerSpec mr;
      mr.kind = LayerKind::MaxReduceGroups;
      mr.width = g;
      push(mr);
      spec.n_labels = g;
      break;
    }
    case 2: {  // neg -> reshape -> maj -> harden (toy shape)
      uint32_t k = 2 + rng() % 3;
      if ((k * m) % 2) ++k;
      push(weighted(LayerKind::NegLayer, k));
      LayerSpec rs;
      rs.kind = LayerKind::Reshape;
      rs.reshape_to = Shape::mat(2, k * m / 2);
      push(rs);
      LayerSpec mj;
      mj.kind = LayerKind::MajReduce;
      push(mj);
      LayerSpec h;
      h.kind = LayerKind::Harden;
      push(h);
      spec.n_labels = 2;
      break;
    }
    case 3: {  // concat-neg -> and -> count-hot -> group max
      const uint32_t g = 2 + rng() % 2;
      const uint32_t width = g * (1 + rng() % 3) - 1;  // count-hot adds one
      LayerSpec cn;
      cn.kind = LayerKind::ConcatNegation;
      push(cn);
      push(weighted(LayerKind::AndLayer, width));
      LayerSpec ch;
      ch.kind = LayerKind::CountHot;
      push(ch);
      LayerSpec mr;
      mr.kind = LayerKind::MaxReduceGroups;
      mr.width = g;
      push(mr);
      spec.n_labels = g;
      break;
    }
    default: {  // implies -> flatten -> maj -> two-class head
      const uint32_t k = 1 + rng() % 3;
      push(weighted(LayerKind::ImpliesLayer, k));
      LayerSpec rs;
      rs.kind = LayerKind::Reshape;
      rs.reshape_to = Shape::vec(k * m);
      push(rs);
      LayerSpec mj;
      mj.kind = LayerKind::MajReduce;
      push(mj);
      LayerSpec cn;
      cn.kind = LayerKind::ConcatNegation;
      cn.negated_first = rng() & 1;
      push(cn);
      spec.n_labels = 2;
      break;
    }
  }
  spec.validate();
  return spec;
}

}  // namespace archgen
