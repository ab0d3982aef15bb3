#include "dbnet/hardnet.hpp"

#include <bit>
#include <stdexcept>

namespace dbnet {

HardVec HardVec::from_bits(std::span<const uint8_t> bits) {
  HardVec v(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (bits[i]) v.w_[i >> 6] |= uint64_t{1} << (i & 63);
  return v;
}

HardVec HardVec::from_bytes(std::span<const uint8_t> bytes, std::size_t n) {
  if (bytes.size() != (n + 7) / 8)
    throw std::invalid_argument("HardVec::from_bytes: byte count mismatch");
  HardVec v(n);
  for (std::size_t i = 0; i < n; ++i)
    if ((bytes[i >> 3] >> (i & 7)) & 1) v.w_[i >> 6] |= uint64_t{1} << (i & 63);
  return v;
}

std::size_t HardVec::popcount() const {
  std::size_t c = 0;
  for (uint64_t w : w_) c += static_cast<std::size_t>(std::popcount(w));
  return c;
}

std::size_t HardVec::popcount_range(std::size_t begin, std::size_t end) const {
  std::size_t c = 0;
  for (std::size_t i = begin; i < end; ++i) c += get(i);
  return c;
}

std::vector<uint8_t> HardVec::to_bits() const {
  std::vector<uint8_t> out(n_);
  for (std::size_t i = 0; i < n_; ++i) out[i] = get(i) ? 1 : 0;
  return out;
}

std::vector<uint8_t> HardVec::to_bytes() const {
  std::vector<uint8_t> out((n_ + 7) / 8, 0);
  for (std::size_t i = 0; i < n_; ++i)
    if (get(i)) out[i >> 3] |= uint8_t(1u << (i & 7));
  return out;
}

HardVec hard_xnor(const HardVec& w, const HardVec& x) {
  if (w.size() != x.size())
    throw std::invalid_argument("hard_xnor: width mismatch");
  HardVec out(w.size());
  auto ww = w.words(), xw = x.words();
  for (std::size_t i = 0; i < ww.size(); ++i) out.set_word(i, ~(ww[i] ^ xw[i]));
  return out;
}

HardVec hard_implies(const HardVec& w, const HardVec& x) {
  if (w.size() != x.size())
    throw std::invalid_argument("hard_implies: width mismatch");
  HardVec out(w.size());
  auto ww = w.words(), xw = x.words();
  for (std::size_t i = 0; i < ww.size(); ++i) out.set_word(i, ~ww[i] | xw[i]);
  return out;
}

bool hard_and_selected(const HardVec& w, const HardVec& x) {
  if (w.size() != x.size())
    throw std::invalid_argument("hard_and_selected: width mismatch");
  auto ww = w.words(), xw = x.words();
  for (std::size_t i = 0; i < ww.size(); ++i)
    if (ww[i] & ~xw[i]) return false;  // some selected input is low
  return true;                         // empty selection included
}

bool hard_or_selected(const HardVec& w, const HardVec& x) {
  if (w.size() != x.size())
    throw std::invalid_argument("hard_or_selected: width mismatch");
  auto ww = w.words(), xw = x.words();
  for (std::size_t i = 0; i < ww.size(); ++i)
    if (ww[i] & xw[i]) return true;
  return false;
}

const char* hard_op_name(HardOpKind k) {
  switch (k) {
    case HardOpKind::ConcatNegate: return "concat_negate";
    case HardOpKind::Xnor: return "xnor";
    case HardOpKind::ImpliesMask: return "implies_mask";
    case HardOpKind::AndSelected: return "and_selected";
    case HardOpKind::OrSelected: return "or_selected";
    case HardOpKind::MajThreshold: return "maj_threshold";
    case HardOpKind::CountLowOneHot: return "count_low_one_hot";
    case HardOpKind::GroupAny: return "group_any";
    case HardOpKind::BucketPopcount: return "bucket_popcount";
    case HardOpKind::ReshapeRows: return "reshape_rows";
    case HardOpKind::Nop: return "nop";
  }
  return "?";
}

std::size_t HardNet::weight_bits() const {
  std::size_t bits = 0;
  for (const auto& b : weight_blocks) bits += b.size();
  return bits;
}

namespace {

std::vector<HardVec> split_rows(const HardVec& block, std::size_t rows,
                                std::size_t cols) {
  std::vector<HardVec> out;
  out.reserve(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    HardVec v(cols);
    for (std::size_t c = 0; c < cols; ++c) v.set(c, block.get(r * cols + c));
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace

HardNet assemble_hard_net(NetSpec spec, std::vector<HardVec> blocks) {
  spec.validate();
  HardNet net;
  net.spec = std::move(spec);
  net.weight_blocks = std::move(blocks);
  const auto shapes = net.spec.weight_shapes();
  if (shapes.size() != net.weight_blocks.size())
    throw std::invalid_argument("assemble_hard_net: weight block count mismatch");
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (net.weight_blocks[i].size() != shapes[i].size())
      throw std::invalid_argument("assemble_hard_net: weight block size mismatch");
    net.weight_rows.push_back(
        split_rows(net.weight_blocks[i], shapes[i].rows, shapes[i].cols));
  }
  int32_t wi = 0;
  for (const auto& l : net.spec.layers) {
    HardPlanOp op;
    switch (l.kind) {
      case LayerKind::ConcatNegation:
        op.kind = HardOpKind::ConcatNegate;
        op.negated_first = l.negated_first;
        break;
      case LayerKind::NegLayer:
        op.kind = HardOpKind::Xnor;
        op.weight_block = wi++;
        break;
      case LayerKind::ImpliesLayer:
        op.kind = HardOpKind::ImpliesMask;
        op.weight_block = wi++;
        break;
      case LayerKind::AndLayer:
        op.kind = HardOpKind::AndSelected;
        op.weight_block = wi++;
        break;
      case LayerKind::OrLayer:
        op.kind = HardOpKind::OrSelected;
        op.weight_block = wi++;
        break;
      case LayerKind::MajReduce:
        op.kind = HardOpKind::MajThreshold;
        break;
      case LayerKind::CountHot:
        op.kind = HardOpKind::CountLowOneHot;
        break;
      case LayerKind::Harden:
      case LayerKind::Dropout:
        op.kind = HardOpKind::Nop;
        break;
      case LayerKind::Reshape:
        op.kind = HardOpKind::ReshapeRows;
        op.rows = l.reshape_to.rank == 2 ? l.reshape_to.rows : 1;
        op.cols = l.reshape_to.rank == 2 ? l.reshape_to.cols
                                         : l.reshape_to.rows;
        break;
      case LayerKind::BucketSum:
        op.kind = HardOpKind::BucketPopcount;
        op.width = l.width;
        break;
      case LayerKind::MaxReduceGroups:
        op.kind = HardOpKind::GroupAny;
        op.width = l.width;
        break;
    }
    net.plan.push_back(op);
  }
  return net;
}

HardNet harden_net(const SoftNet& soft) {
  std::vector<HardVec> blocks;
  for (const auto& w : soft.weights) {
    HardVec block(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) block.set(i, w.data[i] > 0.5);
    blocks.push_back(std::move(block));
  }
  return assemble_hard_net(soft.spec, std::move(blocks));
}

HardVec embed_hard(std::span<const uint8_t> bits) {
  return HardVec::from_bits(bits);
}

namespace {

// Intermediate activation: one HardVec per logical row.
struct HardState {
  std::vector<HardVec> rows;
  std::size_t total_bits() const {
    std::size_t n = 0;
    for (const auto& r : rows) n += r.size();
    return n;
  }
  HardVec flatten() const {
    if (rows.size() == 1) return rows[0];
    HardVec out(total_bits());
    std::size_t at = 0;
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) out.set(at + i, r.get(i));
      at += r.size();
    }
    return out;
  }
};

}  // namespace

std::vector<int64_t> hard_logits(const HardNet& net, const HardVec& input) {
  if (input.size() != net.spec.input_width)
    throw std::invalid_argument("hard_logits: input width mismatch");
  HardState st;
  st.rows = {input};
  for (const auto& op : net.plan) {
    switch (op.kind) {
      case HardOpKind::ConcatNegate: {
        const HardVec& x = st.rows[0];
        HardVec out(2 * x.size());
        const std::size_t off_x = op.negated_first ? x.size() : 0;
        const std::size_t off_n = op.negated_first ? 0 : x.size();
        for (std::size_t i = 0; i < x.size(); ++i) {
          out.set(off_x + i, x.get(i));
          out.set(off_n + i, !x.get(i));
        }
        st.rows = {std::move(out)};
        break;
      }
      case HardOpKind::Xnor: {
        const auto& wrows = net.weight_rows[op.weight_block];
        const HardVec& x = st.rows[0];
        std::vector<HardVec> out;
        out.reserve(wrows.size());
        for (const auto& w : wrows) out.push_back(hard_xnor(w, x));
        st.rows = std::move(out);
        break;
      }
      case HardOpKind::ImpliesMask: {
        const auto& wrows = net.weight_rows[op.weight_block];
        const HardVec& x = st.rows[0];
        std::vector<HardVec> out;
        out.reserve(wrows.size());
        for (const auto& w : wrows) out.push_back(hard_implies(w, x));
        st.rows = std::move(out);
        break;
      }
      case HardOpKind::AndSelected: {
        const auto& wrows = net.weight_rows[op.weight_block];
        const HardVec& x = st.rows[0];
        HardVec out(wrows.size());
        for (std::size_t r = 0; r < wrows.size(); ++r)
          out.set(r, hard_and_selected(wrows[r], x));
        st.rows = {std::move(out)};
        break;
      }
      case HardOpKind::OrSelected: {
        const auto& wrows = net.weight_rows[op.weight_block];
        const HardVec& x = st.rows[0];
        HardVec out(wrows.size());
        for (std::size_t r = 0; r < wrows.size(); ++r)
          out.set(r, hard_or_selected(wrows[r], x));
        st.rows = {std::move(out)};
        break;
      }
      case HardOpKind::MajThreshold: {
        HardVec out(st.rows.size());
        for (std::size_t r = 0; r < st.rows.size(); ++r) {
          const std::size_t n = st.rows[r].size();
          out.set(r, st.rows[r].popcount() >= n / 2 + 1);
        }
        st.rows = {std::move(out)};
        break;
      }
      case HardOpKind::CountLowOneHot: {
        const HardVec& x = st.rows[0];
        HardVec out(x.size() + 1);
        out.set(x.size() - x.popcount(), true);
        st.rows = {std::move(out)};
        break;
      }
      case HardOpKind::GroupAny: {
        const HardVec x = st.flatten();
        const std::size_t g = op.width, s = x.size() / op.width;
        HardVec out(g);
        for (std::size_t j = 0; j < g; ++j)
          out.set(j, x.popcount_range(j * s, (j + 1) * s) > 0);
        st.rows = {std::move(out)};
        break;
      }
      case HardOpKind::BucketPopcount: {
        const HardVec x = st.flatten();
        const std::size_t b = op.width, s = x.size() / op.width;
        std::vector<int64_t> logits(b);
        for (std::size_t j = 0; j < b; ++j)
          logits[j] = static_cast<int64_t>(x.popcount_range(j * s, (j + 1) * s));
        return logits;  // bucket heads terminate the plan
      }
      case HardOpKind::ReshapeRows: {
        const HardVec flat = st.flatten();
        std::vector<HardVec> out;
        out.reserve(op.rows);
        for (std::size_t r = 0; r < op.rows; ++r) {
          HardVec row(op.cols);
          for (std::size_t c = 0; c < op.cols; ++c)
            row.set(c, flat.get(r * op.cols + c));
          out.push_back(std::move(row));
        }
        st.rows = std::move(out);
        break;
      }
      case HardOpKind::Nop:
        break;
    }
  }
  const HardVec out = st.flatten();
  std::vector<int64_t> logits(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) logits[i] = out.get(i) ? 1 : 0;
  return logits;
}

int hard_predict(const HardNet& net, const HardVec& input) {
  const auto logits = hard_logits(net, input);
  return argmax_label(logits);
}

}  // namespace dbnet
