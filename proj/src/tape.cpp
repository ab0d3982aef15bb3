#include "dbnet/tape.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace dbnet {

std::string Shape::str() const {
  std::ostringstream os;
  if (rank == 1)
    os << "(" << rows << ")";
  else
    os << "(" << rows << "x" << cols << ")";
  return os.str();
}

namespace {

[[noreturn]] void fail_shape(const char* op, const Shape& a, const Shape& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.str() +
                              " vs " + b.str());
}

[[noreturn]] void fail(const char* msg) { throw std::invalid_argument(msg); }

}  // namespace

void Tape::reset() {
  nodes_.clear();
  val_used_ = 0;
  grad_used_ = 0;
  aux_used_ = 0;
  backward_done_ = false;
}

int32_t Tape::push(Node n) {
  n.gval = grad_used_;
  grad_used_ += n.shape.size();
  nodes_.push_back(n);
  return static_cast<int32_t>(nodes_.size()) - 1;
}

std::size_t Tape::alloc_vals(std::size_t n) {
  std::size_t off = val_used_;
  val_used_ += n;
  if (val_buf_.size() < val_used_) val_buf_.resize(val_used_);
  return off;
}

std::size_t Tape::alloc_aux(std::size_t n) {
  std::size_t off = aux_used_;
  aux_used_ += n;
  if (aux_buf_.size() < aux_used_) aux_buf_.resize(aux_used_);
  return off;
}

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || v.id >= static_cast<int32_t>(nodes_.size()))
    fail("invalid Var handle");
  return nodes_[static_cast<std::size_t>(v.id)];
}

const double* Tape::vals_of(const Node& n) const {
  if (n.ext) return n.ext;
  if (n.op == Op::Reshape) return vals_of(nodes_[static_cast<std::size_t>(n.a)]);
  return val_buf_.data() + n.val;
}

double* Tape::mut_vals(const Node& n) { return val_buf_.data() + n.val; }

const Shape& Tape::shape(Var v) const { return node(v).shape; }

std::span<const double> Tape::values(Var v) const {
  const Node& n = node(v);
  return {vals_of(n), n.shape.size()};
}

SoftTensor Tape::value(Var v) const {
  auto s = values(v);
  return SoftTensor(shape(v), std::vector<double>(s.begin(), s.end()));
}

double Tape::scalar(Var v) const {
  if (shape(v).size() != 1) fail("scalar: Var is not size 1");
  return values(v)[0];
}

Var Tape::leaf(std::span<const double> data, Shape shape) {
  if (data.size() != shape.size()) fail("leaf: data length != shape size");
  Node n;
  n.op = Op::Leaf;
  n.shape = shape;
  n.ext = data.data();
  return Var{push(n)};
}

Var Tape::input(std::span<const double> data, Shape shape) {
  if (data.size() != shape.size()) fail("input: data length != shape size");
  Node n;
  n.op = Op::Input;
  n.shape = shape;
  n.ext = data.data();
  return Var{push(n)};
}

Var Tape::constant(std::span<const double> data, Shape shape) {
  if (data.size() != shape.size()) fail("constant: data length != shape size");
  Node n;
  n.op = Op::Input;
  n.shape = shape;
  n.val = alloc_vals(data.size());
  std::copy(data.begin(), data.end(), val_buf_.begin() + static_cast<long>(n.val));
  return Var{push(n)};
}

// ---- elementwise ----

Var Tape::add(Var a, Var b) {
  const Node &na = node(a), &nb = node(b);
  if (!(na.shape == nb.shape)) fail_shape("add", na.shape, nb.shape);
  Node n;
  n.op = Op::Add;
  n.a = a.id;
  n.b = b.id;
  n.shape = na.shape;
  n.val = alloc_vals(n.shape.size());
  const double *pa = vals_of(node(a)), *pb = vals_of(node(b));
  double* o = mut_vals(n);
  for (std::size_t i = 0; i < n.shape.size(); ++i) o[i] = pa[i] + pb[i];
  return Var{push(n)};
}

Var Tape::sub(Var a, Var b) {
  const Node &na = node(a), &nb = node(b);
  if (!(na.shape == nb.shape)) fail_shape("sub", na.shape, nb.shape);
  Node n;
  n.op = Op::Sub;
  n.a = a.id;
  n.b = b.id;
  n.shape = na.shape;
  n.val = alloc_vals(n.shape.size());
  const double *pa = vals_of(node(a)), *pb = vals_of(node(b));
  double* o = mut_vals(n);
  for (std::size_t i = 0; i < n.shape.size(); ++i) o[i] = pa[i] - pb[i];
  return Var{push(n)};
}

Var Tape::mul(Var a, Var b) {
  const Node &na = node(a), &nb = node(b);
  if (!(na.shape == nb.shape)) fail_shape("mul", na.shape, nb.shape);
  Node n;
  n.op = Op::Mul;
  n.a = a.id;
  n.b = b.id;
  n.shape = na.shape;
  n.val = alloc_vals(n.shape.size());
  const double *pa = vals_of(node(a)), *pb = vals_of(node(b));
  double* o = mut_vals(n);
  for (std::size_t i = 0; i < n.shape.size(); ++i) o[i] = pa[i] * pb[i];
  return Var{push(n)};
}

Var Tape::affine(Var a, double k, double c) {
  const Node& na = node(a);
  Node n;
  n.op = Op::Affine;
  n.a = a.id;
  n.shape = na.shape;
  n.c0 = k;
  n.c1 = c;
  n.val = alloc_vals(n.shape.size());
  const double* pa = vals_of(node(a));
  double* o = mut_vals(n);
  for (std::size_t i = 0; i < n.shape.size(); ++i) o[i] = k * pa[i] + c;
  return Var{push(n)};
}

// ---- fused pairwise soft ops ----

namespace {

// Returns 0 for same-shape operands, 1 when b broadcasts across rows of a.
uint8_t broadcast_mode(const char* op, const Shape& a, const Shape& b) {
  if (a == b) return 0;
  if (a.rank == 2 && b.rank == 1 && b.rows == a.cols) return 1;
  fail_shape(op, a, b);
}

}  // namespace

Var Tape::not_xor(Var w, Var x) {
  const Node &nw = node(w), &nx = node(x);
  Node n;
  n.op = Op::NotXor;
  n.flags = broadcast_mode("not_xor", nw.shape, nx.shape);
  n.a = w.id;
  n.b = x.id;
  n.shape = nw.shape;
  n.val = alloc_vals(n.shape.size());
  const double *pw = vals_of(node(w)), *px = vals_of(node(x));
  double* o = mut_vals(n);
  const std::size_t rows = n.shape.rank == 2 ? n.shape.rows : 1;
  const std::size_t cols = n.shape.rank == 2 ? n.shape.cols : n.shape.rows;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t i = r * cols + c;
      o[i] = dbnet::not_xor(pw[i], px[n.flags ? c : i]);
    }
  return Var{push(n)};
}

namespace {

enum class PairKind { And, Or, Implies, Min };

inline double pair_fwd(PairKind k, double a, double b) {
  switch (k) {
    case PairKind::And: return soft_and2(a, b);
    case PairKind::Or: return soft_or2(a, b);
    case PairKind::Implies: return soft_implies(a, b);
    case PairKind::Min: return b < a ? b : a;
  }
  return 0.0;
}

// d out / d (a, b) for the fused pairwise ops, recomputed from the inputs.
inline void pair_bwd(PairKind k, double a, double b, double& da, double& db) {
  if (k == PairKind::Min) {
    da = b < a ? 0.0 : 1.0;
    db = b < a ? 1.0 : 0.0;
    return;
  }
  double u, v;       // the 2-vector actually augmented, in order
  double du, dv;     // gradient w.r.t. u, v
  bool rep_is_u;
  double rep;
  if (k == PairKind::And) {
    u = a; v = b;
    rep_is_u = !(v < u);
    rep = rep_is_u ? u : v;
  } else if (k == PairKind::Or) {
    u = a; v = b;
    rep_is_u = !(v > u);
    rep = rep_is_u ? u : v;
  } else {  // Implies: or2(x, 1-w) with (a=w, b=x)
    u = b; v = 1.0 - a;
    rep_is_u = !(v > u);
    rep = rep_is_u ? u : v;
  }
  const double m = 0.5 * (u + v);
  const bool hi = rep > 0.5;
  const double margin = std::abs(rep - 0.5);
  const double sgn = hi ? 1.0 : -1.0;
  const double drep = m * sgn + (hi ? 0.0 : 1.0);
  du = 0.5 * margin + (rep_is_u ? drep : 0.0);
  dv = 0.5 * margin + (rep_is_u ? 0.0 : drep);
  if (k == PairKind::Implies) {
    da = -dv;  // v = 1 - w
    db = du;
  } else {
    da = du;
    db = dv;
  }
}

}  // namespace

Var Tape::pair_and(Var a, Var b) {
  const Node &na = node(a), &nb = node(b);
  Node n;
  n.op = Op::PairAnd;
  n.flags = broadcast_mode("pair_and", na.shape, nb.shape);
  n.a = a.id;
  n.b = b.id;
  n.shape = na.shape;
  n.val = alloc_vals(n.shape.size());
  const double *pa = vals_of(node(a)), *pb = vals_of(node(b));
  double* o = mut_vals(n);
  const std::size_t rows = n.shape.rank == 2 ? n.shape.rows : 1;
  const std::size_t cols = n.shape.rank == 2 ? n.shape.cols : n.shape.rows;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t i = r * cols + c;
      o[i] = soft_and2(pa[i], pb[n.flags ? c : i]);
    }
  return Var{push(n)};
}

Var Tape::pair_or(Var a, Var b) {
  const Node &na = node(a), &nb = node(b);
  Node n;
  n.op = Op::PairOr;
  n.flags = broadcast_mode("pair_or", na.shape, nb.shape);
  n.a = a.id;
  n.b = b.id;
  n.shape = na.shape;
  n.val = alloc_vals(n.shape.size());
  const double *pa = vals_of(node(a)), *pb = vals_of(node(b));
  double* o = mut_vals(n);
  const std::size_t rows = n.shape.rank == 2 ? n.shape.rows : 1;
  const std::size_t cols = n.shape.rank == 2 ? n.shape.cols : n.shape.rows;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t i = r * cols + c;
      o[i] = soft_or2(pa[i], pb[n.flags ? c : i]);
    }
  return Var{push(n)};
}

Var Tape::pair_implies(Var w, Var x) {
  const Node &nw = node(w), &nx = node(x);
  Node n;
  n.op = Op::PairImplies;
  n.flags = broadcast_mode("pair_implies", nw.shape, nx.shape);
  n.a = w.id;
  n.b = x.id;
  n.shape = nw.shape;
  n.val = alloc_vals(n.shape.size());
  const double *pw = vals_of(node(w)), *px = vals_of(node(x));
  double* o = mut_vals(n);
  const std::size_t rows = n.shape.rank == 2 ? n.shape.rows : 1;
  const std::size_t cols = n.shape.rank == 2 ? n.shape.cols : n.shape.rows;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t i = r * cols + c;
      o[i] = soft_implies(pw[i], px[n.flags ? c : i]);
    }
  return Var{push(n)};
}

Var Tape::pair_min(Var a, Var b) {
  const Node &na = node(a), &nb = node(b);
  if (!(na.shape == nb.shape)) fail_shape("pair_min", na.shape, nb.shape);
  Node n;
  n.op = Op::PairMin;
  n.a = a.id;
  n.b = b.id;
  n.shape = na.shape;
  n.val = alloc_vals(n.shape.size());
  const double *pa = vals_of(node(a)), *pb = vals_of(node(b));
  double* o = mut_vals(n);
  for (std::size_t i = 0; i < n.shape.size(); ++i)
    o[i] = pb[i] < pa[i] ? pb[i] : pa[i];
  return Var{push(n)};
}

// ---- reductions ----

namespace {

inline void row_dims(const Shape& s, std::size_t& rows, std::size_t& cols) {
  rows = s.rank == 2 ? s.rows : 1;
  cols = s.rank == 2 ? s.cols : s.rows;
}

}  // namespace

Var Tape::row_min(Var a) {
  const Node& na = node(a);
  std::size_t rows, cols;
  row_dims(na.shape, rows, cols);
  if (cols == 0) fail("row_min: empty rows");
  Node n;
  n.op = Op::RowMin;
  n.a = a.id;
  n.shape = Shape::vec(rows);
  n.val = alloc_vals(rows);
  n.aux = alloc_aux(rows);
  const double* pa = vals_of(node(a));
  double* o = mut_vals(n);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t best = 0;
    const double* row = pa + r * cols;
    for (std::size_t c = 1; c < cols; ++c)
      if (row[c] < row[best]) best = c;
    o[r] = row[best];
    aux_buf_[n.aux + r] = static_cast<int64_t>(best);
  }
  return Var{push(n)};
}

Var Tape::row_max(Var a) {
  const Node& na = node(a);
  std::size_t rows, cols;
  row_dims(na.shape, rows, cols);
  if (cols == 0) fail("row_max: empty rows");
  Node n;
  n.op = Op::RowMax;
  n.a = a.id;
  n.shape = Shape::vec(rows);
  n.val = alloc_vals(rows);
  n.aux = alloc_aux(rows);
  const double* pa = vals_of(node(a));
  double* o = mut_vals(n);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t best = 0;
    const double* row = pa + r * cols;
    for (std::size_t c = 1; c < cols; ++c)
      if (row[c] > row[best]) best = c;
    o[r] = row[best];
    aux_buf_[n.aux + r] = static_cast<int64_t>(best);
  }
  return Var{push(n)};
}

Var Tape::row_maj(Var a) {
  const Node& na = node(a);
  std::size_t rows, cols;
  row_dims(na.shape, rows, cols);
  if (cols == 0) fail("row_maj: empty rows");
  Node n;
  n.op = Op::RowMaj;
  n.a = a.id;
  n.shape = Shape::vec(rows);
  n.val = alloc_vals(rows);
  n.aux = alloc_aux(rows);
  const double* pa = vals_of(node(a));
  double* o = mut_vals(n);
  std::vector<std::pair<double, std::size_t>> scratch(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    MajAux m;
    o[r] = soft_maj_ex({pa + r * cols, cols}, &m, scratch);
    aux_buf_[n.aux + r] = static_cast<int64_t>(m.rep_index);
  }
  return Var{push(n)};
}

Var Tape::sort_ascending(Var a) {
  const Node& na = node(a);
  if (na.shape.rank != 1) fail("sort_ascending: rank-1 input required");
  const std::size_t len = na.shape.size();
  Node n;
  n.op = Op::SortAsc;
  n.a = a.id;
  n.shape = na.shape;
  n.val = alloc_vals(len);
  n.aux = alloc_aux(len);
  const double* pa = vals_of(node(a));
  std::vector<std::size_t> idx(len);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [pa](std::size_t i, std::size_t j) { return pa[i] < pa[j]; });
  double* o = mut_vals(n);
  for (std::size_t k = 0; k < len; ++k) {
    o[k] = pa[idx[k]];
    aux_buf_[n.aux + k] = static_cast<int64_t>(idx[k]);
  }
  return Var{push(n)};
}

std::span<const int64_t> Tape::sort_perm(Var sorted) const {
  const Node& n = node(sorted);
  if (n.op != Op::SortAsc) fail("sort_perm: Var was not produced by sort");
  return {aux_buf_.data() + n.aux, n.shape.size()};
}

Var Tape::select(Var a, std::size_t i) {
  const Node& na = node(a);
  if (na.shape.rank != 1) fail("select: rank-1 input required");
  if (i >= na.shape.size()) fail("select: index out of range");
  Node n;
  n.op = Op::Select;
  n.a = a.id;
  n.shape = Shape::vec(1);
  n.i0 = static_cast<int32_t>(i);
  n.val = alloc_vals(1);
  mut_vals(n)[0] = vals_of(node(a))[i];
  return Var{push(n)};
}

Var Tape::concat(Var a, Var b) {
  const Node &na = node(a), &nb = node(b);
  if (na.shape.rank != 1 || nb.shape.rank != 1)
    fail("concat: rank-1 inputs required");
  Node n;
  n.op = Op::Concat;
  n.a = a.id;
  n.b = b.id;
  n.shape = Shape::vec(na.shape.size() + nb.shape.size());
  n.val = alloc_vals(n.shape.size());
  const double *pa = vals_of(node(a)), *pb = vals_of(node(b));
  double* o = mut_vals(n);
  std::copy(pa, pa + na.shape.size(), o);
  std::copy(pb, pb + nb.shape.size(), o + na.shape.size());
  return Var{push(n)};
}

Var Tape::reshape(Var a, Shape s) {
  const Node& na = node(a);
  if (na.shape.size() != s.size()) fail_shape("reshape", na.shape, s);
  Node n;
  n.op = Op::Reshape;  // values alias the parent
  n.a = a.id;
  n.shape = s;
  return Var{push(n)};
}

Var Tape::mean_all(Var a) {
  const Node& na = node(a);
  Node n;
  n.op = Op::MeanAll;
  n.a = a.id;
  n.shape = Shape::vec(1);
  n.val = alloc_vals(1);
  mut_vals(n)[0] = mean({vals_of(node(a)), na.shape.size()});
  return Var{push(n)};
}

Var Tape::ste_harden(Var a) {
  const Node& na = node(a);
  Node n;
  n.op = Op::SteHarden;
  n.a = a.id;
  n.shape = na.shape;
  n.val = alloc_vals(n.shape.size());
  const double* pa = vals_of(node(a));
  double* o = mut_vals(n);
  for (std::size_t i = 0; i < n.shape.size(); ++i)
    o[i] = pa[i] > 0.5 ? 1.0 : 0.0;
  return Var{push(n)};
}

Var Tape::gt_half(Var a) {
  const Node& na = node(a);
  Node n;
  n.op = Op::GtHalf;
  n.a = a.id;
  n.shape = na.shape;
  n.val = alloc_vals(n.shape.size());
  const double* pa = vals_of(node(a));
  double* o = mut_vals(n);
  for (std::size_t i = 0; i < n.shape.size(); ++i)
    o[i] = pa[i] > 0.5 ? 1.0 : 0.0;
  return Var{push(n)};
}

Var Tape::flip_where(Var a, std::span<const uint8_t> mask) {
  const Node& na = node(a);
  if (mask.size() != na.shape.size()) fail("flip_where: mask length mismatch");
  Node n;
  n.op = Op::FlipWhere;
  n.a = a.id;
  n.shape = na.shape;
  n.val = alloc_vals(n.shape.size());
  n.aux = alloc_aux(n.shape.size());
  const double* pa = vals_of(node(a));
  double* o = mut_vals(n);
  for (std::size_t i = 0; i < n.shape.size(); ++i) {
    aux_buf_[n.aux + i] = mask[i];
    o[i] = mask[i] ? 1.0 - pa[i] : pa[i];
  }
  return Var{push(n)};
}

Var Tape::bucket_sum(Var a, std::size_t buckets) {
  const Node& na = node(a);
  const std::size_t len = na.shape.size();
  if (buckets == 0 || len % buckets != 0)
    fail("bucket_sum: size must divide evenly into buckets");
  Node n;
  n.op = Op::BucketSum;
  n.a = a.id;
  n.shape = Shape::vec(buckets);
  n.i0 = static_cast<int32_t>(buckets);
  n.val = alloc_vals(buckets);
  const double* pa = vals_of(node(a));
  double* o = mut_vals(n);
  const std::size_t w = len / buckets;
  for (std::size_t b = 0; b < buckets; ++b) {
    double s = 0.0;
    for (std::size_t i = 0; i < w; ++i) s += pa[b * w + i];
    o[b] = s;
  }
  return Var{push(n)};
}

Var Tape::softmax_ce(Var logits, int label) {
  const Node& na = node(logits);
  const std::size_t k = na.shape.size();
  if (na.shape.rank != 1 || k < 2) fail("softmax_ce: need a logit vector, k >= 2");
  if (label < 0 || static_cast<std::size_t>(label) >= k)
    fail("softmax_ce: label out of range");
  Node n;
  n.op = Op::SoftmaxCe;
  n.a = logits.id;
  n.shape = Shape::vec(1);
  n.i0 = label;
  n.val = alloc_vals(1);
  const double* p = vals_of(node(logits));
  double mx = p[0];
  for (std::size_t i = 1; i < k; ++i) mx = std::max(mx, p[i]);
  double se = 0.0;
  for (std::size_t i = 0; i < k; ++i) se += std::exp(p[i] - mx);
  mut_vals(n)[0] = mx + std::log(se) - p[label];
  return Var{push(n)};
}

// ---- backward ----

void Tape::run_backward(Var output) {
  const Node& out = node(output);
  if (out.shape.size() != 1) fail("backward: output must be scalar");
  if (backward_done_)
    throw std::logic_error("backward: tape already swept; reset() first");
  backward_done_ = true;

  grad_buf_.assign(grad_used_, 0.0);
  grad_buf_[out.gval] = 1.0;

  for (std::size_t ni = nodes_.size(); ni-- > 0;) {
    const Node& n = nodes_[ni];
    const double* g = grad_buf_.data() + n.gval;
    switch (n.op) {
      case Op::Leaf:
      case Op::Input:
      case Op::GtHalf:
        break;
      case Op::Add: {
        const Node &a = nodes_[n.a], &b = nodes_[n.b];
        double *ga = grad_buf_.data() + a.gval, *gb = grad_buf_.data() + b.gval;
        for (std::size_t i = 0; i < n.shape.size(); ++i) {
          ga[i] += g[i];
          gb[i] += g[i];
        }
        break;
      }
      case Op::Sub: {
        const Node &a = nodes_[n.a], &b = nodes_[n.b];
        double *ga = grad_buf_.data() + a.gval, *gb = grad_buf_.data() + b.gval;
        for (std::size_t i = 0; i < n.shape.size(); ++i) {
          ga[i] += g[i];
          gb[i] -= g[i];
        }
        break;
      }
      case Op::Mul: {
        const Node &a = nodes_[n.a], &b = nodes_[n.b];
        const double *pa = vals_of(a), *pb = vals_of(b);
        double *ga = grad_buf_.data() + a.gval, *gb = grad_buf_.data() + b.gval;
        for (std::size_t i = 0; i < n.shape.size(); ++i) {
          ga[i] += g[i] * pb[i];
          gb[i] += g[i] * pa[i];
        }
        break;
      }
      case Op::Affine: {
        const Node& a = nodes_[n.a];
        double* ga = grad_buf_.data() + a.gval;
        for (std::size_t i = 0; i < n.shape.size(); ++i) ga[i] += n.c0 * g[i];
        break;
      }
      case Op::NotXor: {
        const Node &a = nodes_[n.a], &b = nodes_[n.b];
        const double *pw = vals_of(a), *px = vals_of(b);
        double *gw = grad_buf_.data() + a.gval, *gx = grad_buf_.data() + b.gval;
        std::size_t rows, cols;
        row_dims(n.shape, rows, cols);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) {
            const std::size_t i = r * cols + c;
            const std::size_t xi = n.flags ? c : i;
            gw[i] += g[i] * (2.0 * px[xi] - 1.0);
            gx[xi] += g[i] * (2.0 * pw[i] - 1.0);
          }
        break;
      }
      case Op::PairAnd:
      case Op::PairOr:
      case Op::PairImplies: {
        const PairKind k = n.op == Op::PairAnd   ? PairKind::And
                           : n.op == Op::PairOr ? PairKind::Or
                                                : PairKind::Implies;
        const Node &a = nodes_[n.a], &b = nodes_[n.b];
        const double *pa = vals_of(a), *pb = vals_of(b);
        double *ga = grad_buf_.data() + a.gval, *gb = grad_buf_.data() + b.gval;
        std::size_t rows, cols;
        row_dims(n.shape, rows, cols);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) {
            const std::size_t i = r * cols + c;
            const std::size_t bi = n.flags ? c : i;
            double da, db;
            pair_bwd(k, pa[i], pb[bi], da, db);
            ga[i] += g[i] * da;
            gb[bi] += g[i] * db;
          }
        break;
      }
      case Op::PairMin: {
        const Node &a = nodes_[n.a], &b = nodes_[n.b];
        const double *pa = vals_of(a), *pb = vals_of(b);
        double *ga = grad_buf_.data() + a.gval, *gb = grad_buf_.data() + b.gval;
        for (std::size_t i = 0; i < n.shape.size(); ++i) {
          if (pb[i] < pa[i])
            gb[i] += g[i];
          else
            ga[i] += g[i];
        }
        break;
      }
      case Op::RowMin:
      case Op::RowMax: {
        const Node& a = nodes_[n.a];
        double* ga = grad_buf_.data() + a.gval;
        std::size_t rows, cols;
        row_dims(a.shape, rows, cols);
        for (std::size_t r = 0; r < rows; ++r)
          ga[r * cols + static_cast<std::size_t>(aux_buf_[n.aux + r])] += g[r];
        break;
      }
      case Op::RowMaj: {
        const Node& a = nodes_[n.a];
        const double* pa = vals_of(a);
        double* ga = grad_buf_.data() + a.gval;
        std::size_t rows, cols;
        row_dims(a.shape, rows, cols);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* row = pa + r * cols;
          const std::size_t rep = static_cast<std::size_t>(aux_buf_[n.aux + r]);
          const double v = row[rep];
          const double m = mean({row, cols});
          const double margin = std::abs(v - 0.5);
          const bool hi = v > 0.5;
          const double gr = g[r];
          const double dmean = gr * margin / static_cast<double>(cols);
          double* grow = ga + r * cols;
          for (std::size_t c = 0; c < cols; ++c) grow[c] += dmean;
          grow[rep] += gr * (m * (hi ? 1.0 : -1.0) + (hi ? 0.0 : 1.0));
        }
        break;
      }
      case Op::SortAsc: {
        const Node& a = nodes_[n.a];
        double* ga = grad_buf_.data() + a.gval;
        for (std::size_t k = 0; k < n.shape.size(); ++k)
          ga[static_cast<std::size_t>(aux_buf_[n.aux + k])] += g[k];
        break;
      }
      case Op::Select: {
        const Node& a = nodes_[n.a];
        grad_buf_[a.gval + static_cast<std::size_t>(n.i0)] += g[0];
        break;
      }
      case Op::Concat: {
        const Node &a = nodes_[n.a], &b = nodes_[n.b];
        double *ga = grad_buf_.data() + a.gval, *gb = grad_buf_.data() + b.gval;
        const std::size_t la = a.shape.size();
        for (std::size_t i = 0; i < la; ++i) ga[i] += g[i];
        for (std::size_t i = 0; i < b.shape.size(); ++i) gb[i] += g[la + i];
        break;
      }
      case Op::Reshape: {
        const Node& a = nodes_[n.a];
        double* ga = grad_buf_.data() + a.gval;
        for (std::size_t i = 0; i < n.shape.size(); ++i) ga[i] += g[i];
        break;
      }
      case Op::MeanAll: {
        const Node& a = nodes_[n.a];
        double* ga = grad_buf_.data() + a.gval;
        const double gi = g[0] / static_cast<double>(a.shape.size());
        for (std::size_t i = 0; i < a.shape.size(); ++i) ga[i] += gi;
        break;
      }
      case Op::SteHarden: {
        const Node& a = nodes_[n.a];
        double* ga = grad_buf_.data() + a.gval;
        for (std::size_t i = 0; i < n.shape.size(); ++i) ga[i] += g[i];
        break;
      }
      case Op::FlipWhere: {
        const Node& a = nodes_[n.a];
        double* ga = grad_buf_.data() + a.gval;
        for (std::size_t i = 0; i < n.shape.size(); ++i)
          ga[i] += aux_buf_[n.aux + i] ? -g[i] : g[i];
        break;
      }
      case Op::BucketSum: {
        const Node& a = nodes_[n.a];
        double* ga = grad_buf_.data() + a.gval;
        const std::size_t w = a.shape.size() / static_cast<std::size_t>(n.i0);
        for (std::size_t i = 0; i < a.shape.size(); ++i) ga[i] += g[i / w];
        break;
      }
      case Op::SoftmaxCe: {
        const Node& a = nodes_[n.a];
        const double* p = vals_of(a);
        double* ga = grad_buf_.data() + a.gval;
        const std::size_t k = a.shape.size();
        double mx = p[0];
        for (std::size_t i = 1; i < k; ++i) mx = std::max(mx, p[i]);
        double se = 0.0;
        for (std::size_t i = 0; i < k; ++i) se += std::exp(p[i] - mx);
        for (std::size_t i = 0; i < k; ++i) {
          const double soft = std::exp(p[i] - mx) / se;
          ga[i] += g[0] * (soft - (static_cast<int32_t>(i) == n.i0 ? 1.0 : 0.0));
        }
        break;
      }
    }
  }
}

Gradients Tape::backward(Var output) {
  run_backward(output);
  Gradients out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (n.op != Op::Leaf) continue;
    const double* g = grad_buf_.data() + n.gval;
    out.by_leaf.emplace(
        static_cast<int32_t>(i),
        SoftTensor(n.shape, std::vector<double>(g, g + n.shape.size())));
  }
  return out;
}

void Tape::backward_accumulate(Var output, std::span<const Var> leaves,
                               std::span<std::vector<double>> accums,
                               double scale) {
  if (leaves.size() != accums.size())
    fail("backward_accumulate: leaves/accums length mismatch");
  run_backward(output);
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    const Node& n = node(leaves[li]);
    if (n.op != Op::Leaf) fail("backward_accumulate: Var is not a leaf");
    if (accums[li].size() != n.shape.size())
      fail("backward_accumulate: accumulator size mismatch");
    const double* g = grad_buf_.data() + n.gval;
    double* acc = accums[li].data();
    for (std::size_t i = 0; i < n.shape.size(); ++i) acc[i] += scale * g[i];
  }
}

// ---- composed soft-op graph builders ----

Var ad_augmented_bit(Tape& t, Var x, std::size_t i) {
  const double xi_val = t.values(x)[i];
  Var xi = t.select(x, i);
  Var m = t.mean_all(x);
  const double sgn = xi_val > 0.5 ? 1.0 : -1.0;
  Var margin = t.affine(xi, sgn, -0.5 * sgn);  // |x_i - 1/2| for this branch
  Var packed = t.mul(m, margin);
  if (xi_val > 0.5) return t.affine(packed, 1.0, 0.5);
  return t.add(xi, packed);
}

Var ad_soft_and(Tape& t, Var x) {
  return ad_augmented_bit(t, x, argmin(t.values(x)));
}

Var ad_soft_or(Tape& t, Var x) {
  return ad_augmented_bit(t, x, argmax(t.values(x)));
}

Var ad_soft_implies(Tape& t, Var w, Var x) {
  Var not_w = t.affine(w, -1.0, 1.0);
  return ad_soft_or(t, t.concat(x, not_w));
}

Var ad_soft_maj(Tape& t, Var x) {
  const std::size_t n = t.shape(x).size();
  Var s = t.sort_ascending(x);
  return ad_augmented_bit(t, s, majority_index(n));
}

Var ad_count_hot(Tape& t, Var x, PairwiseConj conj) {
  Var s = t.sort_ascending(x);
  const double one = 1.0;
  Var ones = t.constant(std::span<const double>(&one, 1), Shape::vec(1));
  Var lhs = t.concat(ones, t.affine(s, -1.0, 1.0));
  Var rhs = t.concat(s, ones);
  return conj == PairwiseConj::Min ? t.pair_min(lhs, rhs)
                                   : t.pair_and(lhs, rhs);
}

Var ad_soft_count(Tape& t, Var x, std::size_t k, PairwiseConj conj) {
  Var hot = ad_count_hot(t, x, conj);
  if (k >= t.shape(hot).size()) fail("ad_soft_count: k out of range");
  return ad_augmented_bit(t, hot, k);
}

}  // namespace dbnet
