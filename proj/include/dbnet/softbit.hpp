#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

// Scalar/vector soft-bit operators and their boolean counterparts.
// A soft-bit is a real in [0,1]; it is "high" iff strictly greater than 1/2.
// Hardening maps high -> 1 and everything else (including exactly 1/2) -> 0.

namespace dbnet {

// Pairwise conjunction used inside low_high. Min reproduces the reference
// worked examples bit-for-bit; MarginPacked substitutes the packed 2-ary AND.
enum class PairwiseConj { Min, MarginPacked };

inline bool is_high(double x) { return x > 0.5; }
inline bool harden_bit(double x) { return x > 0.5; }

inline double not_xor(double w, double x) {
  return 1.0 - w + x * (2.0 * w - 1.0);
}

inline double mean(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

// Ties resolve to the lowest index so results are deterministic.
inline std::size_t argmin(std::span<const double> x) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < x.size(); ++i)
    if (x[i] < x[best]) best = i;
  return best;
}

inline std::size_t argmax(std::span<const double> x) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < x.size(); ++i)
    if (x[i] > x[best]) best = i;
  return best;
}

inline double margin_fraction(std::span<const double> x, std::size_t i) {
  assert(i < x.size());
  return mean(x) * std::abs(x[i] - 0.5);
}

// Packs a fraction (the mean soft-bit) of the margin between the
// representative bit x[i] and the 1/2 threshold. Never crosses the threshold,
// so harden(augmented_bit(x, i)) == harden(x[i]).
inline double augmented_bit(std::span<const double> x, std::size_t i) {
  const double mf = margin_fraction(x, i);
  if (x[i] > 0.5) {
    // A high bit forces a positive mean, so the result stays strictly high.
    assert(mf > 0.0);
    return 0.5 + mf;
  }
  return x[i] + mf;
}

inline double augmented_from(double rep, double mean_val) {
  const double mf = mean_val * std::abs(rep - 0.5);
  return rep > 0.5 ? 0.5 + mf : rep + mf;
}

inline double soft_and(std::span<const double> x) {
  return augmented_bit(x, argmin(x));
}

inline double soft_or(std::span<const double> x) {
  return augmented_bit(x, argmax(x));
}

// Fused 2-ary forms used in inner loops; identical to the span versions.
inline double soft_and2(double a, double b) {
  const double mn = b < a ? b : a;
  return augmented_from(mn, 0.5 * (a + b));
}

inline double soft_or2(double a, double b) {
  const double mx = b > a ? b : a;
  return augmented_from(mx, 0.5 * (a + b));
}

inline double soft_implies(double w, double x) {
  // antecedent w, consequent x
  return soft_or2(x, 1.0 - w);
}

// 0-based position of the median bit of an ascending-sorted length-n vector
// (the 1-based ceil(n/2) of the reference definition).
inline std::size_t majority_index(std::size_t n) {
  assert(n >= 1);
  return (n - 1) / 2;
}

struct MajAux {
  std::size_t rep_index = 0;  // index into the ORIGINAL (unsorted) vector
  double rep_value = 0.0;
  double mean = 0.0;
  bool high = false;
};

// Differentiable majority: augment the median bit of the sorted vector.
// Selection uses (value, index) ordering, which equals a stable ascending
// sort; the mean of the sorted vector equals the mean of x, computed here in
// original order. scratch must have size >= n.
double soft_maj_ex(std::span<const double> x, MajAux* aux,
                   std::span<std::pair<double, std::size_t>> scratch);

double soft_maj(std::span<const double> x);

// Boolean majority: 1 iff strictly more than half the bits are high.
inline bool hard_maj(std::span<const uint8_t> bits) {
  std::size_t c = 0;
  for (uint8_t b : bits) c += b != 0;
  return c >= bits.size() / 2 + 1;
}

// low_high of an ascending-sorted vector marks the low->high transition:
// out[0] = conj(1, x0), out[j] = conj(1 - x[j-1], x[j]), out[n] = conj(1 - x[n-1], 1).
std::vector<double> low_high(std::span<const double> x,
                             PairwiseConj conj = PairwiseConj::Min);

// One-hot (after hardening) vector whose high position is the number of low
// bits in x.
std::vector<double> soft_count_hot(std::span<const double> x,
                                   PairwiseConj conj = PairwiseConj::Min);

// "Exactly k low bits" as a single gradient-rich soft-bit: the count-hot
// element at k margin-packed against the full count-hot vector.
double soft_count(std::span<const double> x, std::size_t k,
                  PairwiseConj conj = PairwiseConj::Min);

std::vector<uint8_t> harden(std::span<const double> x);

}  // namespace dbnet
