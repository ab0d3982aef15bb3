#include "dbnet/softbit.hpp"

#include <stdexcept>

namespace dbnet {

double soft_maj_ex(std::span<const double> x, MajAux* aux,
                   std::span<std::pair<double, std::size_t>> scratch) {
  const std::size_t n = x.size();
  assert(n >= 1 && scratch.size() >= n);
  for (std::size_t i = 0; i < n; ++i) scratch[i] = {x[i], i};
  const std::size_t k = majority_index(n);
  std::nth_element(scratch.begin(), scratch.begin() + static_cast<long>(k),
                   scratch.begin() + static_cast<long>(n));
  const double rep = scratch[k].first;
  const double m = mean(x);
  if (aux) {
    aux->rep_index = scratch[k].second;
    aux->rep_value = rep;
    aux->mean = m;
    aux->high = rep > 0.5;
  }
  return augmented_from(rep, m);
}

double soft_maj(std::span<const double> x) {
  std::vector<std::pair<double, std::size_t>> scratch(x.size());
  return soft_maj_ex(x, nullptr, scratch);
}

static double conj2(double a, double b, PairwiseConj conj) {
  return conj == PairwiseConj::Min ? std::min(a, b) : soft_and2(a, b);
}

std::vector<double> low_high(std::span<const double> x, PairwiseConj conj) {
  const std::size_t n = x.size();
  std::vector<double> out(n + 1);
  out[0] = conj2(1.0, x[0], conj);
  for (std::size_t j = 1; j < n; ++j) out[j] = conj2(1.0 - x[j - 1], x[j], conj);
  out[n] = conj2(1.0 - x[n - 1], 1.0, conj);
  return out;
}

std::vector<double> soft_count_hot(std::span<const double> x,
                                   PairwiseConj conj) {
  std::vector<double> sorted(x.begin(), x.end());
  std::stable_sort(sorted.begin(), sorted.end());
  return low_high(sorted, conj);
}

double soft_count(std::span<const double> x, std::size_t k,
                  PairwiseConj conj) {
  if (k > x.size())
    throw std::invalid_argument("soft_count: k out of range 0..n");
  const std::vector<double> hot = soft_count_hot(x, conj);
  return augmented_bit(hot, k);
}

std::vector<uint8_t> harden(std::span<const double> x) {
  std::vector<uint8_t> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.5 ? 1 : 0;
  return out;
}

}  // namespace dbnet
