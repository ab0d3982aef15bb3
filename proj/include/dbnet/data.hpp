#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dbnet {

struct BitDataset {
  std::vector<uint8_t> bits;  // rows * width, row-major, values in {0,1}
  std::size_t width = 0;
  std::vector<int> labels;
  int n_labels = 0;
  std::vector<std::string> feature_names;
  std::string split;

  std::size_t rows() const { return labels.size(); }
  std::span<const uint8_t> row(std::size_t i) const {
    return {bits.data() + i * width, width};
  }
  uint64_t content_hash() const;  // FNV-1a over width, bits and labels
};

// Binary Iris: accepts either a pre-binarized CSV (16 bit columns + label)
// or the raw 4-float CSV, which is thermometer-encoded with 4 quantile
// thresholds per feature (a non-canonical stand-in for the cited artifact).
BitDataset load_binary_iris(const std::string& path);

struct NoisyXorConfig {
  std::size_t n_examples = 10000;
  std::size_t n_features = 12;
  std::size_t informative_a = 1;  // 0-based feature indices
  std::size_t informative_b = 2;
  double train_fraction = 0.5;
  double label_noise = 0.4;  // applied to the training split only
  uint64_t seed = 0;
};

// Clean label = x[a] xor x[b] (0 = odd parity, 1 = even) with exactly
// floor(noise * train rows) training labels flipped at seeded positions.
std::pair<BitDataset, BitDataset> gen_noisy_xor(const NoisyXorConfig& cfg);

// IDX files (plain or gzip) under dir: {train,t10k}-{images,labels}-idx?-ubyte.
// Grey values strictly greater than threshold become 1. train_n/test_n of 0
// keep all examples; otherwise the first n are taken.
std::pair<BitDataset, BitDataset> load_mnist_binarized(
    const std::string& dir, double threshold = 0.3, std::size_t train_n = 0,
    std::size_t test_n = 0);

enum class ToyVariant { SingleFeature, FiveFeature };

// Single feature: the two-row wear-a-coat table. Five feature: all one-hot
// temperature rows x outside, labelled coat iff
// very-cold or cold or (outside and not warm).
BitDataset make_toy(ToyVariant v);

// Random split preserving row order inside each part.
std::pair<BitDataset, BitDataset> split_train_test(const BitDataset& all,
                                                   double train_fraction,
                                                   uint64_t seed);

}  // namespace dbnet
