#include "dbnet/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace dbnet {

uint64_t BitDataset::content_hash() const {
  uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](uint64_t byte) {
    h ^= byte;
    h *= 0x100000001b3ull;
  };
  mix(width);
  for (uint8_t b : bits) mix(b);
  for (int l : labels) mix(static_cast<uint64_t>(l));
  return h;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

bool is_number(const std::string& s) {
  if (s.empty()) return false;
  char* end = nullptr;
  std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

BitDataset thermometer_encode(const std::vector<std::vector<double>>& feats,
                              const std::vector<int>& labels,
                              const std::vector<std::string>& names) {
  const std::size_t n = feats.size();
  const std::size_t d = feats[0].size();
  constexpr double kQuantiles[4] = {0.2, 0.4, 0.6, 0.8};
  BitDataset ds;
  ds.width = d * 4;
  ds.labels = labels;
  ds.bits.assign(n * ds.width, 0);
  for (std::size_t f = 0; f < d; ++f) {
    std::vector<double> sorted;
    sorted.reserve(n);
    for (const auto& row : feats) sorted.push_back(row[f]);
    std::sort(sorted.begin(), sorted.end());
    double thr[4];
    for (int q = 0; q < 4; ++q) {
      const auto idx = static_cast<std::size_t>(
          std::llround(kQuantiles[q] * static_cast<double>(n - 1)));
      thr[q] = sorted[idx];
    }
    for (std::size_t r = 0; r < n; ++r)
      for (int q = 0; q < 4; ++q)
        ds.bits[r * ds.width + f * 4 + q] = feats[r][f] > thr[q] ? 1 : 0;
  }
  ds.feature_names.resize(ds.width);
  for (std::size_t f = 0; f < d; ++f)
    for (int q = 0; q < 4; ++q)
      ds.feature_names[f * 4 + q] = names[f] + "_q" + std::to_string(q + 1);
  return ds;
}

}  // namespace

BitDataset load_binary_iris(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open iris file: " + path);
  std::string line;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (first && !fields.empty() && !is_number(fields[0])) {
      header = fields;
      first = false;
      continue;
    }
    first = false;
    rows.push_back(std::move(fields));
  }
  if (rows.empty()) throw std::runtime_error("iris file has no data rows: " + path);
  const std::size_t cols = rows[0].size();
  for (const auto& r : rows)
    if (r.size() != cols)
      throw std::runtime_error("iris file has ragged rows: " + path);

  if (cols == 17) {  // pre-binarized: 16 bits + label
    BitDataset ds;
    ds.width = 16;
    ds.n_labels = 3;
    ds.split = "all";
    for (std::size_t i = 0; i < 16; ++i)
      ds.feature_names.push_back(header.size() == 17 ? header[i]
                                                     : "b" + std::to_string(i + 1));
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < 16; ++i) {
        if (r[i] != "0" && r[i] != "1")
          throw std::runtime_error("iris bit column not 0/1: " + r[i]);
        ds.bits.push_back(r[i] == "1" ? 1 : 0);
      }
      ds.labels.push_back(std::stoi(r[16]));
    }
    for (int l : ds.labels)
      if (l < 0 || l >= 3) throw std::runtime_error("iris label out of range");
    return ds;
  }
  if (cols == 5) {  // raw floats + label -> thermometer fallback
    std::vector<std::vector<double>> feats;
    std::vector<int> labels;
    for (const auto& r : rows) {
      std::vector<double> f;
      for (std::size_t i = 0; i < 4; ++i) f.push_back(std::stod(r[i]));
      feats.push_back(std::move(f));
      labels.push_back(std::stoi(r[4]));
    }
    std::vector<std::string> names =
        header.size() == 5
            ? std::vector<std::string>(header.begin(), header.begin() + 4)
            : std::vector<std::string>{"f1", "f2", "f3", "f4"};
    BitDataset ds = thermometer_encode(feats, labels, names);
    ds.n_labels = 3;
    ds.split = "all";
    return ds;
  }
  throw std::runtime_error("iris file must have 5 or 17 columns, got " +
                           std::to_string(cols));
}

std::pair<BitDataset, BitDataset> gen_noisy_xor(const NoisyXorConfig& cfg) {
  if (cfg.informative_a == cfg.informative_b ||
      cfg.informative_a >= cfg.n_features || cfg.informative_b >= cfg.n_features)
    throw std::invalid_argument("gen_noisy_xor: bad informative indices");
  if (cfg.label_noise < 0 || cfg.label_noise > 1)
    throw std::invalid_argument("gen_noisy_xor: noise must be in [0,1]");
  std::mt19937_64 rng(cfg.seed);
  const std::size_t n_train =
      static_cast<std::size_t>(cfg.train_fraction * cfg.n_examples);
  auto make = [&](std::size_t n, const char* split) {
    BitDataset ds;
    ds.width = cfg.n_features;
    ds.n_labels = 2;
    ds.split = split;
    for (std::size_t i = 0; i < cfg.n_features; ++i)
      ds.feature_names.push_back("x" + std::to_string(i + 1));
    ds.bits.resize(n * cfg.n_features);
    ds.labels.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t f = 0; f < cfg.n_features; ++f)
        ds.bits[r * cfg.n_features + f] = static_cast<uint8_t>(rng() & 1);
      ds.labels[r] = ds.bits[r * cfg.n_features + cfg.informative_a] ^
                     ds.bits[r * cfg.n_features + cfg.informative_b];
    }
    return ds;
  };
  BitDataset train = make(n_train, "train");
  BitDataset test = make(cfg.n_examples - n_train, "test");
  // flip exactly floor(noise * n_train) training labels at seeded positions
  const auto n_flip = static_cast<std::size_t>(cfg.label_noise * n_train);
  std::vector<std::size_t> idx(n_train);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  for (std::size_t i = 0; i < n_flip; ++i)
    train.labels[idx[i]] ^= 1;
  return {std::move(train), std::move(test)};
}

namespace {

std::vector<uint8_t> read_maybe_gz(const std::string& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::vector<uint8_t> out;
  uint8_t buf[1 << 16];
  int got;
  while ((got = gzread(f, buf, sizeof buf)) > 0)
    out.insert(out.end(), buf, buf + got);
  const bool bad = got < 0;
  gzclose(f);
  if (bad) throw std::runtime_error("decompression failed: " + path);
  return out;
}

std::string find_idx(const std::string& dir, const std::string& base) {
  for (const char* suffix : {"", ".gz"}) {
    std::string p = dir + "/" + base + suffix;
    if (std::ifstream(p).good()) return p;
  }
  throw std::runtime_error("missing dataset file: " + dir + "/" + base +
                           "[.gz]");
}

uint32_t be32(const uint8_t* p) {
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) |
         (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

BitDataset load_idx_pair(const std::string& img_path,
                         const std::string& lbl_path, double threshold,
                         std::size_t limit, const char* split) {
  const auto img = read_maybe_gz(img_path);
  const auto lbl = read_maybe_gz(lbl_path);
  if (img.size() < 16 || be32(img.data()) != 2051)
    throw std::runtime_error("corrupt image file (bad magic): " + img_path);
  if (lbl.size() < 8 || be32(lbl.data()) != 2049)
    throw std::runtime_error("corrupt label file (bad magic): " + lbl_path);
  const std::size_t n_img = be32(img.data() + 4);
  const std::size_t rows = be32(img.data() + 8);
  const std::size_t cols = be32(img.data() + 12);
  const std::size_t n_lbl = be32(lbl.data() + 4);
  if (n_img != n_lbl)
    throw std::runtime_error("image/label count mismatch: " + img_path);
  if (img.size() != 16 + n_img * rows * cols)
    throw std::runtime_error("corrupt image file (truncated): " + img_path);
  if (lbl.size() != 8 + n_lbl)
    throw std::runtime_error("corrupt label file (truncated): " + lbl_path);

  const std::size_t n = limit == 0 ? n_img : std::min(limit, n_img);
  BitDataset ds;
  ds.width = rows * cols;
  ds.n_labels = 10;
  ds.split = split;
  for (std::size_t i = 0; i < ds.width; ++i)
    ds.feature_names.push_back("px" + std::to_string(i));
  ds.bits.resize(n * ds.width);
  ds.labels.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    const uint8_t* px = img.data() + 16 + r * ds.width;
    for (std::size_t i = 0; i < ds.width; ++i)
      ds.bits[r * ds.width + i] =
          (static_cast<double>(px[i]) / 255.0) > threshold ? 1 : 0;
    ds.labels[r] = lbl[8 + r];
  }
  return ds;
}

}  // namespace

std::pair<BitDataset, BitDataset> load_mnist_binarized(const std::string& dir,
                                                       double threshold,
                                                       std::size_t train_n,
                                                       std::size_t test_n) {
  BitDataset train = load_idx_pair(find_idx(dir, "train-images-idx3-ubyte"),
                                   find_idx(dir, "train-labels-idx1-ubyte"),
                                   threshold, train_n, "train");
  BitDataset test = load_idx_pair(find_idx(dir, "t10k-images-idx3-ubyte"),
                                  find_idx(dir, "t10k-labels-idx1-ubyte"),
                                  threshold, test_n, "test");
  return {std::move(train), std::move(test)};
}

BitDataset make_toy(ToyVariant v) {
  BitDataset ds;
  ds.split = "all";
  ds.n_labels = 2;
  if (v == ToyVariant::SingleFeature) {
    ds.width = 1;
    ds.feature_names = {"outside"};
    ds.bits = {0, 1};
    ds.labels = {0, 1};
    return ds;
  }
  ds.width = 5;
  ds.feature_names = {"very-cold", "cold", "warm", "very-warm", "outside"};
  for (int temp = 0; temp < 4; ++temp) {
    for (int outside = 0; outside < 2; ++outside) {
      uint8_t row[5] = {0, 0, 0, 0, static_cast<uint8_t>(outside)};
      row[temp] = 1;
      ds.bits.insert(ds.bits.end(), row, row + 5);
      const bool very_cold = temp == 0, cold = temp == 1, warm = temp == 2;
      const bool coat = very_cold || cold || (outside && !warm);
      ds.labels.push_back(coat ? 1 : 0);
    }
  }
  return ds;
}

std::pair<BitDataset, BitDataset> split_train_test(const BitDataset& all,
                                                   double train_fraction,
                                                   uint64_t seed) {
  std::vector<std::size_t> idx(all.rows());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_train = static_cast<std::size_t>(train_fraction * all.rows());
  auto take = [&](std::size_t begin, std::size_t end, const char* split) {
    BitDataset ds;
    ds.width = all.width;
    ds.n_labels = all.n_labels;
    ds.feature_names = all.feature_names;
    ds.split = split;
    for (std::size_t i = begin; i < end; ++i) {
      auto r = all.row(idx[i]);
      ds.bits.insert(ds.bits.end(), r.begin(), r.end());
      ds.labels.push_back(all.labels[idx[i]]);
    }
    return ds;
  };
  return {take(0, n_train, "train"), take(n_train, all.rows(), "test")};
}

}  // namespace dbnet
