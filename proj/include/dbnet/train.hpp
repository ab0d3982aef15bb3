#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "dbnet/data.hpp"
#include "dbnet/hardnet.hpp"
#include "dbnet/softnet.hpp"

namespace dbnet {

struct TrainConfig {
  int epochs = 1000;
  int batch_size = 0;  // 0 = full batch
  double lr = 0.01;
  uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int eval_every = 0;  // test accuracy every k epochs (0 = final only)
  int threads = 0;     // 0 = hardware concurrency
};

struct EpochPoint {
  int epoch = 0;
  double train_acc = 0.0;
  double test_acc = -1.0;  // < 0 when not evaluated this epoch
};

struct TrainReport {
  std::vector<EpochPoint> epochs;
  double final_train_loss = 0.0;
  double final_soft_train_acc = 0.0;
  double final_soft_test_acc = 0.0;
  double final_hard_train_acc = 0.0;
  double final_hard_test_acc = 0.0;
  bool lossless = false;  // hard predictions == hardened soft predictions
  double wall_seconds = 0.0;
  uint64_t seed = 0;
  uint64_t train_hash = 0;
  uint64_t test_hash = 0;
};

// Rectified Adam with per-tensor moment state and a shared step counter.
// Weights are clamped to [0,1] after every update.
class RAdam {
 public:
  RAdam(double lr, double beta1, double beta2, double eps)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

  void step(std::vector<SoftTensor>& weights,
            const std::vector<std::vector<double>>& grads);
  int64_t steps() const { return t_; }

 private:
  double lr_, b1_, b2_, eps_;
  int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Mean softmax cross-entropy loss and gradients over a row range, evaluated
// in parallel over fixed-size chunks so the reduction order (and therefore
// the result) is independent of the thread count.
struct BatchResult {
  double loss_sum = 0.0;
  std::size_t correct = 0;
  std::vector<std::vector<double>> grads;  // per weight tensor, scaled by 1/batch
};

BatchResult run_batch(const SoftNet& net, const BitDataset& data,
                      std::span<const std::size_t> rows, bool train_mode,
                      uint64_t seed, uint64_t epoch, int threads,
                      bool want_grads);

double evaluate_soft(const SoftNet& net, const BitDataset& data,
                     int threads = 0);
double evaluate_hard(const HardNet& net, const BitDataset& data);

// Exact prediction agreement between the hardened soft net and the hard net.
bool predictions_match(const SoftNet& soft, const HardNet& hard,
                       const BitDataset& data, int threads = 0);

std::pair<SoftNet, TrainReport> train(SoftNet net, const BitDataset& train_set,
                                      const BitDataset& test_set,
                                      const TrainConfig& cfg);

}  // namespace dbnet
