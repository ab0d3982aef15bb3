#include "dbnet/train.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <thread>

#include "dbnet/rng.hpp"

namespace dbnet {

namespace {

// Fixed chunk size keeps the gradient reduction order independent of the
// thread count, so runs are bit-reproducible on any machine.
constexpr std::size_t kChunkRows = 64;

int effective_threads(int requested, std::size_t jobs) {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  std::size_t t = requested > 0 ? static_cast<std::size_t>(requested) : hw;
  return static_cast<int>(std::min<std::size_t>(t, std::max<std::size_t>(jobs, 1)));
}

template <class Fn>
void parallel_chunks(std::size_t n_chunks, int threads, Fn&& fn) {
  if (threads <= 1 || n_chunks <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) fn(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= n_chunks) return;
      fn(c);
    }
  };
  std::vector<std::thread> pool;
  for (int i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
}

std::vector<std::vector<double>> zero_grads(const SoftNet& net) {
  std::vector<std::vector<double>> g;
  g.reserve(net.weights.size());
  for (const auto& w : net.weights) g.emplace_back(w.size(), 0.0);
  return g;
}

}  // namespace

BatchResult run_batch(const SoftNet& net, const BitDataset& data,
                      std::span<const std::size_t> rows, bool train_mode,
                      uint64_t seed, uint64_t epoch, int threads,
                      bool want_grads) {
  const std::size_t n = rows.size();
  const std::size_t n_chunks = (n + kChunkRows - 1) / kChunkRows;
  struct Chunk {
    double loss = 0.0;
    std::size_t correct = 0;
    std::vector<std::vector<double>> grads;
  };
  std::vector<Chunk> chunks(n_chunks);
  if (want_grads)
    for (auto& c : chunks) c.grads = zero_grads(net);

  const double scale = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;
  const int nthreads = effective_threads(threads, n_chunks);

  parallel_chunks(n_chunks, nthreads, [&](std::size_t ci) {
    thread_local Tape tape;
    thread_local std::vector<double> input;
    Chunk& ch = chunks[ci];
    const std::size_t begin = ci * kChunkRows;
    const std::size_t end = std::min(begin + kChunkRows, n);
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t r = rows[i];
      tape.reset();
      std::vector<Var> leaves = register_weight_leaves(net, tape);
      auto bits = data.row(r);
      input.resize(bits.size());
      for (std::size_t j = 0; j < bits.size(); ++j)
        input[j] = bits[j] ? 1.0 : 0.0;
      const Var out = softnet_forward(net, tape, leaves, input, train_mode,
                                      mix_seed(seed, epoch, r));
      const auto vals = tape.values(out);
      if (argmax_label(vals) == data.labels[r]) ++ch.correct;
      const Var loss = tape.softmax_ce(out, data.labels[r]);
      ch.loss += tape.scalar(loss);
      if (want_grads)
        tape.backward_accumulate(loss, leaves, ch.grads, scale);
    }
  });

  BatchResult res;
  if (want_grads) res.grads = zero_grads(net);
  for (const auto& ch : chunks) {  // fixed chunk order
    res.loss_sum += ch.loss;
    res.correct += ch.correct;
    if (want_grads)
      for (std::size_t w = 0; w < res.grads.size(); ++w)
        for (std::size_t j = 0; j < res.grads[w].size(); ++j)
          res.grads[w][j] += ch.grads[w][j];
  }
  return res;
}

void RAdam::step(std::vector<SoftTensor>& weights,
                 const std::vector<std::vector<double>>& grads) {
  if (m_.empty()) {
    for (const auto& w : weights) {
      m_.emplace_back(w.size(), 0.0);
      v_.emplace_back(w.size(), 0.0);
    }
  }
  if (grads.size() != weights.size())
    throw std::invalid_argument("RAdam::step: gradient tensor count mismatch");
  ++t_;
  const double t = static_cast<double>(t_);
  const double b1t = std::pow(b1_, t);
  const double b2t = std::pow(b2_, t);
  const double rho_inf = 2.0 / (1.0 - b2_) - 1.0;
  const double rho_t = rho_inf - 2.0 * t * b2t / (1.0 - b2t);
  double r_t = 0.0;
  const bool rectified = rho_t > 4.0;
  if (rectified)
    r_t = std::sqrt(((rho_t - 4.0) * (rho_t - 2.0) * rho_inf) /
                    ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));
  for (std::size_t wi = 0; wi < weights.size(); ++wi) {
    auto& w = weights[wi].data;
    const auto& g = grads[wi];
    if (w.size() != g.size())
      throw std::invalid_argument("RAdam::step: gradient shape mismatch");
    auto& m = m_[wi];
    auto& v = v_[wi];
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (!std::isfinite(g[i]))
        throw std::runtime_error("RAdam::step: non-finite gradient");
      m[i] = b1_ * m[i] + (1.0 - b1_) * g[i];
      v[i] = b2_ * v[i] + (1.0 - b2_) * g[i] * g[i];
      const double mhat = m[i] / (1.0 - b1t);
      double upd;
      if (rectified) {
        const double vhat = std::sqrt(v[i] / (1.0 - b2t));
        upd = lr_ * r_t * mhat / (vhat + eps_);
      } else {
        upd = lr_ * mhat;  // un-adapted momentum while variance is intractable
      }
      w[i] = snap_off_half(std::clamp(w[i] - upd, 0.0, 1.0));
    }
  }
}

double evaluate_soft(const SoftNet& net, const BitDataset& data, int threads) {
  std::vector<std::size_t> rows(data.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  BatchResult r = run_batch(net, data, rows, false, 0, 0, threads, false);
  return data.rows() ? 100.0 * static_cast<double>(r.correct) / data.rows() : 0.0;
}

double evaluate_hard(const HardNet& net, const BitDataset& data) {
  std::size_t correct = 0;
  for (std::size_t r = 0; r < data.rows(); ++r)
    if (hard_predict(net, embed_hard(data.row(r))) == data.labels[r]) ++correct;
  return data.rows() ? 100.0 * static_cast<double>(correct) / data.rows() : 0.0;
}

bool predictions_match(const SoftNet& soft, const HardNet& hard,
                       const BitDataset& data, int threads) {
  const std::size_t n = data.rows();
  const std::size_t n_chunks = (n + kChunkRows - 1) / kChunkRows;
  std::atomic<bool> ok{true};
  parallel_chunks(n_chunks, effective_threads(threads, n_chunks),
                  [&](std::size_t ci) {
                    if (!ok.load()) return;
                    const std::size_t begin = ci * kChunkRows;
                    const std::size_t end = std::min(begin + kChunkRows, n);
                    for (std::size_t r = begin; r < end; ++r) {
                      const auto row = data.row(r);
                      if (soft_predict(soft, row) !=
                          hard_predict(hard, embed_hard(row))) {
                        ok.store(false);
                        return;
                      }
                    }
                  });
  return ok.load();
}

std::pair<SoftNet, TrainReport> train(SoftNet net, const BitDataset& train_set,
                                      const BitDataset& test_set,
                                      const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (cfg.lr <= 0) throw std::invalid_argument("train: learning rate must be > 0");
  if (train_set.width != net.spec.input_width)
    throw std::invalid_argument("train: dataset width does not match net input");
  const auto t0 = std::chrono::steady_clock::now();

  net.init_weights(cfg.seed);
  RAdam opt(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);

  TrainReport rep;
  rep.seed = cfg.seed;
  rep.train_hash = train_set.content_hash();
  rep.test_hash = test_set.content_hash();

  const std::size_t n = train_set.rows();
  const std::size_t batch =
      cfg.batch_size > 0 ? std::min<std::size_t>(cfg.batch_size, n) : n;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (batch < n) {
      std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<uint64_t>(epoch),
                                   0x73687566666cull));
      std::shuffle(order.begin(), order.end(), rng);
    }
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t at = 0; at < n; at += batch) {
      const std::size_t take = std::min(batch, n - at);
      BatchResult res =
          run_batch(net, train_set, {order.data() + at, take}, true, cfg.seed,
                    static_cast<uint64_t>(epoch), cfg.threads, true);
      if (!std::isfinite(res.loss_sum))
        throw std::runtime_error("train: loss diverged at epoch " +
                                 std::to_string(epoch));
      loss_sum += res.loss_sum;
      correct += res.correct;
      opt.step(net.weights, res.grads);
    }
    EpochPoint pt;
    pt.epoch = epoch;
    pt.train_acc = 100.0 * static_cast<double>(correct) / static_cast<double>(n);
    if (cfg.eval_every > 0 && (epoch % cfg.eval_every == 0) && test_set.rows())
      pt.test_acc = evaluate_soft(net, test_set, cfg.threads);
    rep.epochs.push_back(pt);
    rep.final_train_loss = loss_sum / static_cast<double>(n);
  }

  rep.final_soft_train_acc = evaluate_soft(net, train_set, cfg.threads);
  rep.final_soft_test_acc =
      test_set.rows() ? evaluate_soft(net, test_set, cfg.threads) : 0.0;
  const HardNet hard = harden_net(net);
  rep.final_hard_train_acc = evaluate_hard(hard, train_set);
  rep.final_hard_test_acc = test_set.rows() ? evaluate_hard(hard, test_set) : 0.0;
  rep.lossless = predictions_match(net, hard, train_set, cfg.threads) &&
                 (!test_set.rows() || predictions_match(net, hard, test_set,
                                                        cfg.threads));
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(net), std::move(rep)};
}

}  // namespace dbnet
