#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "dbnet/model_io.hpp"
#include "dbnet/train.hpp"
#include "oracle.hpp"

using namespace dbnet;

namespace {

std::vector<SoftTensor> single_weight(std::vector<double> v) {
  std::vector<SoftTensor> w;
  w.push_back(SoftTensor::vec(std::move(v)));
  return w;
}

}  // namespace

TEST_CASE("radam: zero gradient leaves weights unchanged") {
  auto w = single_weight({0.2, 0.7, 0.5 - 1e-3});
  auto before = w[0].data;
  RAdam opt(0.05, 0.9, 0.999, 1e-8);
  for (int i = 0; i < 10; ++i)
    opt.step(w, {std::vector<double>(3, 0.0)});
  CHECK(w[0].data == before);
}

TEST_CASE("radam: early steps take the un-adapted momentum branch") {
  // with beta2 = 0.999 the variance is intractable until t = 5, so the
  // first steps move by exactly -lr * g for a constant gradient
  const double lr = 0.01, g = 0.37;
  auto w = single_weight({0.6});
  RAdam opt(lr, 0.9, 0.999, 1e-8);
  opt.step(w, {std::vector<double>{g}});
  CHECK(w[0].data[0] == doctest::Approx(0.6 - lr * g).epsilon(1e-12));
  opt.step(w, {std::vector<double>{g}});
  CHECK(w[0].data[0] == doctest::Approx(0.6 - 2 * lr * g).epsilon(1e-12));
  opt.step(w, {std::vector<double>{g}});
  opt.step(w, {std::vector<double>{g}});
  CHECK(w[0].data[0] == doctest::Approx(0.6 - 4 * lr * g).epsilon(1e-12));
  // rectification starts at t=5 and shrinks the step sharply
  const double before = w[0].data[0];
  opt.step(w, {std::vector<double>{g}});
  const double delta = before - w[0].data[0];
  CHECK(delta > 0.0);
  CHECK(delta < 0.1 * lr);
}

TEST_CASE("radam clamps weights into [0,1] and rejects non-finite gradients") {
  auto w = single_weight({0.01, 0.99});
  RAdam opt(0.5, 0.9, 0.999, 1e-8);
  opt.step(w, {std::vector<double>{1.0, -1.0}});
  CHECK(w[0].data[0] >= 0.0);
  CHECK(w[0].data[1] <= 1.0);
  auto w2 = single_weight({0.5 - 1e-3});
  RAdam opt2(0.5, 0.9, 0.999, 1e-8);
  CHECK_THROWS_AS(
      opt2.step(w2, {std::vector<double>{std::nan("")}}), std::runtime_error);
}

TEST_CASE("weights never sit exactly on the threshold") {
  CHECK(snap_off_half(0.5) < 0.5);
  CHECK(static_cast<float>(snap_off_half(0.5)) < 0.5f);
  CHECK(snap_off_half(0.499) == 0.499);
  CHECK(snap_off_half(0.501) == 0.501);
  // a weight driven onto 0.5 by an update gets snapped
  auto w = single_weight({0.5});  // after init snapping this cannot occur,
  RAdam opt(0.01, 0.9, 0.999, 1e-8);
  opt.step(w, {std::vector<double>{0.0}});
  CHECK(w[0].data[0] < 0.5);
}

TEST_CASE("init schemes") {
  std::mt19937_64 rng(3);
  auto c = init_weights(InitScheme::constant(0.3), Shape::vec(50), rng);
  for (double v : c.data) CHECK(v == 0.3);

  auto b = init_weights(InitScheme::bernoulli_mix(0.501, 0.3, 0.01),
                        Shape::vec(100000), rng);
  std::size_t hi = 0;
  for (double v : b.data) {
    CHECK((v == 0.501 || v == 0.3));
    hi += v == 0.501;
  }
  CHECK(hi > 800);
  CHECK(hi < 1200);  // ~1% of 100k

  auto u = init_weights(InitScheme::uniform(0.499, 0.501), Shape::vec(1000), rng);
  double mn = 1, mx = 0;
  for (double v : u.data) {
    mn = std::min(mn, v);
    mx = std::max(mx, v);
    CHECK(v != 0.5);  // snapped off the threshold
  }
  CHECK(mn < 0.5);
  CHECK(mx > 0.5);
}

TEST_CASE("toy training reaches 100% and hardens to (False, True)") {
  BitDataset toy = make_toy(ToyVariant::SingleFeature);
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.lr = 0.01;
  cfg.seed = 7;
  cfg.threads = 1;
  auto [net, rep] =
      train(SoftNet::create(build_architecture("toy")), toy, toy, cfg);
  CHECK(rep.final_soft_train_acc == 100.0);
  CHECK(rep.final_soft_test_acc == 100.0);
  CHECK(rep.final_hard_test_acc == 100.0);
  CHECK(rep.lossless);
  HardNet hard = harden_net(net);
  CHECK_FALSE(hard.weight_blocks[0].get(0));  // w1 = False
  CHECK(hard.weight_blocks[0].get(1));        // w2 = True
  // the optimum of the hardened two-class loss: outputs are exact bits
  CHECK(rep.final_train_loss ==
        doctest::Approx(std::log(1.0 + std::exp(-1.0))).epsilon(1e-9));
}

TEST_CASE("training is deterministic given the seed") {
  BitDataset toy5 = make_toy(ToyVariant::FiveFeature);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.seed = 11;
  cfg.threads = 2;  // chunked reduction keeps parallel runs bit-identical
  auto [net_a, rep_a] =
      train(SoftNet::create(build_architecture("toy5")), toy5, toy5, cfg);
  auto [net_b, rep_b] =
      train(SoftNet::create(build_architecture("toy5")), toy5, toy5, cfg);
  CHECK(net_a.weights[0].data == net_b.weights[0].data);
  CHECK(rep_a.final_train_loss == rep_b.final_train_loss);
  REQUIRE(rep_a.epochs.size() == rep_b.epochs.size());
  for (std::size_t i = 0; i < rep_a.epochs.size(); ++i)
    CHECK(rep_a.epochs[i].train_acc == rep_b.epochs[i].train_acc);
}

TEST_CASE("lossless hardening holds for stochastically trained nets") {
  BitDataset toy5 = make_toy(ToyVariant::FiveFeature);
  for (uint64_t seed = 0; seed < 5; ++seed) {
    TrainConfig cfg;
    cfg.epochs = 120;
    cfg.seed = seed;
    cfg.threads = 1;
    auto [net, rep] =
        train(SoftNet::create(build_architecture("toy5")), toy5, toy5, cfg);
    CHECK(rep.lossless);
    CHECK(rep.final_soft_train_acc == rep.final_hard_train_acc);
  }
}

TEST_CASE("dataset width mismatch is rejected") {
  BitDataset toy = make_toy(ToyVariant::SingleFeature);
  TrainConfig cfg;
  cfg.epochs = 1;
  CHECK_THROWS_AS(
      (void)train(SoftNet::create(build_architecture("toy5")), toy, toy, cfg),
      std::invalid_argument);
}

TEST_CASE("xor smoke: accuracy rises well above chance quickly") {
  NoisyXorConfig dc;
  dc.seed = 5;
  auto [tr, te] = gen_noisy_xor(dc);
  TrainConfig cfg;
  cfg.epochs = 220;
  cfg.lr = 0.01;
  cfg.seed = 5;
  cfg.threads = 2;
  auto [net, rep] =
      train(SoftNet::create(build_architecture("xor")), tr, te, cfg);
  CHECK(rep.final_soft_test_acc > 80.0);
  CHECK(rep.lossless);
}
