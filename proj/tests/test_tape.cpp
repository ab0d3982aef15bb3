#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "dbnet/tape.hpp"
#include "oracle.hpp"

using namespace dbnet;

namespace {
constexpr double kTol = 1e-6;
}

TEST_CASE("sort_ascending tracks the permutation") {
  Tape t;
  std::vector<double> x{0.4, 0.9, 0.2};
  Var v = t.leaf(x, Shape::vec(3));
  Var s = t.sort_ascending(v);
  auto vals = t.values(s);
  CHECK(vals[0] == doctest::Approx(0.2));
  CHECK(vals[1] == doctest::Approx(0.4));
  CHECK(vals[2] == doctest::Approx(0.9));
  auto perm = t.sort_perm(s);  // original index per sorted slot
  CHECK(perm[0] == 2);
  CHECK(perm[1] == 0);
  CHECK(perm[2] == 1);
}

TEST_CASE("sort backward scatters through the inverse permutation exactly") {
  std::mt19937_64 rng(3);
  for (int it = 0; it < 200; ++it) {
    std::size_t n = 1 + static_cast<std::size_t>(rng() % 12);
    auto x = oracle::sample_off_ties(rng, n);
    // pick one sorted slot; its gradient must land bit-identically on the source
    std::size_t k = static_cast<std::size_t>(rng() % n);
    Tape t;
    Var v = t.leaf(x, Shape::vec(n));
    Var s = t.sort_ascending(v);
    auto perm = t.sort_perm(s);
    std::vector<int64_t> perm_copy(perm.begin(), perm.end());
    Var out = t.select(s, k);
    Gradients g = t.backward(out);
    const SoftTensor* gx = g.find(v);
    REQUIRE(gx != nullptr);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(gx->data[i] == (i == static_cast<std::size_t>(perm_copy[k]) ? 1.0 : 0.0));
  }
}

TEST_CASE("min reduction routes gradient to the arg min") {
  Tape t;
  std::vector<double> x{0.1, 0.9};
  Var v = t.leaf(x, Shape::vec(2));
  Var m = t.row_min(v);
  Var out = t.select(m, 0);
  Gradients g = t.backward(out);
  const SoftTensor* gx = g.find(v);
  REQUIRE(gx);
  CHECK(gx->data[0] == 1.0);
  CHECK(gx->data[1] == 0.0);  // d min / d y = 0 at (0.1, 0.9)
}

TEST_CASE("max reduction is gradient-sparse at (0.1, 0.9)") {
  Tape t;
  std::vector<double> x{0.1, 0.9};
  Var v = t.leaf(x, Shape::vec(2));
  Var out = t.select(t.row_max(v), 0);
  Gradients g = t.backward(out);
  CHECK(g.find(v)->data[0] == 0.0);
  CHECK(g.find(v)->data[1] == 1.0);
}

TEST_CASE("not_xor analytic partials") {
  // d/dx not_xor(w, x) = 2w - 1, d/dw = 2x - 1
  Tape t;
  std::vector<double> w{0.7}, x{0.2};
  Var vw = t.leaf(w, Shape::vec(1));
  Var vx = t.leaf(x, Shape::vec(1));
  Var out = t.select(t.not_xor(vw, vx), 0);
  CHECK(t.scalar(out) == doctest::Approx(0.38).epsilon(kTol));
  Gradients g = t.backward(out);
  CHECK(g.find(vw)->data[0] == doctest::Approx(2 * 0.2 - 1).epsilon(kTol));
  CHECK(g.find(vx)->data[0] == doctest::Approx(2 * 0.7 - 1).epsilon(kTol));
}

TEST_CASE("mean gradient is uniform") {
  Tape t;
  std::vector<double> x{0.1, 0.2, 0.3, 0.4};
  Var v = t.leaf(x, Shape::vec(4));
  Gradients g = t.backward(t.mean_all(v));
  for (double d : g.find(v)->data) CHECK(d == doctest::Approx(0.25));
}

TEST_CASE("soft_maj via tape: all partials nonzero and FD-consistent") {
  std::vector<double> x{0.4, 0.9, 0.2};
  auto build = [](Tape& t, const std::vector<double>& p, Var& leaf) {
    leaf = t.leaf(p, Shape::vec(p.size()));
    return ad_soft_maj(t, leaf);
  };
  auto r = oracle::fd_check(build, x);
  CHECK(r.max_violation <= 0.0);
  CHECK(r.all_nonzero);
}

TEST_CASE("straight-through harden: forward thresholds, backward identity") {
  Tape t;
  std::vector<double> x{0.4, 0.9};
  Var v = t.leaf(x, Shape::vec(2));
  Var h = t.ste_harden(v);
  CHECK(t.values(h)[0] == 0.0);
  CHECK(t.values(h)[1] == 1.0);
  Var out = t.mean_all(h);
  Gradients g = t.backward(out);
  CHECK(g.find(v)->data[0] == doctest::Approx(0.5));
  CHECK(g.find(v)->data[1] == doctest::Approx(0.5));
}

TEST_CASE("gt_half stops gradients") {
  Tape t;
  std::vector<double> x{0.4, 0.9};
  Var v = t.leaf(x, Shape::vec(2));
  Gradients g = t.backward(t.mean_all(t.gt_half(v)));
  const SoftTensor* gx = g.find(v);
  REQUIRE(gx);
  CHECK(gx->data[0] == 0.0);
  CHECK(gx->data[1] == 0.0);
}

TEST_CASE("backward twice is a contract violation") {
  Tape t;
  std::vector<double> x{0.3};
  Var v = t.leaf(x, Shape::vec(1));
  Var out = t.mean_all(v);
  (void)t.backward(out);
  CHECK_THROWS_AS((void)t.backward(out), std::logic_error);
  t.reset();  // re-arms
  Var v2 = t.leaf(x, Shape::vec(1));
  CHECK_NOTHROW((void)t.backward(t.mean_all(v2)));
}

TEST_CASE("shape mismatch raises a descriptive diagnostic") {
  Tape t;
  std::vector<double> a{0.1, 0.2}, b{0.1, 0.2, 0.3};
  Var va = t.leaf(a, Shape::vec(2));
  Var vb = t.leaf(b, Shape::vec(3));
  CHECK_THROWS_WITH_AS((void)t.add(va, vb), doctest::Contains("shape mismatch"),
                       std::invalid_argument);
}

TEST_CASE("broadcast not_xor matches the scalar op and accumulates columns") {
  Tape t;
  std::vector<double> w{0.1, 0.9, 0.3, 0.8, 0.5, 0.2};  // 2x3
  std::vector<double> x{0.6, 0.4, 0.7};
  Var vw = t.leaf(w, Shape::mat(2, 3));
  Var vx = t.leaf(x, Shape::vec(3));
  Var out = t.not_xor(vw, vx);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 3; ++c)
      CHECK(t.values(out)[r * 3 + c] ==
            doctest::Approx(not_xor(w[r * 3 + c], x[c])));
  Gradients g = t.backward(t.mean_all(out));
  // column gradient sums across rows: d mean / d x_c = (1/6) sum_r (2 w_rc - 1)
  for (std::size_t c = 0; c < 3; ++c) {
    double expect = ((2 * w[c] - 1) + (2 * w[3 + c] - 1)) / 6.0;
    CHECK(g.find(vx)->data[c] == doctest::Approx(expect).epsilon(kTol));
  }
}

TEST_CASE("fused pair ops agree with softbit-core definitions") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int it = 0; it < 5000; ++it) {
    double a = u(rng), b = u(rng);
    Tape t;
    std::vector<double> va{a}, vb{b};
    Var xa = t.leaf(va, Shape::vec(1));
    Var xb = t.leaf(vb, Shape::vec(1));
    CHECK(t.values(t.pair_and(xa, xb))[0] == soft_and2(a, b));
    CHECK(t.values(t.pair_or(xa, xb))[0] == soft_or2(a, b));
    CHECK(t.values(t.pair_implies(xa, xb))[0] == soft_implies(a, b));
  }
}

TEST_CASE("finite differences agree for every differentiable op") {
  std::mt19937_64 rng(43);
  auto run = [&](const oracle::BuildFn& build, std::size_t n, int iters,
                 bool expect_rich) {
    for (int it = 0; it < iters; ++it) {
      auto x = oracle::sample_off_ties(rng, n);
      auto r = oracle::fd_check(build, x);
      CHECK(r.max_violation <= 0.0);
      if (expect_rich) CHECK(r.all_nonzero);
    }
  };

  run([](Tape& t, const std::vector<double>& p, Var& leaf) {
    leaf = t.leaf(p, Shape::vec(p.size()));
    return ad_soft_and(t, leaf);
  }, 4, 100, true);

  run([](Tape& t, const std::vector<double>& p, Var& leaf) {
    leaf = t.leaf(p, Shape::vec(p.size()));
    return ad_soft_or(t, leaf);
  }, 4, 100, true);

  run([](Tape& t, const std::vector<double>& p, Var& leaf) {
    leaf = t.leaf(p, Shape::vec(p.size()));
    return ad_soft_maj(t, leaf);
  }, 5, 100, true);

  run([](Tape& t, const std::vector<double>& p, Var& leaf) {
    leaf = t.leaf(p, Shape::vec(p.size()));
    Var hot = ad_count_hot(t, leaf);
    return t.mean_all(hot);
  }, 5, 100, false);

  run([](Tape& t, const std::vector<double>& p, Var& leaf) {
    leaf = t.leaf(p, Shape::vec(p.size()));
    return ad_soft_count(t, leaf, 2);
  }, 5, 100, false);

  // fused pair ops against their composed counterparts
  run([](Tape& t, const std::vector<double>& p, Var& leaf) {
    leaf = t.leaf(p, Shape::vec(2));
    Var a = t.select(leaf, 0), b = t.select(leaf, 1);
    return t.select(t.pair_and(a, b), 0);
  }, 2, 200, true);

  run([](Tape& t, const std::vector<double>& p, Var& leaf) {
    leaf = t.leaf(p, Shape::vec(2));
    Var a = t.select(leaf, 0), b = t.select(leaf, 1);
    return t.select(t.pair_implies(a, b), 0);
  }, 2, 200, true);

  run([](Tape& t, const std::vector<double>& p, Var& leaf) {
    leaf = t.leaf(p, Shape::vec(p.size()));
    return t.select(t.row_maj(leaf), 0);
  }, 6, 100, true);

  run([](Tape& t, const std::vector<double>& p, Var& leaf) {
    leaf = t.leaf(p, Shape::vec(p.size()));
    Var m = t.reshape(leaf, Shape::mat(2, 3));
    Var soft = t.row_maj(m);
    return t.mean_all(soft);
  }, 6, 100, false);

  run([](Tape& t, const std::vector<double>& p, Var& leaf) {
    leaf = t.leaf(p, Shape::vec(p.size()));
    return t.select(t.bucket_sum(t.affine(leaf, 0.5, 0.1), 2), 1);
  }, 6, 50, false);

  run([](Tape& t, const std::vector<double>& p, Var& leaf) {
    leaf = t.leaf(p, Shape::vec(p.size()));
    return t.softmax_ce(t.affine(leaf, 2.0, -0.5), 1);
  }, 4, 100, false);
}

TEST_CASE("row_maj equals the softbit-core majority per row") {
  std::mt19937_64 rng(47);
  for (int it = 0; it < 500; ++it) {
    std::size_t r = 1 + rng() % 4, c = 1 + rng() % 9;
    std::vector<double> m;
    for (std::size_t i = 0; i < r * c; ++i)
      m.push_back(oracle::sample_off_threshold(rng, 1)[0]);
    Tape t;
    Var v = t.leaf(m, Shape::mat(r, c));
    auto out = t.values(t.row_maj(v));
    for (std::size_t i = 0; i < r; ++i)
      CHECK(out[i] == soft_maj({m.data() + i * c, c}));
  }
}

TEST_CASE("composed count_hot equals softbit-core") {
  std::mt19937_64 rng(53);
  for (auto conj : {PairwiseConj::Min, PairwiseConj::MarginPacked}) {
    for (int it = 0; it < 500; ++it) {
      std::size_t n = 1 + rng() % 10;
      auto x = oracle::sample_off_threshold(rng, n);
      Tape t;
      Var v = t.leaf(x, Shape::vec(n));
      auto got = t.value(ad_count_hot(t, v, conj));
      auto ref = soft_count_hot(x, conj);
      REQUIRE(got.data.size() == ref.size());
      for (std::size_t i = 0; i < ref.size(); ++i)
        CHECK(got.data[i] == ref[i]);
    }
  }
}

TEST_CASE("flip_where flips exactly the masked entries") {
  Tape t;
  std::vector<double> x{0.2, 0.8, 0.4};
  std::vector<uint8_t> mask{1, 0, 1};
  Var v = t.leaf(x, Shape::vec(3));
  Var f = t.flip_where(v, mask);
  CHECK(t.values(f)[0] == doctest::Approx(0.8));
  CHECK(t.values(f)[1] == doctest::Approx(0.8));
  CHECK(t.values(f)[2] == doctest::Approx(0.6));
  Gradients g = t.backward(t.mean_all(f));
  CHECK(g.find(v)->data[0] == doctest::Approx(-1.0 / 3));
  CHECK(g.find(v)->data[1] == doctest::Approx(1.0 / 3));
}

TEST_CASE("softmax cross-entropy values") {
  Tape t;
  std::vector<double> l{1.0, 0.0};
  Var v = t.leaf(l, Shape::vec(2));
  CHECK(t.scalar(t.softmax_ce(v, 0)) ==
        doctest::Approx(std::log(1.0 + std::exp(-1.0))).epsilon(1e-9));
  Tape t2;
  std::vector<double> u{0.3, 0.3, 0.3, 0.3, 0.3};
  Var vu = t2.leaf(u, Shape::vec(5));
  CHECK(t2.scalar(t2.softmax_ce(vu, 3)) == doctest::Approx(std::log(5.0)));
}

TEST_CASE("determinism: identical inputs give bit-identical gradients") {
  auto run = [] {
    std::mt19937_64 rng(59);
    auto x = oracle::sample_off_ties(rng, 8);
    Tape t;
    Var v = t.leaf(x, Shape::vec(8));
    Var out = ad_soft_maj(t, v);
    Gradients g = t.backward(out);
    return g.find(v)->data;
  };
  auto a = run(), b = run();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("backward_accumulate matches backward with scaling") {
  std::mt19937_64 rng(61);
  auto x = oracle::sample_off_ties(rng, 6);
  Tape t;
  Var v = t.leaf(x, Shape::vec(6));
  Var out = ad_soft_maj(t, v);
  Gradients g = t.backward(out);
  Tape t2;
  Var v2 = t2.leaf(x, Shape::vec(6));
  Var out2 = ad_soft_maj(t2, v2);
  std::vector<std::vector<double>> acc(1, std::vector<double>(6, 1.0));
  Var leaves[] = {v2};
  t2.backward_accumulate(out2, leaves, acc, 0.5);
  for (std::size_t i = 0; i < 6; ++i)
    CHECK(acc[0][i] == doctest::Approx(1.0 + 0.5 * g.find(v)->data[i]));
}
