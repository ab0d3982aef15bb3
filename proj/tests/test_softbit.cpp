#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "dbnet/softbit.hpp"
#include "oracle.hpp"

using namespace dbnet;

namespace {
constexpr double kTol = 1e-6;

std::vector<double> vec(std::initializer_list<double> v) { return {v}; }
}  // namespace

TEST_CASE("harden thresholds at 1/2, mapping exactly 1/2 low") {
  auto h = harden(vec({0.4, 0.9, 0.2}));
  CHECK(h == std::vector<uint8_t>{0, 1, 0});
  CHECK(harden(vec({0.5})) == std::vector<uint8_t>{0});
  CHECK(harden(vec({0.5 + 1e-12})) == std::vector<uint8_t>{1});
}

TEST_CASE("not_xor closed form") {
  CHECK(not_xor(1.0, 0.8) == doctest::Approx(0.8).epsilon(kTol));   // pass-through
  CHECK(not_xor(0.0, 0.8) == doctest::Approx(0.2).epsilon(kTol));   // negation
  CHECK(not_xor(0.7, 0.2) == doctest::Approx(0.38).epsilon(kTol));
}

TEST_CASE("margin_fraction") {
  auto x = vec({0.2, 0.4, 0.9});
  CHECK(margin_fraction(x, 1) == doctest::Approx(0.05).epsilon(kTol));
  auto y = vec({0.3, 0.5, 0.8});
  CHECK(margin_fraction(y, 1) == doctest::Approx(0.0));
  auto z = vec({1.0, 1.0});
  CHECK(margin_fraction(z, 0) == doctest::Approx(0.5).epsilon(kTol));
}

TEST_CASE("augmented_bit branches") {
  auto a = vec({0.6, 0.6});
  CHECK(augmented_bit(a, 0) == doctest::Approx(0.56).epsilon(kTol));
  auto b = vec({0.2, 0.8});
  CHECK(augmented_bit(b, 0) == doctest::Approx(0.35).epsilon(kTol));
  auto c = vec({0.5, 0.9, 0.1});
  CHECK(augmented_bit(c, 0) == doctest::Approx(0.5));  // zero margin
}

TEST_CASE("augmented_bit preserves the representative bit's hardening") {
  std::mt19937_64 rng(7);
  for (int it = 0; it < 5000; ++it) {
    std::size_t n = 1 + it % 8;
    auto x = oracle::sample_off_threshold(rng, n);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(harden_bit(augmented_bit(x, i)) == harden_bit(x[i]));  // Lemma 1
  }
}

TEST_CASE("soft_and") {
  CHECK(soft_and(vec({0.6, 0.6})) == doctest::Approx(0.56).epsilon(kTol));
  CHECK(harden_bit(soft_and(vec({0.6, 0.6}))));
  CHECK(soft_and(vec({1.0, 1.0})) == doctest::Approx(1.0));
  CHECK(soft_and(vec({0.2, 0.8})) == doctest::Approx(0.35).epsilon(kTol));
  CHECK_FALSE(harden_bit(soft_and(vec({0.2, 0.8}))));
  // product logic fails here; the augmented form must not
  CHECK(0.6 * 0.6 == doctest::Approx(0.36));
  CHECK(soft_and2(0.6, 0.6) == doctest::Approx(soft_and(vec({0.6, 0.6}))));
}

TEST_CASE("soft_and n=2 agrees with the piecewise closed form") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int it = 0; it < 10000; ++it) {
    double x = u(rng), y = u(rng);
    double mn = std::min(x, y);
    double expect = mn > 0.5 ? 0.5 + 0.5 * (x + y) * (mn - 0.5)
                             : mn + 0.5 * (x + y) * (0.5 - mn);
    CHECK(soft_and2(x, y) == doctest::Approx(expect).epsilon(kTol));
  }
}

TEST_CASE("soft_or") {
  CHECK(soft_or(vec({0.2, 0.8})) == doctest::Approx(0.65).epsilon(kTol));
  CHECK(harden_bit(soft_or(vec({0.2, 0.8}))));
  CHECK(soft_or(vec({0.0, 0.0})) == doctest::Approx(0.0));
  CHECK(soft_or(vec({0.4, 0.4})) == doctest::Approx(0.44).epsilon(kTol));
  CHECK_FALSE(harden_bit(soft_or(vec({0.4, 0.4}))));
}

TEST_CASE("soft_implies") {
  CHECK(soft_implies(0.9, 0.2) == doctest::Approx(0.245).epsilon(kTol));
  CHECK_FALSE(harden_bit(soft_implies(0.9, 0.2)));
  CHECK(soft_implies(1.0, 1.0) == doctest::Approx(0.75).epsilon(kTol));
  CHECK(harden_bit(soft_implies(1.0, 1.0)));
  // false antecedent -> high for all consequents
  for (double y : {0.0, 0.2, 0.49, 0.51, 1.0})
    CHECK(harden_bit(soft_implies(0.0, y)));
}

TEST_CASE("majority_index is the 0-based median position") {
  CHECK(majority_index(3) == 1);  // the 1-based ceil(3/2) = 2
  CHECK(majority_index(1) == 0);
  CHECK(majority_index(4) == 1);
  // against the lemma criterion: position must be high iff #high >= floor(n/2+1)
  for (std::size_t n = 1; n <= 9; ++n) {
    for (std::size_t h = 0; h <= n; ++h) {
      // sorted vector with h high bits at the end
      std::vector<double> x(n, 0.25);
      for (std::size_t i = n - h; i < n; ++i) x[i] = 0.75;
      bool maj = h >= n / 2 + 1;
      CHECK(harden_bit(x[majority_index(n)]) == maj);
    }
  }
}

TEST_CASE("soft_maj") {
  auto x = vec({0.4, 0.9, 0.2});
  CHECK(soft_maj(x) == doctest::Approx(0.45).epsilon(kTol));
  CHECK_FALSE(harden_bit(soft_maj(x)));
  CHECK(harden_bit(soft_maj(vec({1.0, 1.0, 0.0}))));
}

TEST_CASE("soft_maj hard-equivalent to floor-formula majority on corners") {
  for (std::size_t n = 1; n <= 7; ++n) {
    oracle::for_each_corner(n, 0.25, 0.75, [&](const std::vector<double>& x) {
      std::vector<uint8_t> hx = harden(x);
      CHECK(static_cast<int>(harden_bit(soft_maj(x))) == oracle::maj_floor(hx));
    });
  }
}

TEST_CASE("soft_maj hard-equivalence sampled up to n=64") {
  std::mt19937_64 rng(13);
  for (int it = 0; it < 2000; ++it) {
    std::size_t n = 1 + static_cast<std::size_t>(rng() % 64);
    auto x = oracle::sample_off_threshold(rng, n);
    std::vector<uint8_t> hx = harden(x);
    CHECK(static_cast<int>(harden_bit(soft_maj(x))) == oracle::maj_floor(hx));
  }
}

TEST_CASE("hard_maj thresholds") {
  CHECK(hard_maj(std::vector<uint8_t>{1, 1, 0}));
  CHECK_FALSE(hard_maj(std::vector<uint8_t>{1, 0, 0}));
  CHECK_FALSE(hard_maj(std::vector<uint8_t>{1, 1, 0, 0}));  // tie is not a majority
  // agrees with the floor formula everywhere up to n=10
  for (std::size_t n = 1; n <= 10; ++n) {
    for (std::size_t mask = 0; mask < (std::size_t(1) << n); ++mask) {
      std::vector<uint8_t> bits(n);
      for (std::size_t i = 0; i < n; ++i) bits[i] = (mask >> i) & 1;
      CHECK(static_cast<int>(hard_maj(bits)) == oracle::maj_floor(bits));
    }
  }
}

TEST_CASE("low_high reproduces the reference worked examples") {
  auto a = low_high(vec({0.1, 0.2, 0.9}));
  REQUIRE(a.size() == 4);
  CHECK(a[0] == doctest::Approx(0.1).epsilon(kTol));
  CHECK(a[1] == doctest::Approx(0.2).epsilon(kTol));
  CHECK(a[2] == doctest::Approx(0.8).epsilon(kTol));
  CHECK(a[3] == doctest::Approx(0.1).epsilon(kTol));

  auto b = low_high(vec({0.6, 0.7, 0.9}));
  CHECK(b[0] == doctest::Approx(0.6).epsilon(kTol));
  CHECK(b[1] == doctest::Approx(0.4).epsilon(kTol));
  CHECK(b[2] == doctest::Approx(0.3).epsilon(kTol));
  CHECK(b[3] == doctest::Approx(0.1).epsilon(kTol));

  // all-zeros hardens to high only at the last position
  auto z = harden(low_high(vec({0.0, 0.0, 0.0})));
  CHECK(z == std::vector<uint8_t>{0, 0, 0, 1});
}

TEST_CASE("soft_count_hot matches the worked examples and Prop 6 corners") {
  auto a = soft_count_hot(vec({0.1, 0.9, 0.2}));
  CHECK(a[0] == doctest::Approx(0.1).epsilon(kTol));
  CHECK(a[1] == doctest::Approx(0.2).epsilon(kTol));
  CHECK(a[2] == doctest::Approx(0.8).epsilon(kTol));
  CHECK(a[3] == doctest::Approx(0.1).epsilon(kTol));

  auto b = soft_count_hot(vec({0.6, 0.9, 0.7}));
  CHECK(b[0] == doctest::Approx(0.6).epsilon(kTol));
  CHECK(b[1] == doctest::Approx(0.4).epsilon(kTol));
  CHECK(b[2] == doctest::Approx(0.3).epsilon(kTol));
  CHECK(b[3] == doctest::Approx(0.1).epsilon(kTol));

  for (auto conj : {PairwiseConj::Min, PairwiseConj::MarginPacked}) {
    for (std::size_t n = 1; n <= 10; ++n) {
      oracle::for_each_corner(n, 0.25, 0.75, [&](const std::vector<double>& x) {
        CHECK(harden(soft_count_hot(x, conj)) == oracle::count_hot_ref(harden(x)));
      });
    }
  }
}

TEST_CASE("soft_count selects the exactly-k-low bit") {
  CHECK(harden_bit(soft_count(vec({0.1, 0.9, 0.2}), 2)));
  CHECK(harden_bit(soft_count(vec({1.0, 1.0, 1.0}), 0)));
  CHECK_THROWS_AS((void)soft_count(vec({0.1, 0.9}), 3), std::invalid_argument);

  std::mt19937_64 rng(17);
  for (int it = 0; it < 2000; ++it) {
    std::size_t n = 1 + static_cast<std::size_t>(rng() % 8);
    auto x = oracle::sample_off_threshold(rng, n);
    auto ref = oracle::count_hot_ref(harden(x));
    for (std::size_t k = 0; k <= n; ++k)
      CHECK(static_cast<uint8_t>(harden_bit(soft_count(x, k))) == ref[k]);
  }
}

TEST_CASE("margin-packed conjunction differs from min where the examples say") {
  // the printed vectors in the reference match min, not the packed form
  CHECK(soft_and2(1.0, 0.1) == doctest::Approx(0.32).epsilon(kTol));
  auto packed = low_high(vec({0.1, 0.2, 0.9}), PairwiseConj::MarginPacked);
  CHECK(packed[0] != doctest::Approx(0.1).epsilon(1e-3));
  // and hard-equivalence holds under both conjunctions (checked above)
}

TEST_CASE("range closure over random samples and corners") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
  for (int it = 0; it < 1000000; ++it) {
    double a = u(rng), b = u(rng);
    CHECK(in01(not_xor(a, b)));
    CHECK(in01(soft_and2(a, b)));
    CHECK(in01(soft_or2(a, b)));
    CHECK(in01(soft_implies(a, b)));
  }
  for (std::size_t n : {1u, 2u, 3u, 5u}) {
    oracle::for_each_corner(n, 0.0, 1.0, [&](const std::vector<double>& x) {
      CHECK(in01(soft_maj(x)));
      for (double v : soft_count_hot(x)) CHECK(in01(v));
      CHECK(in01(soft_and(x)));
      CHECK(in01(soft_or(x)));
    });
  }
}

TEST_CASE("appendix truth-table boxes, 100 samples per quadrant") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> lo(0.0, 0.5 - 1e-9);
  std::uniform_real_distribution<double> hi(0.5 + 1e-9, 1.0);
  auto draw = [&](bool high) { return high ? hi(rng) : lo(rng); };
  for (int bx = 0; bx < 2; ++bx)
    for (int by = 0; by < 2; ++by)
      for (int s = 0; s < 100; ++s) {
        double x = draw(bx), y = draw(by);
        CHECK(harden_bit(not_xor(x, y)) == (bx == by));        // Prop 1
        CHECK(harden_bit(soft_and2(x, y)) == (bx && by));      // Prop 3
        CHECK(harden_bit(soft_or2(x, y)) == (bx || by));       // Prop 4
        CHECK(harden_bit(soft_implies(x, y)) == (!bx || by));  // Prop 5
      }
}

TEST_CASE("DNF majority cross-check for n=3") {
  std::mt19937_64 rng(31);
  for (int it = 0; it < 20000; ++it) {
    auto v = oracle::sample_off_threshold(rng, 3);
    CHECK(harden_bit(soft_maj(v)) ==
          harden_bit(oracle::maj3_dnf(v[0], v[1], v[2])));
  }
}

TEST_CASE("gradient richness of margin-packed ops via central differences") {
  std::mt19937_64 rng(37);
  const double h = 1e-6;
  auto partials_nonzero = [&](auto f, const std::vector<double>& x) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      std::vector<double> xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      double d = (f(xp) - f(xm)) / (2 * h);
      CHECK(std::abs(d) > 1e-9);
    }
  };
  for (int it = 0; it < 300; ++it) {
    std::size_t n = 2 + static_cast<std::size_t>(rng() % 5);
    auto x = oracle::sample_off_ties(rng, n);
    partials_nonzero([](const std::vector<double>& v) { return soft_and(v); }, x);
    partials_nonzero([](const std::vector<double>& v) { return soft_or(v); }, x);
    partials_nonzero([](const std::vector<double>& v) { return soft_maj(v); }, x);
  }
}
