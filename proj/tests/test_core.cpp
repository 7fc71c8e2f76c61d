#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>

#include "krcps/core.hpp"
#include "krcps/rng.hpp"

using namespace krcps;

namespace {

IntervalBundle random_bundle(SplitMix64& g, std::size_t d) {
  IntervalBundle b;
  b.lower.resize(d);
  b.upper.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double a = 4.0 * uniform01(g) - 2.0;
    const double w = 2.0 * uniform01(g);
    b.lower[j] = a;
    b.upper[j] = a + w;
  }
  return b;
}

}  // namespace

TEST_CASE("nested_intervals identity and shift") {
  IntervalBundle b{{0.0}, {1.0}};
  auto id = nested_intervals(b, Vec{0.0});
  CHECK(id.lower[0] == 0.0);
  CHECK(id.upper[0] == 1.0);

  IntervalBundle b2{{0.5}, {1.5}};
  auto shifted = nested_intervals(b2, Vec{0.2});
  CHECK_THAT(shifted.lower[0], Catch::Matchers::WithinAbs(0.3, 1e-15));
  CHECK_THAT(shifted.upper[0], Catch::Matchers::WithinAbs(1.7, 1e-15));
}

TEST_CASE("nested_intervals nesting property") {
  SplitMix64 g(123);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t d = 1 + g() % 8;
    IntervalBundle b = random_bundle(g, d);
    Vec lam1(d), lam2(d);
    for (std::size_t j = 0; j < d; ++j) {
      lam1[j] = uniform01(g);
      lam2[j] = lam1[j] + uniform01(g);
    }
    auto i1 = nested_intervals(b, lam1);
    auto i2 = nested_intervals(b, lam2);
    for (std::size_t j = 0; j < d; ++j) {
      CHECK(i2.lower[j] <= i1.lower[j]);
      CHECK(i1.upper[j] <= i2.upper[j]);
    }
  }
}

TEST_CASE("nested_intervals rejects dimension mismatch") {
  IntervalBundle b{{0.0, 0.0}, {1.0, 1.0}};
  CHECK_THROWS_AS(nested_intervals(b, Vec{0.1}), std::invalid_argument);
}

TEST_CASE("mean interval length matches the linear identity") {
  // (1/d) sum (u - l) + (2/d) sum lambda, checked against direct widths.
  SplitMix64 g(77);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t d = 1 + g() % 16;
    IntervalBundle b = random_bundle(g, d);
    Vec lam(d);
    for (auto& v : lam) v = 2.0 * uniform01(g) - 0.2;
    double base = 0.0, lsum = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      base += b.upper[j] - b.lower[j];
      lsum += lam[j];
    }
    const double expected = base / d + 2.0 * lsum / d;
    CHECK_THAT(b.mean_width(lam), Catch::Matchers::WithinRel(expected, 1e-12));
  }
}

TEST_CASE("split_calibration is deterministic and sized correctly") {
  SplitMix64 g(5);
  std::vector<Pair> pairs(10);
  for (std::size_t i = 0; i < pairs.size(); ++i)
    pairs[i] = Pair{Vec{static_cast<double>(i)}, Vec{0.0}};

  auto s1 = split_calibration(pairs, 4, 42);
  auto s2 = split_calibration(pairs, 4, 42);
  REQUIRE(s1.size() == 10);
  CHECK(s1.n_opt() == 4);
  CHECK(s1.n_rcps() == 6);
  for (std::size_t i = 0; i < 10; ++i)
    CHECK(s1.all()[i].x[0] == s2.all()[i].x[0]);

  auto s3 = split_calibration(pairs, 4, 43);
  bool same = true;
  for (std::size_t i = 0; i < 10; ++i)
    same = same && s1.all()[i].x[0] == s3.all()[i].x[0];
  CHECK_FALSE(same);
}

TEST_CASE("split_calibration records a permutation of the input") {
  std::vector<Pair> pairs(17);
  for (std::size_t i = 0; i < pairs.size(); ++i)
    pairs[i] = Pair{Vec{static_cast<double>(i)}, Vec{static_cast<double>(i)}};
  auto split = split_calibration(pairs, 5, 99);
  auto perm = split.permutation();
  for (std::size_t i = 0; i < perm.size(); ++i)
    CHECK(split.all()[i].x[0] == static_cast<double>(perm[i]));
  std::sort(perm.begin(), perm.end());
  for (std::size_t i = 0; i < perm.size(); ++i) CHECK(perm[i] == i);
}

TEST_CASE("split_calibration paper sizes: 640 with n_opt 256") {
  std::vector<Pair> pairs(640, Pair{Vec{0.0}, Vec{0.0}});
  auto split = split_calibration(pairs, 256, 1);
  CHECK(split.n_rcps() == 384);
}

TEST_CASE("split_calibration rejects out-of-range n_opt") {
  std::vector<Pair> pairs(4, Pair{Vec{0.0}, Vec{0.0}});
  CHECK_THROWS_AS(split_calibration(pairs, 0, 7), std::invalid_argument);
  CHECK_THROWS_AS(split_calibration(pairs, 4, 7), std::invalid_argument);
}

TEST_CASE("membership expand applies group values per feature") {
  Membership m;
  m.group = {1, 0, 1, 0};
  m.sizes = {2, 2};
  m.validate();
  const Vec out = m.expand(Vec{0.5, 2.0});
  CHECK(out == Vec{2.0, 0.5, 2.0, 0.5});
}

TEST_CASE("default gamma grid endpoints and step") {
  const Vec grid = default_gamma_grid();
  REQUIRE(grid.size() == 16);
  CHECK(grid.front() == 0.3);
  CHECK_THAT(grid.back(), Catch::Matchers::WithinAbs(0.7, 1e-15));
  for (std::size_t i = 1; i < grid.size(); ++i)
    CHECK_THAT(grid[i] - grid[i - 1],
               Catch::Matchers::WithinAbs(0.4 / 15.0, 1e-15));
}

TEST_CASE("pairwise sum matches plain accumulation") {
  SplitMix64 g(9);
  Vec v(1000);
  for (auto& x : v) x = normal01(g);
  long double plain = 0.0;
  for (double x : v) plain += x;
  CHECK_THAT(detail::pairwise_sum(v),
             Catch::Matchers::WithinAbs(static_cast<double>(plain), 1e-10));
}
