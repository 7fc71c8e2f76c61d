#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "krcps/losses.hpp"
#include "krcps/rng.hpp"

using namespace krcps;

namespace {

struct RandomConfig {
  IntervalBundle bundle;
  Vec x;
  Vec lambda;
};

// Widths stay well away from the floor so the surrogate's guard never
// perturbs the comparison.
RandomConfig draw_config(SplitMix64& g, std::size_t d) {
  RandomConfig c;
  c.bundle.lower.resize(d);
  c.bundle.upper.resize(d);
  c.x.resize(d);
  c.lambda.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double a = 4.0 * uniform01(g) - 2.0;
    c.bundle.lower[j] = a;
    c.bundle.upper[j] = a + 1e-6 + 2.0 * uniform01(g);
    c.x[j] = 6.0 * uniform01(g) - 3.0;
    c.lambda[j] = 1.5 * uniform01(g);
  }
  return c;
}

}  // namespace

TEST_CASE("loss01 counting and closed endpoints") {
  IntervalBundle b{{0.0, 0.0, 0.0, 0.0}, {1.0, 1.0, 1.0, 1.0}};
  const Vec zero(4, 0.0);
  CHECK(loss01(Vec{0.5, 0.2, 0.9, 0.1}, b, zero) == 0.0);
  CHECK(loss01(Vec{0.5, 0.2, 0.9, 1.5}, b, zero) == 0.25);
  // a point exactly at u_j + lambda_j counts as covered
  CHECK(loss01(Vec{1.0, 0.5, 0.5, 0.5}, b, zero) == 0.0);
  const Vec lam{0.25, 0.0, 0.0, 0.0};
  CHECK(loss01(Vec{1.25, 0.5, 0.5, 0.5}, b, lam) == 0.0);
}

TEST_CASE("loss_gamma frozen examples") {
  IntervalBundle b{{0.5}, {1.5}};
  const Vec zero{0.0};
  GammaParams p;
  // at the center the loss is [-q]_+ = 0
  for (double gamma : {0.0, 0.3, 0.7, 0.9}) {
    p.gamma = gamma;
    CHECK(loss_gamma(Vec{1.0}, b, zero, p) == 0.0);
  }
  // at the interval endpoint the loss is exactly 1 for every gamma
  for (double gamma : {0.0, 0.25, 0.5, 0.75}) {
    p.gamma = gamma;
    CHECK_THAT(loss_gamma(Vec{1.5}, b, zero, p),
               Catch::Matchers::WithinAbs(1.0, 1e-12));
  }
  // direct evaluation: gamma = 0.5 (q = 1), x = 1.6 -> 2*2*0.6/1 - 1 = 1.4
  p.gamma = 0.5;
  CHECK_THAT(loss_gamma(Vec{1.6}, b, zero, p),
             Catch::Matchers::WithinAbs(1.4, 1e-12));
}

TEST_CASE("loss_gamma rejects negative lambda and bad dims") {
  IntervalBundle b{{0.0}, {1.0}};
  GammaParams p;
  CHECK_THROWS_AS(loss_gamma(Vec{0.5}, b, Vec{-0.1}, p),
                  std::invalid_argument);
  CHECK_THROWS_AS(loss_gamma(Vec{0.5, 0.5}, b, Vec{0.0}, p),
                  std::invalid_argument);
}

TEST_CASE("gamma=0 retrieves the scaled L1 loss exactly") {
  SplitMix64 g(31);
  GammaParams p;
  p.gamma = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t d = 1 + g() % 6;
    auto c = draw_config(g, d);
    double expected = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double width =
          c.bundle.upper[j] - c.bundle.lower[j] + 2.0 * c.lambda[j];
      const double center = 0.5 * (c.bundle.upper[j] + c.bundle.lower[j]);
      expected += 2.0 * std::abs(c.x[j] - center) / width;
    }
    expected /= static_cast<double>(d);
    CHECK_THAT(loss_gamma(c.x, c.bundle, c.lambda, p),
               Catch::Matchers::WithinRel(expected, 1e-12));
  }
}

TEST_CASE("surrogate dominates loss01 on 1e5 random configurations") {
  SplitMix64 g(12345);
  GammaParams p;
  std::size_t violations = 0;
  for (int rep = 0; rep < 100000; ++rep) {
    const std::size_t d = 1 + g() % 4;
    auto c = draw_config(g, d);
    p.gamma = 0.95 * uniform01(g);
    const double lg = loss_gamma(c.x, c.bundle, c.lambda, p);
    const double l0 = loss01(c.x, c.bundle, c.lambda);
    if (lg < l0 - 1e-12) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("surrogate is convex in lambda (chord test, 1e4 draws)") {
  SplitMix64 g(54321);
  GammaParams p;
  std::size_t violations = 0;
  for (int rep = 0; rep < 10000; ++rep) {
    const std::size_t d = 1 + g() % 4;
    auto c = draw_config(g, d);
    p.gamma = 0.95 * uniform01(g);
    Vec la(d), lb(d), mid(d);
    const double t = uniform01(g);
    for (std::size_t j = 0; j < d; ++j) {
      la[j] = 2.0 * uniform01(g);
      lb[j] = 2.0 * uniform01(g);
      mid[j] = t * la[j] + (1.0 - t) * lb[j];
    }
    const double fmid = loss_gamma(c.x, c.bundle, mid, p);
    const double chord = t * loss_gamma(c.x, c.bundle, la, p) +
                         (1.0 - t) * loss_gamma(c.x, c.bundle, lb, p);
    if (fmid > chord + 1e-10) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("both losses are entrywise monotonically nonincreasing") {
  SplitMix64 g(111);
  GammaParams p;
  for (int rep = 0; rep < 2000; ++rep) {
    const std::size_t d = 1 + g() % 5;
    auto c = draw_config(g, d);
    p.gamma = 0.9 * uniform01(g);
    Vec larger = c.lambda;
    const std::size_t j = g() % d;
    larger[j] += 0.5 + uniform01(g);
    CHECK(loss01(c.x, c.bundle, larger) <= loss01(c.x, c.bundle, c.lambda));
    CHECK(loss_gamma(c.x, c.bundle, larger, p) <=
          loss_gamma(c.x, c.bundle, c.lambda, p) + 1e-12);
  }
}

TEST_CASE("degenerate zero-width interval stays finite via the floor") {
  IntervalBundle b{{1.0}, {1.0}};
  GammaParams p;
  p.gamma = 0.5;
  CHECK(std::isfinite(loss_gamma(Vec{1.0}, b, Vec{0.0}, p)));
  CHECK(std::isfinite(loss_gamma(Vec{1.1}, b, Vec{0.0}, p)));
  CHECK(loss01(Vec{1.0}, b, Vec{0.0}) == 0.0);  // closed endpoint
  CHECK(loss01(Vec{1.1}, b, Vec{0.0}) == 1.0);
}

TEST_CASE("pinball loss examples") {
  CHECK(pinball_loss(1.0, 1.0, 0.3) == 0.0);
  CHECK_THAT(pinball_loss(2.0, 1.0, 0.9), Catch::Matchers::WithinAbs(0.9, 1e-15));
  CHECK_THAT(pinball_loss(0.0, 1.0, 0.1), Catch::Matchers::WithinAbs(0.9, 1e-15));
  CHECK_THROWS_AS(pinball_loss(0.0, 1.0, 1.5), std::invalid_argument);
}
