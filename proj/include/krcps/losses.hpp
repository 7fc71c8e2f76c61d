#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "krcps/core.hpp"

namespace krcps {

// Parameters of the convex surrogate.  q = gamma / (1 - gamma); the width
// floor replaces I(lambda)_j in the denominator when the interval is
// degenerate, so zero-width bundles stay finite.
struct GammaParams {
  double gamma = 0.5;
  double width_floor = 1e-9;

  double q() const { return gamma / (1.0 - gamma); }

  void validate() const {
    detail::require(gamma >= 0.0 && gamma < 1.0,
                    "GammaParams: gamma must be in [0,1)");
    detail::require(width_floor > 0.0, "GammaParams: width_floor must be > 0");
  }
};

// Fraction of coordinates outside their (closed) intervals:
// (1/d) * #{ j : x_j not in [l_j - lambda_j, u_j + lambda_j] }.
inline double loss01(std::span<const double> x, const IntervalBundle& bundle,
                     std::span<const double> lambda) {
  const std::size_t d = bundle.dim();
  detail::require(x.size() == d && lambda.size() == d,
                  "loss01: dimension mismatch");
  std::size_t outside = 0;
  for (std::size_t j = 0; j < d; ++j) {
    if (x[j] < bundle.lower[j] - lambda[j] ||
        x[j] > bundle.upper[j] + lambda[j])
      ++outside;
  }
  return static_cast<double>(outside) / static_cast<double>(d);
}

// Convex upper bound on loss01, valid (and convex) for lambda >= 0:
// (1/d) * sum_j [ 2(1+q)/I(lambda)_j * |x_j - c_j| - q ]_+ .
inline double loss_gamma(std::span<const double> x,
                         const IntervalBundle& bundle,
                         std::span<const double> lambda,
                         const GammaParams& params) {
  const std::size_t d = bundle.dim();
  detail::require(x.size() == d && lambda.size() == d,
                  "loss_gamma: dimension mismatch");
  params.validate();
  const double q = params.q();
  double acc = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    detail::require(lambda[j] >= 0.0, "loss_gamma: negative lambda entry");
    const double width = bundle.upper[j] - bundle.lower[j] + 2.0 * lambda[j];
    const double denom = std::max(width, params.width_floor);
    const double center = 0.5 * (bundle.upper[j] + bundle.lower[j]);
    const double term = 2.0 * (1.0 + q) / denom * std::abs(x[j] - center) - q;
    acc += std::max(0.0, term);
  }
  return acc / static_cast<double>(d);
}

// Quantile (pinball) loss at level alpha.
inline double pinball_loss(double x, double qhat, double alpha) {
  detail::require(alpha >= 0.0 && alpha <= 1.0,
                  "pinball_loss: alpha must be in [0,1]");
  return x > qhat ? alpha * (x - qhat) : (1.0 - alpha) * (qhat - x);
}

// Empirical risk of loss01 over a set of pairs (pairwise-summed).
inline double empirical_risk01(std::span<const Pair> pairs,
                               const IntervalBundle& bundle,
                               std::span<const double> lambda) {
  detail::require(!pairs.empty(), "empirical_risk01: empty set");
  const std::size_t d = bundle.dim();
  detail::require(lambda.size() == d, "empirical_risk01: lambda mismatch");
  Vec lo(d), hi(d);
  for (std::size_t j = 0; j < d; ++j) {
    lo[j] = bundle.lower[j] - lambda[j];
    hi[j] = bundle.upper[j] + lambda[j];
  }
  Vec per_pair(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Vec& x = pairs[i].x;
    detail::require(x.size() == d, "empirical_risk01: pair dim mismatch");
    std::size_t outside = 0;
    for (std::size_t j = 0; j < d; ++j)
      if (x[j] < lo[j] || x[j] > hi[j]) ++outside;
    per_pair[i] = static_cast<double>(outside) / static_cast<double>(d);
  }
  return detail::pairwise_sum(per_pair) / static_cast<double>(pairs.size());
}

// Empirical risk of the surrogate over a set of pairs.
inline double empirical_risk_gamma(std::span<const Pair> pairs,
                                   const IntervalBundle& bundle,
                                   std::span<const double> lambda,
                                   const GammaParams& params) {
  detail::require(!pairs.empty(), "empirical_risk_gamma: empty set");
  Vec per_pair(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i)
    per_pair[i] = loss_gamma(pairs[i].x, bundle, lambda, params);
  return detail::pairwise_sum(per_pair) / static_cast<double>(pairs.size());
}

}  // namespace krcps
