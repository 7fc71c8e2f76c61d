#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "krcps/bounds.hpp"
#include "krcps/core.hpp"
#include "krcps/losses.hpp"

namespace krcps {

// One sweep step: the grid value, the clamped lambda's empirical risk on
// S_RCPS, and its UCB.
struct SweepStep {
  double beta;
  double rhat;
  double rplus;
};

using SweepTrace = std::vector<SweepStep>;

// Scalar RCPS sweep along the line { [offset + beta * eta]_+ }, beta from
// beta_max downward in steps of d_beta.  Evaluates the loss01 UCB on the
// given pairs at each grid point and returns the last grid value before the
// UCB first meets or exceeds epsilon.  The top of the grid itself is never
// evaluated (the loop decrements before evaluating), so a violation at the
// first evaluated point means nothing was certified and the sweep fails.
//
// The sweep stops without evaluating once the clamped lambda becomes
// identically zero or stops changing (the clamp has frozen every
// coordinate); nothing below that point tests a new predictor.  With
// offset = 0 and eta = 1 this is the plain RCPS procedure on a [0,
// beta_max] grid.
inline double rcps_scalar(std::span<const Pair> pairs,
                          const IntervalBundle& bundle,
                          std::span<const double> eta,
                          std::span<const double> offset,
                          const RiskSpec& spec, SweepTrace* trace = nullptr) {
  spec.validate();
  bundle.validate();
  const std::size_t d = bundle.dim();
  detail::require(!pairs.empty(), "rcps_scalar: empty S_RCPS");
  detail::require(eta.size() == d && offset.size() == d,
                  "rcps_scalar: dimension mismatch");
  detail::require(detail::all_finite(eta) && detail::all_finite(offset),
                  "rcps_scalar: non-finite direction/offset");
  for (double e : eta)
    detail::require(e >= 0.0, "rcps_scalar: eta must be entrywise >= 0");

  const std::size_t n = pairs.size();
  auto lambda_at = [&](double beta) {
    Vec lam(d);
    for (std::size_t j = 0; j < d; ++j)
      lam[j] = std::max(0.0, offset[j] + beta * eta[j]);
    return lam;
  };
  auto all_zero = [](const Vec& v) {
    for (double x : v)
      if (x != 0.0) return false;
    return true;
  };

  Vec lambda_prev = lambda_at(spec.beta_max);
  double beta = spec.beta_max;
  double beta_certified = 0.0;
  bool certified = false;
  while (true) {
    beta -= spec.d_beta;
    Vec lambda = lambda_at(beta);
    if (all_zero(lambda) || lambda == lambda_prev) {
      if (certified) return beta_certified;
      throw InfeasibleError(
          "rcps_scalar: sweep grid exhausted before any point was certified");
    }
    const double rhat = empirical_risk01(pairs, bundle, lambda);
    const double rplus = eval_ucb(spec.ucb_kind, n, spec.delta, rhat);
    if (trace) trace->push_back({beta, rhat, rplus});
    if (rplus >= spec.epsilon) {
      if (!certified)
        throw InfeasibleError(
            "rcps_scalar: cannot control risk at this level (UCB >= epsilon "
            "at the top of the sweep)");
      return beta_certified;
    }
    certified = true;
    beta_certified = beta;
    lambda_prev = std::move(lambda);
  }
}

// Plain RCPS: offset 0, direction 1.
inline double rcps_scalar(std::span<const Pair> pairs,
                          const IntervalBundle& bundle, const RiskSpec& spec,
                          SweepTrace* trace = nullptr) {
  const Vec ones(bundle.dim(), 1.0);
  const Vec zeros(bundle.dim(), 0.0);
  return rcps_scalar(pairs, bundle, ones, zeros, spec, trace);
}

}  // namespace krcps
