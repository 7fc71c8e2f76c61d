#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "krcps/core.hpp"
#include "krcps/losses.hpp"
#include "krcps/rcps.hpp"
#include "krcps/solver.hpp"

namespace krcps {

// Group features by the empirical quantile of their entrywise loss01 rate
// at lambda = 0 over S_opt.  Feature with rank r (0-based, ties split by
// index) lands in bin floor(K * r / d), so bins are the [(k-1)/K, k/K)
// quantile ranges with the last bin closed and every bin nonempty.
inline Membership build_membership(std::span<const Pair> s_opt,
                                   const IntervalBundle& bundle,
                                   std::size_t K) {
  bundle.validate();
  detail::require(K >= 1, "build_membership: K must be >= 1");
  detail::require(!s_opt.empty(), "build_membership: empty S_opt");
  const std::size_t d = bundle.dim();
  detail::require(K <= d, "build_membership: K must be <= d");

  Vec risk(d, 0.0);
  for (const Pair& p : s_opt) {
    detail::require(p.x.size() == d, "build_membership: pair dim mismatch");
    for (std::size_t j = 0; j < d; ++j)
      if (p.x[j] < bundle.lower[j] || p.x[j] > bundle.upper[j]) risk[j] += 1.0;
  }
  for (double& r : risk) r /= static_cast<double>(s_opt.size());

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return risk[a] < risk[b]; });

  Membership m;
  m.group.resize(d);
  m.sizes.assign(K, 0);
  for (std::size_t rank = 0; rank < d; ++rank) {
    const auto k = static_cast<std::size_t>((K * rank) / d);
    m.group[order[rank]] = static_cast<int>(k);
    ++m.sizes[k];
  }
  m.validate();
  return m;
}

// Everything the K-RCPS run decided, for reporting and tests.
struct KrcpsReport {
  Membership membership;
  double gamma_star = 0.0;
  Vec lambda_groups;  // solution of (P_K), length K
  double beta_hat = 0.0;
  SweepTrace trace;
};

// Algorithm: split discipline is structural (membership and (P_K) only see
// S_opt; the beta sweep only sees S_RCPS).  Returns
// [M lambda_K + beta_hat * 1]_+, which has at most K distinct nonnegative
// values.
inline Vec k_rcps(const CalibrationSet& calib, const IntervalBundle& bundle,
                  const RiskSpec& spec, KrcpsReport* report = nullptr) {
  spec.validate();
  bundle.validate();
  detail::require(calib.dim() == bundle.dim(), "k_rcps: dimension mismatch");
  const std::size_t d = bundle.dim();

  const Membership membership = build_membership(calib.s_opt(), bundle, spec.K);
  const auto [gamma_star, lambda_groups] =
      gamma_search(calib.s_opt(), bundle, membership, spec);

  const Vec offset = membership.expand(lambda_groups);
  const Vec ones(d, 1.0);
  SweepTrace trace;
  const double beta_hat =
      rcps_scalar(calib.s_rcps(), bundle, ones, offset, spec, &trace);

  Vec lambda_hat(d);
  for (std::size_t j = 0; j < d; ++j)
    lambda_hat[j] = std::max(0.0, offset[j] + beta_hat);

  if (report) {
    report->membership = membership;
    report->gamma_star = gamma_star;
    report->lambda_groups = lambda_groups;
    report->beta_hat = beta_hat;
    report->trace = std::move(trace);
  }
  return lambda_hat;
}

// The conformalized uncertainty map: nested_intervals under the chosen
// lambda.  Metadata export lives in io.hpp.
inline IntervalBundle conformalize(const IntervalBundle& bundle,
                                   std::span<const double> lambda_hat) {
  return nested_intervals(bundle, lambda_hat);
}

}  // namespace krcps
