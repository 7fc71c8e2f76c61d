#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "krcps/core.hpp"

namespace krcps {

namespace detail {

// log(i!) table, grown on demand.
inline double log_factorial(std::size_t i) {
  thread_local std::vector<double> table{0.0, 0.0};
  while (table.size() <= i)
    table.push_back(table.back() + std::log(static_cast<double>(table.size())));
  return table[i];
}

inline double log_binom_coeff(std::size_t n, std::size_t k) {
  return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

// log P[Bin(n, p) <= k], accumulated with log-sum-exp.
inline double log_binom_cdf(std::size_t k, std::size_t n, double p) {
  if (p <= 0.0) return 0.0;  // mass entirely at 0 <= k
  if (p >= 1.0) return k >= n ? 0.0 : -std::numeric_limits<double>::infinity();
  const double logp = std::log(p);
  const double log1mp = std::log1p(-p);
  double acc = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i <= k; ++i) {
    const double term = log_binom_coeff(n, i) +
                        static_cast<double>(i) * logp +
                        static_cast<double>(n - i) * log1mp;
    if (term > acc)
      acc = term + std::log1p(std::exp(acc - term));
    else
      acc = acc + std::log1p(std::exp(term - acc));
  }
  return std::min(acc, 0.0);
}

inline void check_ucb_args(std::size_t n, double delta, double rhat) {
  require(n >= 1, "ucb: n must be >= 1");
  require(delta > 0.0 && delta <= 1.0, "ucb: delta must be in (0,1]");
  require(rhat >= 0.0 && rhat <= 1.0, "ucb: rhat must be in [0,1]");
}

}  // namespace detail

// Hoeffding: rhat + sqrt(log(1/delta) / (2n)); may exceed 1 (not clamped).
inline double hoeffding_ucb(std::size_t n, double delta, double rhat) {
  detail::check_ucb_args(n, delta, rhat);
  return rhat + std::sqrt(std::log(1.0 / delta) /
                          (2.0 * static_cast<double>(n)));
}

// Bentkus-style bound via binomial tail inversion: the smallest R in [0,1]
// with P[Bin(n, R) <= ceil(n * rhat)] <= delta / e, found by bisection on
// the exact log-space CDF.
inline double bentkus_ucb(std::size_t n, double delta, double rhat) {
  detail::check_ucb_args(n, delta, rhat);
  const std::size_t k =
      static_cast<std::size_t>(std::ceil(static_cast<double>(n) * rhat));
  if (k >= n) return 1.0;  // CDF at k = n is 1; no R < 1 satisfies the tail
  const double log_target = std::log(delta) - 1.0;
  double lo = rhat;
  double hi = 1.0;
  if (detail::log_binom_cdf(k, n, lo) <= log_target) return lo;
  while (hi - lo > 1e-9) {
    const double mid = 0.5 * (lo + hi);
    if (detail::log_binom_cdf(k, n, mid) <= log_target)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

// Pointwise min of the two bounds, both at the full delta.  Not valid in
// general as a (1-delta) bound; kept for study.  Use hybrid_split_ucb for a
// provably valid hybrid.
inline double hybrid_ucb(std::size_t n, double delta, double rhat) {
  return std::min(hoeffding_ucb(n, delta, rhat), bentkus_ucb(n, delta, rhat));
}

// Bonferroni hybrid: each branch at delta/2, so the min is a valid
// (1-delta) bound.
inline double hybrid_split_ucb(std::size_t n, double delta, double rhat) {
  return std::min(hoeffding_ucb(n, 0.5 * delta, rhat),
                  bentkus_ucb(n, 0.5 * delta, rhat));
}

inline double eval_ucb(UcbKind kind, std::size_t n, double delta,
                       double rhat) {
  switch (kind) {
    case UcbKind::hoeffding: return hoeffding_ucb(n, delta, rhat);
    case UcbKind::bentkus: return bentkus_ucb(n, delta, rhat);
    case UcbKind::hybrid: return hybrid_ucb(n, delta, rhat);
    case UcbKind::hybrid_split: return hybrid_split_ucb(n, delta, rhat);
  }
  throw std::invalid_argument("eval_ucb: bad kind");
}

}  // namespace krcps
