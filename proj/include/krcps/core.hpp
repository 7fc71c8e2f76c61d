#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "krcps/rng.hpp"

namespace krcps {

using Vec = std::vector<double>;

// Raised when a requested risk level cannot be certified (e.g. the UCB
// already exceeds epsilon at the top of the sweep, or (P_K) has no feasible
// point in its box).
struct InfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised on numeric breakdown (non-finite state, solver divergence).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// Pairwise (cascade) summation: deterministic and accurate regardless of
// how callers batch their work.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 32) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

}  // namespace detail

// One calibration pair: ground truth x and observation y, both length d.
struct Pair {
  Vec x;
  Vec y;
};

// Per-feature interval endpoints.  width(lambda)_j = u_j - l_j + 2*lambda_j,
// center_j = (u_j + l_j) / 2.
struct IntervalBundle {
  Vec lower;
  Vec upper;

  std::size_t dim() const { return lower.size(); }

  void validate() const {
    detail::require(!lower.empty(), "IntervalBundle: empty");
    detail::require(lower.size() == upper.size(),
                    "IntervalBundle: lower/upper size mismatch");
    detail::require(detail::all_finite(lower) && detail::all_finite(upper),
                    "IntervalBundle: non-finite endpoint");
    for (std::size_t j = 0; j < lower.size(); ++j)
      detail::require(lower[j] <= upper[j],
                      "IntervalBundle: lower > upper at feature " +
                          std::to_string(j));
  }

  Vec widths(std::span<const double> lambda) const {
    detail::require(lambda.size() == dim(), "widths: lambda dim mismatch");
    Vec w(dim());
    for (std::size_t j = 0; j < dim(); ++j)
      w[j] = upper[j] - lower[j] + 2.0 * lambda[j];
    return w;
  }

  Vec centers() const {
    Vec c(dim());
    for (std::size_t j = 0; j < dim(); ++j)
      c[j] = 0.5 * (upper[j] + lower[j]);
    return c;
  }

  double mean_width(std::span<const double> lambda) const {
    const Vec w = widths(lambda);
    return detail::pairwise_sum(w) / static_cast<double>(dim());
  }
};

// Nested interval family of Eq.-style additive parametrization:
// [l_j - lambda_j, u_j + lambda_j].  Returned as a bundle so results
// compose; membership tests use closed endpoints.
inline IntervalBundle nested_intervals(const IntervalBundle& bundle,
                                       std::span<const double> lambda) {
  detail::require(lambda.size() == bundle.dim(),
                  "nested_intervals: lambda dim mismatch");
  IntervalBundle out;
  out.lower.resize(bundle.dim());
  out.upper.resize(bundle.dim());
  for (std::size_t j = 0; j < bundle.dim(); ++j) {
    out.lower[j] = bundle.lower[j] - lambda[j];
    out.upper[j] = bundle.upper[j] + lambda[j];
  }
  return out;
}

inline bool interval_contains(const IntervalBundle& intervals, std::size_t j,
                              double x) {
  return x >= intervals.lower[j] && x <= intervals.upper[j];
}

// One-hot d x K feature-to-group assignment, stored compressed as the group
// index of each feature (each row of the logical matrix sums to 1 by
// construction) plus the group sizes n_k.
struct Membership {
  std::vector<int> group;          // group[j] in [0, K)
  std::vector<std::size_t> sizes;  // n_k, sum == d

  std::size_t dim() const { return group.size(); }
  std::size_t num_groups() const { return sizes.size(); }

  void validate() const {
    detail::require(!group.empty() && !sizes.empty(), "Membership: empty");
    std::vector<std::size_t> counted(sizes.size(), 0);
    for (int g : group) {
      detail::require(g >= 0 && static_cast<std::size_t>(g) < sizes.size(),
                      "Membership: group index out of range");
      ++counted[static_cast<std::size_t>(g)];
    }
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      detail::require(counted[k] == sizes[k], "Membership: size mismatch");
      detail::require(sizes[k] >= 1, "Membership: empty group");
    }
  }

  // M * lambda_K: expand a per-group vector to a per-feature vector.
  Vec expand(std::span<const double> lambda_k) const {
    detail::require(lambda_k.size() == sizes.size(),
                    "Membership::expand: K mismatch");
    Vec out(group.size());
    for (std::size_t j = 0; j < group.size(); ++j)
      out[j] = lambda_k[static_cast<std::size_t>(group[j])];
    return out;
  }
};

enum class UcbKind { hoeffding, bentkus, hybrid, hybrid_split };

inline std::string to_string(UcbKind k) {
  switch (k) {
    case UcbKind::hoeffding: return "hoeffding";
    case UcbKind::bentkus: return "bentkus";
    case UcbKind::hybrid: return "hybrid";
    case UcbKind::hybrid_split: return "hybrid-split";
  }
  return "?";
}

inline UcbKind ucb_kind_from_string(const std::string& s) {
  if (s == "hoeffding") return UcbKind::hoeffding;
  if (s == "bentkus") return UcbKind::bentkus;
  if (s == "hybrid") return UcbKind::hybrid;
  if (s == "hybrid-split") return UcbKind::hybrid_split;
  throw std::invalid_argument("unknown UCB kind: " + s);
}

// Knobs shared by every calibration procedure.
struct RiskSpec {
  double epsilon = 0.1;             // risk level
  double delta = 0.1;               // failure probability
  double alpha = 0.1;               // entrywise miscoverage for quantiles
  Vec gamma_grid;                   // empty -> default_gamma_grid()
  std::size_t K = 1;                // number of lambda groups
  std::size_t d_opt = 0;            // feature subsample for (P_K); 0 -> all
  double beta_max = 1.0;            // top of the beta sweep
  double d_beta = 0.01;             // sweep stepsize
  UcbKind ucb_kind = UcbKind::hybrid_split;
  std::uint64_t seed = 0;

  void validate() const {
    detail::require(epsilon >= 0.0, "RiskSpec: epsilon < 0");
    detail::require(delta >= 0.0 && delta <= 1.0, "RiskSpec: delta not in [0,1]");
    detail::require(alpha >= 0.0 && alpha <= 1.0, "RiskSpec: alpha not in [0,1]");
    detail::require(d_beta > 0.0, "RiskSpec: d_beta must be > 0");
    detail::require(beta_max > 0.0, "RiskSpec: beta_max must be > 0");
    detail::require(K >= 1, "RiskSpec: K must be >= 1");
    for (double g : gamma_grid)
      detail::require(g >= 0.0 && g < 1.0, "RiskSpec: gamma outside [0,1)");
  }

  Vec effective_gamma_grid() const;
};

// 16 values equally spaced in [0.3, 0.7].
inline Vec default_gamma_grid() {
  Vec grid(16);
  for (std::size_t i = 0; i < grid.size(); ++i)
    grid[i] = 0.3 + static_cast<double>(i) * (0.4 / 15.0);
  return grid;
}

inline Vec RiskSpec::effective_gamma_grid() const {
  return gamma_grid.empty() ? default_gamma_grid() : gamma_grid;
}

// Calibration pairs after the seeded S_opt / S_RCPS split.  `pairs` holds
// the shuffled order; `permutation[i]` is the original index of pairs[i],
// so the split is a recorded permutation of the input.
class CalibrationSet {
 public:
  CalibrationSet(std::vector<Pair> pairs, std::size_t n_opt,
                 std::vector<std::size_t> permutation)
      : pairs_(std::move(pairs)),
        n_opt_(n_opt),
        permutation_(std::move(permutation)) {
    detail::require(!pairs_.empty(), "CalibrationSet: no pairs");
    detail::require(n_opt_ < pairs_.size(),
                    "CalibrationSet: n_opt must leave S_RCPS nonempty");
    detail::require(permutation_.size() == pairs_.size(),
                    "CalibrationSet: bad permutation");
    const std::size_t d = pairs_.front().x.size();
    detail::require(d >= 1, "CalibrationSet: zero-dimensional pairs");
    for (const Pair& p : pairs_)
      detail::require(p.x.size() == d && p.y.size() == d,
                      "CalibrationSet: inconsistent dimensions");
  }

  std::size_t size() const { return pairs_.size(); }
  std::size_t dim() const { return pairs_.front().x.size(); }
  std::size_t n_opt() const { return n_opt_; }
  std::size_t n_rcps() const { return pairs_.size() - n_opt_; }

  std::span<const Pair> s_opt() const {
    return std::span<const Pair>(pairs_).subspan(0, n_opt_);
  }
  std::span<const Pair> s_rcps() const {
    return std::span<const Pair>(pairs_).subspan(n_opt_);
  }
  std::span<const Pair> all() const { return pairs_; }
  const std::vector<std::size_t>& permutation() const { return permutation_; }

 private:
  std::vector<Pair> pairs_;
  std::size_t n_opt_;
  std::vector<std::size_t> permutation_;
};

// Deterministic shuffle under `seed`, first n_opt pairs form S_opt.
inline CalibrationSet split_calibration(const std::vector<Pair>& pairs,
                                        std::size_t n_opt,
                                        std::uint64_t seed) {
  detail::require(n_opt >= 1 && n_opt < pairs.size(),
                  "split_calibration: need 1 <= n_opt < n");
  SplitMix64 g = stream_for(seed, 0x5011Full);
  std::vector<std::size_t> perm = random_permutation(pairs.size(), g);
  std::vector<Pair> shuffled;
  shuffled.reserve(pairs.size());
  for (std::size_t i : perm) shuffled.push_back(pairs[i]);
  return CalibrationSet(std::move(shuffled), n_opt, std::move(perm));
}

inline Vec clamp_nonnegative(Vec v) {
  for (double& x : v) x = std::max(0.0, x);
  return v;
}

}  // namespace krcps
