#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "krcps/core.hpp"
#include "krcps/losses.hpp"
#include "krcps/rng.hpp"

namespace krcps {

// Subsampled, precomputed (P_K) data: minimize sum_k n_k lambda_k subject
// to the empirical surrogate risk over S_opt staying <= epsilon.  Per
// feature we keep |x_j - c_j| sorted with suffix sums, so one constraint
// evaluation costs O(d_opt log n_opt).
class PkInstance {
 public:
  std::vector<std::size_t> features;   // subsampled feature ids
  std::vector<int> feature_group;      // group of each subsampled feature
  Vec base_width;                      // u_j - l_j per subsampled feature
  std::vector<Vec> abs_dev;            // ascending |x_ij - c_j| per feature
  std::vector<Vec> abs_dev_suffix;     // suffix[i] = sum of abs_dev[i..]
  Vec group_weight;                    // full-group sizes n_k
  double epsilon = 0.0;
  double gamma = 0.0;
  double width_floor = 1e-9;
  double lambda_box = 0.0;             // search box [0, lambda_box]^K
  std::size_t n_pairs = 0;

  std::size_t num_groups() const { return group_weight.size(); }
  std::size_t d_opt() const { return features.size(); }

  double q() const { return gamma / (1.0 - gamma); }

  // R-hat^gamma(M lambda) on the subsampled features.
  double surrogate_risk(std::span<const double> lambda_k) const {
    const double qv = q();
    double acc = 0.0;
    for (std::size_t f = 0; f < features.size(); ++f) {
      const double lam = lambda_k[static_cast<std::size_t>(feature_group[f])];
      const double width = std::max(base_width[f] + 2.0 * lam, width_floor);
      // term > 0  <=>  a > q * width / (2 (1 + q))
      const double threshold = qv * width / (2.0 * (1.0 + qv));
      const Vec& a = abs_dev[f];
      const auto it = std::upper_bound(a.begin(), a.end(), threshold);
      const auto idx = static_cast<std::size_t>(it - a.begin());
      const double count = static_cast<double>(a.size() - idx);
      const double sum = abs_dev_suffix[f][idx];
      acc += 2.0 * (1.0 + qv) / width * sum - qv * count;
    }
    return acc / (static_cast<double>(n_pairs) *
                  static_cast<double>(features.size()));
  }

  // d/d lambda_k of surrogate_risk; zero where the width floor binds.
  Vec surrogate_gradient(std::span<const double> lambda_k) const {
    const double qv = q();
    Vec grad(num_groups(), 0.0);
    for (std::size_t f = 0; f < features.size(); ++f) {
      const auto k = static_cast<std::size_t>(feature_group[f]);
      const double width = base_width[f] + 2.0 * lambda_k[k];
      if (width < width_floor) continue;
      const double threshold = qv * width / (2.0 * (1.0 + qv));
      const Vec& a = abs_dev[f];
      const auto it = std::upper_bound(a.begin(), a.end(), threshold);
      const auto idx = static_cast<std::size_t>(it - a.begin());
      const double sum = abs_dev_suffix[f][idx];
      grad[k] += -4.0 * (1.0 + qv) * sum / (width * width);
    }
    const double scale = static_cast<double>(n_pairs) *
                         static_cast<double>(features.size());
    for (double& gk : grad) gk /= scale;
    return grad;
  }

  double objective(std::span<const double> lambda_k) const {
    double obj = 0.0;
    for (std::size_t k = 0; k < group_weight.size(); ++k)
      obj += group_weight[k] * lambda_k[k];
    return obj;
  }
};

namespace detail {

// Largest-remainder apportionment of d_opt slots proportional to group
// sizes, with at least one slot per group and no group oversubscribed.
inline std::vector<std::size_t> apportion(
    const std::vector<std::size_t>& group_sizes, std::size_t d_opt) {
  const std::size_t K = group_sizes.size();
  const std::size_t d =
      std::accumulate(group_sizes.begin(), group_sizes.end(), std::size_t{0});
  require(d_opt >= K, "apportion: d_opt must be >= K");
  require(d_opt <= d, "apportion: d_opt must be <= d");
  std::vector<std::size_t> alloc(K);
  std::vector<std::pair<double, std::size_t>> remainders(K);
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < K; ++k) {
    require(group_sizes[k] >= 1, "apportion: group has zero features");
    const double quota = static_cast<double>(d_opt) *
                         static_cast<double>(group_sizes[k]) /
                         static_cast<double>(d);
    alloc[k] = static_cast<std::size_t>(std::floor(quota));
    remainders[k] = {quota - std::floor(quota), k};
    assigned += alloc[k];
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < d_opt; i = (i + 1) % K) {
    const std::size_t k = remainders[i].second;
    if (alloc[k] < group_sizes[k]) {
      ++alloc[k];
      ++assigned;
    }
  }
  // every group keeps at least one subsampled feature
  for (std::size_t k = 0; k < K; ++k) {
    while (alloc[k] == 0) {
      const auto donor = static_cast<std::size_t>(
          std::max_element(alloc.begin(), alloc.end()) - alloc.begin());
      if (alloc[donor] <= 1) break;
      --alloc[donor];
      ++alloc[k];
    }
  }
  return alloc;
}

}  // namespace detail

// Stratified uniform subsample (without replacement, proportional by
// largest remainder) of d_opt features, plus all per-feature precomputation
// the solver needs.  Deterministic under `seed`.
inline PkInstance build_pk_instance(std::span<const Pair> s_opt,
                                    const IntervalBundle& bundle,
                                    const Membership& membership,
                                    const RiskSpec& spec, double gamma,
                                    std::uint64_t seed) {
  bundle.validate();
  membership.validate();
  detail::require(!s_opt.empty(), "build_pk_instance: empty S_opt");
  detail::require(membership.dim() == bundle.dim(),
                  "build_pk_instance: membership dim mismatch");
  detail::require(gamma >= 0.0 && gamma < 1.0,
                  "build_pk_instance: gamma must be in [0,1)");
  const std::size_t d = bundle.dim();
  const std::size_t K = membership.num_groups();
  const std::size_t d_opt = spec.d_opt == 0 ? d : spec.d_opt;
  detail::require(d_opt <= d, "build_pk_instance: d_opt must be <= d");
  detail::require(d_opt >= K, "build_pk_instance: d_opt must be >= K");

  std::vector<std::vector<std::size_t>> by_group(K);
  for (std::size_t j = 0; j < d; ++j)
    by_group[static_cast<std::size_t>(membership.group[j])].push_back(j);

  const std::vector<std::size_t> alloc = detail::apportion(membership.sizes, d_opt);

  PkInstance inst;
  inst.epsilon = spec.epsilon;
  inst.gamma = gamma;
  inst.n_pairs = s_opt.size();
  inst.group_weight.resize(K);
  for (std::size_t k = 0; k < K; ++k)
    inst.group_weight[k] = static_cast<double>(membership.sizes[k]);

  for (std::size_t k = 0; k < K; ++k) {
    std::vector<std::size_t>& pool = by_group[k];
    SplitMix64 g = stream_for(seed, 0xFEA70000ULL + k);
    // partial Fisher-Yates: the first alloc[k] entries become the sample
    for (std::size_t i = 0; i < alloc[k]; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(g() % (pool.size() - i));
      std::swap(pool[i], pool[j]);
    }
    std::sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(alloc[k]));
    for (std::size_t i = 0; i < alloc[k]; ++i) {
      inst.features.push_back(pool[i]);
      inst.feature_group.push_back(static_cast<int>(k));
    }
  }

  double max_width = 0.0;
  for (std::size_t j = 0; j < d; ++j)
    max_width = std::max(max_width, bundle.upper[j] - bundle.lower[j]);
  inst.lambda_box = 2.0 * max_width;

  const Vec centers = bundle.centers();
  inst.base_width.resize(inst.features.size());
  inst.abs_dev.resize(inst.features.size());
  inst.abs_dev_suffix.resize(inst.features.size());
  for (std::size_t f = 0; f < inst.features.size(); ++f) {
    const std::size_t j = inst.features[f];
    inst.base_width[f] = bundle.upper[j] - bundle.lower[j];
    Vec a(s_opt.size());
    for (std::size_t i = 0; i < s_opt.size(); ++i)
      a[i] = std::abs(s_opt[i].x[j] - centers[j]);
    std::sort(a.begin(), a.end());
    Vec suffix(a.size() + 1, 0.0);
    for (std::size_t i = a.size(); i > 0; --i)
      suffix[i - 1] = suffix[i] + a[i - 1];
    inst.abs_dev[f] = std::move(a);
    inst.abs_dev_suffix[f] = std::move(suffix);
  }
  return inst;
}

namespace detail {

// Slide from a feasible point along -n-hat until the constraint binds;
// returns the feasible-side boundary point.
inline Vec tighten_to_boundary(const PkInstance& inst, Vec lam) {
  const std::size_t K = inst.num_groups();
  double norm = 0.0;
  for (double w : inst.group_weight) norm += w * w;
  norm = std::sqrt(norm);
  Vec u(K);
  for (std::size_t k = 0; k < K; ++k) u[k] = inst.group_weight[k] / norm;
  auto at = [&](double t) {
    Vec v(K);
    for (std::size_t k = 0; k < K; ++k)
      v[k] = std::clamp(lam[k] - t * u[k], 0.0, inst.lambda_box);
    return v;
  };
  double t_hi = 0.0;
  for (std::size_t k = 0; k < K; ++k) t_hi = std::max(t_hi, lam[k] / u[k]);
  if (t_hi <= 0.0) return lam;
  if (inst.surrogate_risk(at(t_hi)) <= inst.epsilon) return at(t_hi);
  double lo = 0.0, hi = t_hi;
  for (int it = 0; it < 100 && hi - lo > 1e-13 * inst.lambda_box; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (inst.surrogate_risk(at(mid)) <= inst.epsilon)
      lo = mid;
    else
      hi = mid;
  }
  return at(lo);
}

// Restore feasibility by expanding along +n-hat (used when an exchange
// overshoots), then tighten back onto the boundary.
inline std::optional<Vec> restore_and_tighten(const PkInstance& inst, Vec lam) {
  if (inst.surrogate_risk(lam) <= inst.epsilon)
    return tighten_to_boundary(inst, std::move(lam));
  const std::size_t K = inst.num_groups();
  double norm = 0.0;
  for (double w : inst.group_weight) norm += w * w;
  norm = std::sqrt(norm);
  auto at = [&](double t) {
    Vec v(K);
    for (std::size_t k = 0; k < K; ++k)
      v[k] = std::clamp(lam[k] + t * inst.group_weight[k] / norm, 0.0,
                        inst.lambda_box);
    return v;
  };
  double hi = inst.lambda_box * std::sqrt(static_cast<double>(K));
  if (inst.surrogate_risk(at(hi)) > inst.epsilon) return std::nullopt;
  double lo = 0.0;
  for (int it = 0; it < 100 && hi - lo > 1e-13 * inst.lambda_box; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (inst.surrogate_risk(at(mid)) <= inst.epsilon)
      hi = mid;
    else
      lo = mid;
  }
  return at(hi);
}

}  // namespace detail

// Solve (P_K): projected subgradient with Polyak-style steps on the exact
// penalty, then a feasibility bisection along the objective gradient and a
// KKT-guided pairwise exchange polish.  Errors if the all-box point is
// infeasible or the iteration cap is hit without a usable point.
inline Vec solve_pk(const PkInstance& inst,
                    const Vec* warm_start = nullptr) {
  const std::size_t K = inst.num_groups();
  detail::require(K >= 1, "solve_pk: no groups");
  const double box = inst.lambda_box;
  detail::require(std::isfinite(box) && box >= 0.0, "solve_pk: bad box");

  const Vec zeros(K, 0.0);
  if (inst.surrogate_risk(zeros) <= inst.epsilon) return zeros;
  const Vec top(K, box);
  if (inst.surrogate_risk(top) > inst.epsilon)
    throw InfeasibleError(
        "solve_pk: constraint infeasible at the top of the search box");

  if (K == 1) {
    double lo = 0.0, hi = box;
    for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(box, 1.0); ++it) {
      const double mid = 0.5 * (lo + hi);
      if (inst.surrogate_risk(Vec{mid}) <= inst.epsilon)
        hi = mid;
      else
        lo = mid;
    }
    return Vec{hi};
  }

  double weight_sum = 0.0;
  for (double w : inst.group_weight) weight_sum += w;
  const double obj_scale = weight_sum * box;
  const double slack0 = inst.surrogate_risk(zeros) - inst.epsilon;
  const double rho = 4.0 * obj_scale / std::max(slack0, 1e-12);

  Vec lam = warm_start && warm_start->size() == K ? *warm_start
                                                  : Vec(K, 0.5 * box);
  for (double& v : lam) v = std::clamp(v, 0.0, box);

  Vec best_feasible = top;
  double best_obj = inst.objective(top);
  double f_best = std::numeric_limits<double>::infinity();
  std::size_t stall = 0;
  constexpr std::size_t kMaxIter = 50000;
  for (std::size_t t = 0; t < kMaxIter; ++t) {
    const double g = inst.surrogate_risk(lam) - inst.epsilon;
    const double obj = inst.objective(lam);
    const double f = obj + rho * std::max(g, 0.0);
    if (f < f_best) f_best = f;
    if (g <= 0.0 && obj < best_obj - 1e-9 * obj_scale) {
      best_obj = obj;
      best_feasible = lam;
      stall = 0;
    } else if (++stall > 2500) {
      break;
    }
    Vec dir(inst.group_weight);
    if (g > 0.0) {
      const Vec gg = inst.surrogate_gradient(lam);
      for (std::size_t k = 0; k < K; ++k) dir[k] += rho * gg[k];
    }
    double dir_norm_sq = 0.0;
    for (double v : dir) dir_norm_sq += v * v;
    if (dir_norm_sq <= 0.0) break;
    const double margin =
        0.02 * obj_scale / (1.0 + static_cast<double>(t) / 150.0);
    const double step = (f - (f_best - margin)) / dir_norm_sq;
    for (std::size_t k = 0; k < K; ++k)
      lam[k] = std::clamp(lam[k] - step * dir[k], 0.0, box);
    if (!detail::all_finite(lam))
      throw NumericError("solve_pk: subgradient iterate diverged");
  }

  Vec result = detail::tighten_to_boundary(inst, best_feasible);
  if (inst.objective(result) > best_obj) result = best_feasible;

  // KKT polish: move budget between the cheapest and priciest groups (by
  // |dg/dlambda_k| / n_k) along objective-neutral exchanges, re-tightening
  // after each move.  Stops when the ratios agree or nothing improves.
  for (int round = 0; round < 60; ++round) {
    const Vec grad = inst.surrogate_gradient(result);
    double r_max = -1.0, r_min = std::numeric_limits<double>::infinity();
    std::size_t k_up = K, k_down = K;
    for (std::size_t k = 0; k < K; ++k) {
      const double ratio = std::abs(grad[k]) / inst.group_weight[k];
      if (result[k] < box && ratio > r_max) {
        r_max = ratio;
        k_up = k;
      }
      if (result[k] > 0.0 && ratio < r_min) {
        r_min = ratio;
        k_down = k;
      }
    }
    if (k_up == K || k_down == K || k_up == k_down) break;
    if (r_max <= r_min * (1.0 + 1e-4)) break;
    const double t_hi = std::min((box - result[k_up]) * inst.group_weight[k_up],
                                 result[k_down] * inst.group_weight[k_down]);
    if (t_hi <= 0.0) break;
    auto exchanged = [&](double t) {
      Vec v = result;
      v[k_up] = std::clamp(v[k_up] + t / inst.group_weight[k_up], 0.0, box);
      v[k_down] =
          std::clamp(v[k_down] - t / inst.group_weight[k_down], 0.0, box);
      return v;
    };
    auto score = [&](double t) -> double {
      const auto fixed = detail::restore_and_tighten(inst, exchanged(t));
      if (!fixed) return std::numeric_limits<double>::infinity();
      return inst.objective(*fixed);
    };
    double lo = 0.0, hi = t_hi;
    for (int it = 0; it < 40; ++it) {
      const double m1 = lo + (hi - lo) / 3.0;
      const double m2 = hi - (hi - lo) / 3.0;
      if (score(m1) <= score(m2))
        hi = m2;
      else
        lo = m1;
    }
    const double t_star = 0.5 * (lo + hi);
    const auto candidate = detail::restore_and_tighten(inst, exchanged(t_star));
    if (!candidate) break;
    if (inst.objective(*candidate) < inst.objective(result) - 1e-10 * obj_scale)
      result = *candidate;
    else
      break;
  }

  if (inst.surrogate_risk(result) > inst.epsilon + 1e-6)
    throw NumericError("solve_pk: final point violates feasibility tolerance");
  if (!detail::all_finite(result))
    throw NumericError("solve_pk: non-finite solution");
  return result;
}

// Run solve_pk for each gamma in the grid and keep the solution with the
// smallest objective; ties go to the smaller gamma.
inline std::pair<double, Vec> gamma_search(std::span<const Pair> s_opt,
                                           const IntervalBundle& bundle,
                                           const Membership& membership,
                                           const RiskSpec& spec) {
  const Vec grid = spec.effective_gamma_grid();
  detail::require(!grid.empty(), "gamma_search: empty gamma grid");
  double best_gamma = -1.0;
  double best_obj = std::numeric_limits<double>::infinity();
  Vec best_lambda;
  Vec warm;
  for (double gamma : grid) {
    const PkInstance inst =
        build_pk_instance(s_opt, bundle, membership, spec, gamma, spec.seed);
    Vec lam;
    try {
      lam = solve_pk(inst, warm.empty() ? nullptr : &warm);
    } catch (const InfeasibleError&) {
      continue;
    }
    warm = lam;
    const double obj = inst.objective(lam);
    if (obj < best_obj) {
      best_obj = obj;
      best_gamma = gamma;
      best_lambda = lam;
    }
  }
  if (best_gamma < 0.0)
    throw InfeasibleError("gamma_search: every gamma in the grid is infeasible");
  return {best_gamma, best_lambda};
}

}  // namespace krcps
