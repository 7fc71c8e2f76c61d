#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "krcps/core.hpp"
#include "krcps/quantiles.hpp"
#include "krcps/rng.hpp"

namespace krcps {

// Per-coordinate independent Gaussian marginals; the closed-form risk
// oracle integrates tail masses against these.
struct GaussianMarginals {
  Vec mean;
  Vec var;
};

// Conjugate model with exactly known posterior: x ~ N(mu, tau2 I),
// y = x + N(0, diag(sigma0_2)).  noise variance may differ per coordinate.
struct GaussianModel {
  Vec mu;
  double tau2 = 1.0;
  Vec sigma0_2;

  static GaussianModel make(Vec mu_, double tau2_, double sigma0_2_scalar) {
    GaussianModel m;
    m.mu = std::move(mu_);
    m.tau2 = tau2_;
    m.sigma0_2.assign(m.mu.size(), sigma0_2_scalar);
    m.validate();
    return m;
  }

  static GaussianModel make(Vec mu_, double tau2_, Vec sigma0_2_) {
    GaussianModel m;
    m.mu = std::move(mu_);
    m.tau2 = tau2_;
    m.sigma0_2 = std::move(sigma0_2_);
    m.validate();
    return m;
  }

  std::size_t dim() const { return mu.size(); }

  void validate() const {
    detail::require(!mu.empty(), "GaussianModel: empty mu");
    detail::require(tau2 >= 0.0, "GaussianModel: tau2 must be >= 0");
    detail::require(sigma0_2.size() == mu.size(),
                    "GaussianModel: sigma0_2 size mismatch");
    for (double s : sigma0_2)
      detail::require(s >= 0.0, "GaussianModel: negative noise variance");
  }

  // Marginal law of x.
  GaussianMarginals prior_marginals() const {
    return {mu, Vec(mu.size(), tau2)};
  }

  // Law of x given y, by conjugacy:
  // mean = (tau2 y + sigma0_2 mu) / (tau2 + sigma0_2),
  // var  = tau2 sigma0_2 / (tau2 + sigma0_2).
  GaussianMarginals posterior(std::span<const double> y) const {
    detail::require(y.size() == dim(), "posterior: y dim mismatch");
    GaussianMarginals out;
    out.mean.resize(dim());
    out.var.resize(dim());
    for (std::size_t j = 0; j < dim(); ++j) {
      const double denom = tau2 + sigma0_2[j];
      if (denom == 0.0) {  // degenerate: everything is a point mass at mu
        out.mean[j] = mu[j];
        out.var[j] = 0.0;
      } else {
        out.mean[j] = (tau2 * y[j] + sigma0_2[j] * mu[j]) / denom;
        out.var[j] = tau2 * sigma0_2[j] / denom;
      }
    }
    return out;
  }
};

inline std::vector<Pair> draw_pairs(const GaussianModel& model,
                                    std::size_t count, std::uint64_t seed) {
  model.validate();
  detail::require(count >= 1, "draw_pairs: count must be >= 1");
  const std::size_t d = model.dim();
  const double tau = std::sqrt(model.tau2);
  std::vector<Pair> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    SplitMix64 g = stream_for(seed, i);
    Pair p;
    p.x.resize(d);
    p.y.resize(d);
    for (std::size_t j = 0; j < d; ++j)
      p.x[j] = model.mu[j] + tau * normal01(g);
    for (std::size_t j = 0; j < d; ++j)
      p.y[j] = p.x[j] + std::sqrt(model.sigma0_2[j]) * normal01(g);
    out[i] = std::move(p);
  }
  return out;
}

// m i.i.d. draws from the exact conjugate posterior at y: the ideal
// sampler whose Q_y equals p(x|y).
inline SampleBatch exact_posterior_sampler(const GaussianModel& model,
                                           std::span<const double> y,
                                           std::size_t m, std::uint64_t seed) {
  detail::require(m >= 1, "exact_posterior_sampler: m must be >= 1");
  const GaussianMarginals post = model.posterior(y);
  const std::size_t d = model.dim();
  SampleBatch batch;
  batch.rows = m;
  batch.cols = d;
  batch.data.resize(m * d);
  Vec sd(d);
  for (std::size_t j = 0; j < d; ++j) sd[j] = std::sqrt(post.var[j]);
  for (std::size_t i = 0; i < m; ++i) {
    SplitMix64 g = stream_for(seed, i);
    for (std::size_t j = 0; j < d; ++j)
      batch.data[i * d + j] = post.mean[j] + sd[j] * normal01(g);
  }
  return batch;
}

namespace detail {

// P[N(mean, var) < a], lower tail.
inline double gaussian_cdf(double a, double mean, double var) {
  if (var <= 0.0) return a > mean ? 1.0 : 0.0;  // point mass, closed endpoint
  return 0.5 * std::erfc((mean - a) / std::sqrt(2.0 * var));
}

}  // namespace detail

// Closed-form true risk of loss01 under per-coordinate Gaussian marginals:
// (1/d) sum_j mass outside [l_j - lambda_j, u_j + lambda_j].
inline double true_risk01(const GaussianMarginals& marg,
                          const IntervalBundle& bundle,
                          std::span<const double> lambda) {
  const std::size_t d = bundle.dim();
  detail::require(marg.mean.size() == d && lambda.size() == d,
                  "true_risk01: dimension mismatch");
  Vec per_coord(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double lo = bundle.lower[j] - lambda[j];
    const double hi = bundle.upper[j] + lambda[j];
    const double below = detail::gaussian_cdf(lo, marg.mean[j], marg.var[j]);
    const double above =
        1.0 - detail::gaussian_cdf(hi, marg.mean[j], marg.var[j]);
    double outside = below + above;
    if (marg.var[j] <= 0.0)
      outside = (marg.mean[j] < lo || marg.mean[j] > hi) ? 1.0 : 0.0;
    per_coord[j] = outside;
  }
  return detail::pairwise_sum(per_coord) / static_cast<double>(d);
}

// Geometric noise schedule of the variance-exploding forward SDE.
struct SdeConfig {
  double sigma_min = 0.01;
  double sigma_max = 2.0;
  double sigma0 = 1.0;  // observation noise level, in (sigma_min, sigma_max]
  std::size_t steps = 1000;

  void validate() const {
    detail::require(sigma_min > 0.0, "SdeConfig: sigma_min must be > 0");
    detail::require(sigma_max > sigma_min,
                    "SdeConfig: sigma_max must exceed sigma_min");
    detail::require(sigma0 > sigma_min && sigma0 <= sigma_max,
                    "SdeConfig: sigma0 must be in (sigma_min, sigma_max]");
    detail::require(steps >= 1, "SdeConfig: steps must be >= 1");
  }

  // sigma(t) = sigma_min^(1-t) * sigma_max^t, so sigma(0) = sigma_min and
  // sigma(1) = sigma_max exactly.
  double sigma(double t) const {
    return std::pow(sigma_min, 1.0 - t) * std::pow(sigma_max, t);
  }

  double t0() const {
    return (std::log(sigma0) - std::log(sigma_min)) /
           (std::log(sigma_max) - std::log(sigma_min));
  }
};

// Score of the VE-perturbed Gaussian prior:
// grad log p_t(x) = -(x - mu) / (tau2 + sigma^2(t)) per coordinate.
inline Vec analytic_score(const GaussianModel& model, const SdeConfig& cfg,
                          std::span<const double> x, double t) {
  detail::require(t >= 0.0 && t <= 1.0, "analytic_score: t must be in [0,1]");
  detail::require(x.size() == model.dim(), "analytic_score: x dim mismatch");
  const double s2 = cfg.sigma(t) * cfg.sigma(t);
  Vec out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j)
    out[j] = -(x[j] - model.mu[j]) / (model.tau2 + s2);
  return out;
}

using ScoreFn = std::function<Vec(std::span<const double>, double)>;

// Euler-Maruyama solve of the denoising reverse-time SDE: t0 places the
// observation on the noise schedule, x_n = y, and the loop runs n =
// floor(t0 * N) steps down to 0.
//
// Because the chain starts at the observation itself (a point mass at its
// own noise level), the reverse transition kernel from (t0, y) to t = 0 is
// already the conditional law of x given y; the drift is the prior score
// alone.  Adding the likelihood correction (y - x)/(sigma0^2 - sigma^2(t))
// on top of this initialization conditions on y twice: the first steps
// acquire O(1/k) drift factors that no stepsize refines, and with the
// exact Gaussian score the sampled variance collapses well below the
// posterior's.  That correction belongs to samplers started from pure
// noise at t = 1.
inline Vec reverse_sde_sample(std::span<const double> y,
                              const ScoreFn& score, const SdeConfig& cfg,
                              std::uint64_t seed) {
  cfg.validate();
  const std::size_t d = y.size();
  detail::require(d >= 1, "reverse_sde_sample: empty y");
  const double dt = 1.0 / static_cast<double>(cfg.steps);
  const double t0 = cfg.t0();
  const auto n = static_cast<std::size_t>(std::floor(t0 / dt));
  const double log_ratio = std::log(cfg.sigma_max / cfg.sigma_min);
  Vec x(y.begin(), y.end());
  SplitMix64 g = stream_for(seed, 0);
  for (std::size_t i = n; i >= 1; --i) {
    const double t_i = static_cast<double>(i) * dt;
    const double sigma_i = cfg.sigma(t_i);
    const double g_i = sigma_i * std::sqrt(2.0 * log_ratio);
    const double g_sq_dt = g_i * g_i * dt;
    const double noise_scale = g_i * std::sqrt(dt);
    const Vec s = score(x, t_i);
    detail::require(s.size() == d, "reverse_sde_sample: bad score dim");
    for (std::size_t j = 0; j < d; ++j)
      x[j] += g_sq_dt * s[j] + noise_scale * normal01(g);
    if (!detail::all_finite(x))
      throw NumericError("reverse_sde_sample: non-finite state at step " +
                         std::to_string(i));
  }
  return x;
}

// Calibration draw of the two-feature toy: x ~ N(mu, I_2), intervals are
// the fixed [-1 - lambda_j, 1 + lambda_j] family (y is unused downstream).
inline std::vector<Pair> fig1_toy(std::span<const double> mu, std::size_t n,
                                  std::uint64_t seed) {
  detail::require(mu.size() == 2, "fig1_toy: mu must have dimension 2");
  GaussianModel m = GaussianModel::make(Vec(mu.begin(), mu.end()), 1.0, 0.0);
  std::vector<Pair> pairs = draw_pairs(m, n, seed);
  for (Pair& p : pairs) p.y = p.x;
  return pairs;
}

inline IntervalBundle fig1_bundle() {
  return IntervalBundle{Vec{-1.0, -1.0}, Vec{1.0, 1.0}};
}

}  // namespace krcps
