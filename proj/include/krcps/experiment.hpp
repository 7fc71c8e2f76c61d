#pragma once

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "krcps/config.hpp"
#include "krcps/core.hpp"
#include "krcps/krcps.hpp"
#include "krcps/quantiles.hpp"
#include "krcps/rcps.hpp"
#include "krcps/synth.hpp"

namespace krcps {

// What one calibration method produced in one trial.
struct MethodResult {
  Vec lambda_hat;
  double mean_interval_length = 0.0;
  double empirical_risk = 0.0;   // on the set the method certified against
  double ucb_at_solution = 0.0;
  double true_risk = 0.0;        // closed-form oracle
  double gamma_star = 0.0;       // krcps only
  Vec lambda_groups;             // krcps only
};

struct TrialResult {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::optional<MethodResult> rcps;
  std::optional<MethodResult> krcps;
};

// One synthetic validity trial: draw an observation, build the bundle from
// the sampler model's posterior at that observation, draw calibration
// ground truths from the data model's posterior, calibrate, and score
// against the closed-form risk.  The scalar RCPS baseline uses the full
// calibration set; K-RCPS splits it.
inline TrialResult run_validity_trial(const ExperimentConfig& cfg,
                                      std::size_t trial) {
  const std::uint64_t s = mix_seed(cfg.spec.seed, trial);
  const GaussianModel& model = cfg.model;
  const std::size_t d = model.dim();

  const Pair anchor = draw_pairs(model, 1, mix_seed(s, 1))[0];
  const SampleBatch batch = exact_posterior_sampler(
      cfg.bundle_model(), anchor.y, cfg.m_samples, mix_seed(s, 2));
  const IntervalBundle bundle = calibrated_quantiles(batch, cfg.spec.alpha);

  const GaussianMarginals posterior = model.posterior(anchor.y);
  const SampleBatch cal_draws =
      exact_posterior_sampler(model, anchor.y, cfg.n_cal, mix_seed(s, 3));
  std::vector<Pair> pairs(cfg.n_cal);
  for (std::size_t i = 0; i < cfg.n_cal; ++i) {
    const auto row = cal_draws.row(i);
    pairs[i] = Pair{Vec(row.begin(), row.end()), anchor.y};
  }

  RiskSpec spec = cfg.spec;
  spec.seed = mix_seed(s, 4);

  TrialResult result;
  result.trial = trial;
  result.seed = s;

  auto finish = [&](std::span<const Pair> assessed, const Vec& lambda,
                    MethodResult& out) {
    out.lambda_hat = lambda;
    out.mean_interval_length = bundle.mean_width(lambda);
    out.empirical_risk = empirical_risk01(assessed, bundle, lambda);
    out.ucb_at_solution = eval_ucb(spec.ucb_kind, assessed.size(), spec.delta,
                                   out.empirical_risk);
    out.true_risk = true_risk01(posterior, bundle, lambda);
  };

  if (cfg.method == "rcps" || cfg.method == "both") {
    MethodResult r;
    const double lam = rcps_scalar(pairs, bundle, spec);
    finish(pairs, Vec(d, lam), r);
    result.rcps = std::move(r);
  }
  if (cfg.method == "krcps" || cfg.method == "both") {
    const CalibrationSet split =
        split_calibration(pairs, cfg.n_opt, mix_seed(s, 5));
    KrcpsReport report;
    const Vec lambda = k_rcps(split, bundle, spec, &report);
    MethodResult r;
    finish(split.s_rcps(), lambda, r);
    r.gamma_star = report.gamma_star;
    r.lambda_groups = report.lambda_groups;
    result.krcps = std::move(r);
  }
  return result;
}

// Fig-1 toy trial: fixed [-1,1]^2 base intervals, x ~ N(mu, I_2).
struct Fig1Trial {
  double rcps_lambda = 0.0;     // scalar solution on the full draw
  Vec krcps_lambda;             // length 2
  double rcps_mean_length = 0.0;
  double krcps_mean_length = 0.0;
};

struct Fig1Options {
  Vec mu{-2.0, 0.75};
  std::size_t n = 128;
  std::size_t n_opt = 20;
  std::size_t K = 2;
  double epsilon = 0.1;
  double delta = 0.1;
  double beta_max = 4.0;
  double d_beta = 0.01;
  UcbKind ucb = UcbKind::hybrid_split;
};

inline Fig1Trial run_fig1_trial(const Fig1Options& opt, std::uint64_t seed) {
  detail::require(opt.mu.size() == 2, "fig1: mu must have dimension 2");
  const IntervalBundle bundle = fig1_bundle();
  const std::vector<Pair> pairs = fig1_toy(opt.mu, opt.n, mix_seed(seed, 11));

  RiskSpec spec;
  spec.epsilon = opt.epsilon;
  spec.delta = opt.delta;
  spec.K = opt.K;
  spec.d_opt = 2;
  spec.beta_max = opt.beta_max;
  spec.d_beta = opt.d_beta;
  spec.ucb_kind = opt.ucb;
  spec.seed = mix_seed(seed, 12);

  Fig1Trial out;
  out.rcps_lambda = rcps_scalar(pairs, bundle, spec);
  out.rcps_mean_length = bundle.mean_width(Vec(2, out.rcps_lambda));

  const CalibrationSet split =
      split_calibration(pairs, opt.n_opt, mix_seed(seed, 13));
  out.krcps_lambda = k_rcps(split, bundle, spec);
  out.krcps_mean_length = bundle.mean_width(out.krcps_lambda);
  return out;
}

// Run `count` jobs on a small worker pool.  Each job writes only its own
// slot, so results are deterministic regardless of scheduling.
inline void run_parallel(std::size_t count, std::size_t threads,
                         const std::function<void(std::size_t)>& job) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&]() {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          job(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

inline std::size_t worker_count_from_env(std::size_t trials) {
  std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("KRCPS_THREADS")) {
    const long parsed = std::strtol(env, nullptr, 10);
    if (parsed >= 1) hw = std::min<std::size_t>(hw, static_cast<std::size_t>(parsed));
  }
  return std::min(hw, std::max<std::size_t>(1, trials));
}

inline std::vector<TrialResult> run_validity_trials(
    const ExperimentConfig& cfg, std::size_t threads) {
  std::vector<TrialResult> results(cfg.trials);
  run_parallel(cfg.trials, threads,
               [&](std::size_t i) { results[i] = run_validity_trial(cfg, i); });
  return results;
}

}  // namespace krcps
