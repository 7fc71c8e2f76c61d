// Experiment harness: seeded calibration runs, validity Monte Carlo against
// the synthetic oracle, and the two-feature toy geometry, all emitted as
// machine-readable CSV/JSON.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "krcps/experiment.hpp"
#include "krcps/io.hpp"

namespace {

using namespace krcps;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitNumeric = 3;

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::string method;
  std::string ucb;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t trials = 0;
};

ExperimentConfig load_with_overrides(const CommonArgs& args) {
  ExperimentConfig cfg = load_config(args.config_path);
  if (!args.method.empty()) cfg.method = args.method;
  if (!args.ucb.empty()) cfg.spec.ucb_kind = ucb_kind_from_string(args.ucb);
  if (args.seed_set) cfg.spec.seed = args.seed;
  if (args.trials > 0) cfg.trials = args.trials;
  cfg.spec.validate();
  return cfg;
}

void write_trial_log(const std::string& path,
                     const std::vector<TrialResult>& results) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "trial,method,mean_interval_length,empirical_risk,ucb_at_solution,"
         "true_risk_if_oracle,seed,schema_version\n";
  auto row = [&](const TrialResult& t, const char* name,
                 const MethodResult& m) {
    out << t.trial << ',' << name << ',' << io::format_double(m.mean_interval_length)
        << ',' << io::format_double(m.empirical_risk) << ','
        << io::format_double(m.ucb_at_solution) << ','
        << io::format_double(m.true_risk) << ',' << t.seed << ','
        << io::kSchemaVersion << "\n";
  };
  for (const TrialResult& t : results) {
    if (t.rcps) row(t, "rcps", *t.rcps);
    if (t.krcps) row(t, "krcps", *t.krcps);
  }
}

void write_lambda_map(const std::filesystem::path& dir, const std::string& stem,
                      const ExperimentConfig& cfg, const MethodResult& m,
                      std::size_t K) {
  io::write_csv((dir / (stem + ".csv")).string(),
                io::Array2D::from_vector(m.lambda_hat));
  io::Sidecar side;
  side.epsilon = cfg.spec.epsilon;
  side.delta = cfg.spec.delta;
  side.alpha = cfg.spec.alpha;
  side.K = K;
  side.gamma_star = m.gamma_star;
  side.lambda_groups = m.lambda_groups;
  side.seed = cfg.spec.seed;
  side.ucb_kind = to_string(cfg.spec.ucb_kind);
  io::write_sidecar((dir / (stem + ".json")).string(), side);
}

int cmd_calibrate(const CommonArgs& args) {
  const ExperimentConfig cfg = load_with_overrides(args);
  const std::filesystem::path dir(args.out_dir);
  std::filesystem::create_directories(dir);
  const std::size_t threads = worker_count_from_env(cfg.trials);
  const std::vector<TrialResult> results = run_validity_trials(cfg, threads);
  write_trial_log((dir / "trials.csv").string(), results);
  const TrialResult& first = results.front();
  if (first.rcps) {
    MethodResult scalar = *first.rcps;
    scalar.lambda_groups = Vec{scalar.lambda_hat.front()};
    write_lambda_map(dir, "lambda_map_rcps", cfg, scalar, 1);
  }
  if (first.krcps)
    write_lambda_map(dir, "lambda_map_krcps", cfg, *first.krcps, cfg.spec.K);
  std::cout << "wrote " << (dir / "trials.csv").string() << " ("
            << results.size() << " trials)\n";
  return kExitOk;
}

int cmd_validate(const CommonArgs& args) {
  const ExperimentConfig cfg = load_with_overrides(args);
  const std::filesystem::path dir(args.out_dir);
  std::filesystem::create_directories(dir);
  const std::size_t threads = worker_count_from_env(cfg.trials);
  const std::vector<TrialResult> results = run_validity_trials(cfg, threads);
  write_trial_log((dir / "trials.csv").string(), results);

  const double T = static_cast<double>(cfg.trials);
  const double delta = cfg.spec.delta;
  const double bound = delta + 3.0 * std::sqrt(delta * (1.0 - delta) / T);
  nlohmann::json summary{{"schema_version", io::kSchemaVersion},
                         {"trials", cfg.trials},
                         {"epsilon", cfg.spec.epsilon},
                         {"delta", delta},
                         {"violation_bound", bound}};
  bool ok = true;
  auto report = [&](const char* name, auto get) {
    std::size_t violations = 0;
    std::size_t count = 0;
    for (const TrialResult& t : results) {
      const auto& m = get(t);
      if (!m) continue;
      ++count;
      if (m->true_risk > cfg.spec.epsilon) ++violations;
    }
    if (count == 0) return;
    const double frac = static_cast<double>(violations) / static_cast<double>(count);
    // binomial 95% CI (Wilson score)
    const double z = 1.959963984540054;
    const double denom = 1.0 + z * z / T;
    const double center = (frac + z * z / (2.0 * T)) / denom;
    const double half =
        z * std::sqrt(frac * (1.0 - frac) / T + z * z / (4.0 * T * T)) / denom;
    summary[name] = {{"violations", violations},
                     {"fraction", frac},
                     {"ci95_lo", std::max(0.0, center - half)},
                     {"ci95_hi", std::min(1.0, center + half)},
                     {"pass", frac <= bound}};
    std::cout << name << ": violation fraction " << frac << " (bound " << bound
              << ", 95% CI [" << std::max(0.0, center - half) << ", "
              << std::min(1.0, center + half) << "]) -> "
              << (frac <= bound ? "pass" : "FAIL") << "\n";
    ok = ok && frac <= bound;
  };
  report("rcps", [](const TrialResult& t) -> const std::optional<MethodResult>& {
    return t.rcps;
  });
  report("krcps", [](const TrialResult& t) -> const std::optional<MethodResult>& {
    return t.krcps;
  });
  std::ofstream out((dir / "validity.json").string(), std::ios::trunc);
  out << summary.dump(2) << "\n";
  return ok ? kExitOk : kExitNumeric;
}

int cmd_fig1(const Fig1Options& opt, std::uint64_t seed, double grid_max,
             std::size_t grid_cells, const std::string& out_dir) {
  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  const Fig1Trial trial = run_fig1_trial(opt, seed);

  const IntervalBundle bundle = fig1_bundle();
  const std::vector<Pair> pairs = fig1_toy(opt.mu, opt.n, mix_seed(seed, 11));
  std::ofstream out((dir / "fig1.csv").string(), std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open fig1.csv");
  out << "kind,lambda1,lambda2,ucb,feasible,schema_version\n";
  for (std::size_t a = 0; a <= grid_cells; ++a) {
    for (std::size_t b = 0; b <= grid_cells; ++b) {
      const Vec lambda{grid_max * static_cast<double>(a) / grid_cells,
                       grid_max * static_cast<double>(b) / grid_cells};
      const double rhat = empirical_risk01(pairs, bundle, lambda);
      const double ucb = eval_ucb(opt.ucb, pairs.size(), opt.delta, rhat);
      out << "grid," << io::format_double(lambda[0]) << ','
          << io::format_double(lambda[1]) << ',' << io::format_double(ucb)
          << ',' << (ucb <= opt.epsilon ? 1 : 0) << ',' << io::kSchemaVersion
          << "\n";
    }
  }
  out << "rcps," << io::format_double(trial.rcps_lambda) << ','
      << io::format_double(trial.rcps_lambda) << ",,," << io::kSchemaVersion
      << "\n";
  out << "krcps," << io::format_double(trial.krcps_lambda[0]) << ','
      << io::format_double(trial.krcps_lambda[1]) << ",,,"
      << io::kSchemaVersion << "\n";
  std::cout << "rcps lambda = " << trial.rcps_lambda
            << ", krcps lambda = (" << trial.krcps_lambda[0] << ", "
            << trial.krcps_lambda[1] << "), mean lengths "
            << trial.rcps_mean_length << " vs " << trial.krcps_mean_length
            << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conformal risk control experiments (RCPS / K-RCPS)"};
  app.require_subcommand(1);

  CommonArgs args;
  auto add_common = [&](CLI::App* sub, bool needs_config) {
    if (needs_config)
      sub->add_option("--config", args.config_path, "experiment config JSON")
          ->required();
    sub->add_option("--out", args.out_dir, "output directory");
    sub->add_option("--method", args.method, "rcps|krcps|both")
        ->check(CLI::IsMember({"rcps", "krcps", "both"}));
    sub->add_option("--ucb", args.ucb, "hoeffding|bentkus|hybrid-split")
        ->check(CLI::IsMember({"hoeffding", "bentkus", "hybrid-split"}));
    sub->add_option("--seed", args.seed, "base RNG seed")
        ->each([&](const std::string&) { args.seed_set = true; });
    sub->add_option("--trials", args.trials, "number of trials");
  };

  CLI::App* calibrate = app.add_subcommand(
      "calibrate", "run calibration trials, write lambda maps + trial log");
  add_common(calibrate, true);

  CLI::App* validate = app.add_subcommand(
      "validate", "Monte Carlo validity check against the closed-form oracle");
  add_common(validate, true);

  Fig1Options fig;
  std::uint64_t fig_seed = 0;
  double grid_max = 4.0;
  std::size_t grid_cells = 80;
  std::string fig_out = ".";
  CLI::App* fig1 = app.add_subcommand(
      "fig1", "two-feature toy: feasible-region grid + RCPS/K-RCPS points");
  fig1->add_option("--mu", fig.mu, "toy mean (exactly two values)")
      ->expected(2);
  fig1->add_option("--n", fig.n, "calibration draws");
  fig1->add_option("--n-opt", fig.n_opt, "S_opt size for K-RCPS");
  fig1->add_option("--K", fig.K, "number of lambda groups");
  fig1->add_option("--epsilon", fig.epsilon, "risk level");
  fig1->add_option("--delta", fig.delta, "failure probability");
  fig1->add_option("--seed", fig_seed, "RNG seed");
  fig1->add_option("--grid-max", grid_max, "lambda grid upper edge");
  fig1->add_option("--grid-cells", grid_cells, "grid cells per axis");
  fig1->add_option("--out", fig_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (calibrate->parsed()) return cmd_calibrate(args);
    if (validate->parsed()) return cmd_validate(args);
    if (fig1->parsed()) {
      if (fig.mu.size() != 2) {
        std::cerr << "error: fig1 requires exactly two mu values (d = 2)\n";
        return kExitConfig;
      }
      return cmd_fig1(fig, fig_seed, grid_max, grid_cells, fig_out);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitConfig;
}
