#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "krcps/core.hpp"
#include "krcps/synth.hpp"

namespace krcps {

// Experiment configuration read from JSON.  Model block: {d, mu, tau2,
// sigma0_2}; sde block: {sigma_min, sigma_max, steps}; spec block mirrors
// RiskSpec; data block sizes the calibration draw.
struct ExperimentConfig {
  GaussianModel model;
  // Optional mismatched sampler the bundles are built from; defaults to the
  // data model (exact posterior).
  std::optional<GaussianModel> sampler_model;
  std::optional<SdeConfig> sde;
  RiskSpec spec;
  std::size_t n_cal = 512;
  std::size_t n_opt = 128;
  std::size_t m_samples = 128;
  std::size_t trials = 20;
  std::string method = "both";  // rcps | krcps | both

  const GaussianModel& bundle_model() const {
    return sampler_model ? *sampler_model : model;
  }
};

namespace cfg_detail {

inline Vec broadcast(const nlohmann::json& j, std::size_t d,
                     const std::string& what) {
  if (j.is_number()) return Vec(d, j.get<double>());
  Vec v = j.get<Vec>();
  if (v.size() != d)
    throw std::invalid_argument("config: " + what + " must be scalar or length d");
  return v;
}

inline GaussianModel parse_model(const nlohmann::json& j) {
  const auto d = j.at("d").get<std::size_t>();
  if (d < 1) throw std::invalid_argument("config: d must be >= 1");
  return GaussianModel::make(broadcast(j.at("mu"), d, "mu"),
                             j.at("tau2").get<double>(),
                             broadcast(j.at("sigma0_2"), d, "sigma0_2"));
}

}  // namespace cfg_detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  ExperimentConfig cfg;
  cfg.model = cfg_detail::parse_model(j.at("model"));
  if (j.contains("sampler_model"))
    cfg.sampler_model = cfg_detail::parse_model(j.at("sampler_model"));
  if (j.contains("sde")) {
    SdeConfig sde;
    const auto& js = j.at("sde");
    sde.sigma_min = js.at("sigma_min").get<double>();
    sde.sigma_max = js.at("sigma_max").get<double>();
    sde.steps = js.at("steps").get<std::size_t>();
    sde.sigma0 = js.value("sigma0", std::sqrt(cfg.model.sigma0_2.front()));
    sde.validate();
    cfg.sde = sde;
  }
  const auto& s = j.at("spec");
  cfg.spec.epsilon = s.at("epsilon").get<double>();
  cfg.spec.delta = s.at("delta").get<double>();
  cfg.spec.alpha = s.value("alpha", 0.1);
  cfg.spec.K = s.value("K", std::size_t{1});
  cfg.spec.d_opt = s.value("d_opt", std::size_t{0});
  cfg.spec.beta_max = s.value("beta_max", 1.0);
  cfg.spec.d_beta = s.value("d_beta", 0.01);
  cfg.spec.seed = s.value("seed", std::uint64_t{0});
  cfg.spec.ucb_kind = ucb_kind_from_string(s.value("ucb", "hybrid-split"));
  if (s.contains("gamma_grid")) cfg.spec.gamma_grid = s.at("gamma_grid").get<Vec>();
  cfg.spec.validate();

  if (j.contains("data")) {
    const auto& jd = j.at("data");
    cfg.n_cal = jd.value("n_cal", cfg.n_cal);
    cfg.n_opt = jd.value("n_opt", cfg.n_opt);
    cfg.m_samples = jd.value("m_samples", cfg.m_samples);
  }
  cfg.trials = j.value("trials", cfg.trials);
  cfg.method = j.value("method", cfg.method);
  if (cfg.method != "rcps" && cfg.method != "krcps" && cfg.method != "both")
    throw std::invalid_argument("config: method must be rcps, krcps or both");
  if (cfg.n_opt < 1 || cfg.n_opt >= cfg.n_cal)
    throw std::invalid_argument("config: need 1 <= n_opt < n_cal");
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: malformed JSON: ") +
                                e.what());
  }
  try {
    return parse_config(j);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
}

}  // namespace krcps
