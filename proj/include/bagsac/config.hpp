#pragma once

// Run configuration: INI-style sections (env, pomdp, method, sac, guidance,
// ensemble, schedule). Unknown sections or keys are rejected.

#include <cstdint>
#include <filesystem>
#include <string>

#include "bagsac/guidance.hpp"
#include "bagsac/highway.hpp"
#include "bagsac/pomdp.hpp"
#include "bagsac/sac_core.hpp"
#include "bagsac/uncertainty.hpp"

namespace bagsac {

enum class Method { vanilla_sac, gsac_fixed, ba_gsac, linear_decay, gsac_threshold };

const char* to_string(Method method);
Method method_from_string(const std::string& name);

struct SacConfig {
  double alpha = 0.2;
  AlphaMode alpha_mode = AlphaMode::fixed;
  double target_entropy = -2.0;
  double gamma = 0.99;
  double learning_rate = 3e-4;
  int batch_size = 128;
  int updates_per_step = 1;
  double polyak = 0.995;
  int hidden_units = 128;
  int hidden_layers = 2;
  std::size_t buffer_capacity = 50000;
  bool scale_inputs = true;
};

struct GuidanceConfig {
  double fixed_lambda = 0.1;  // [method] lambda, gsac_fixed only
  double lambda_min = 0.01;
  double lambda_max = 0.5;
  std::int64_t warmup_steps = 800;
  std::int64_t decay_horizon = 0;  // 0 means total_steps
};

struct RunConfig {
  Method method = Method::ba_gsac;
  PomdpLevel level = PomdpLevel::moderate();
  int history_length = 3;
  std::uint64_t seed = 42;
  std::int64_t total_steps = 50000;
  std::int64_t eval_every = 1500;
  int eval_episodes = 5;
  std::size_t blindness_samples = 2000;
  EnvConfig env;
  SacConfig sac;
  GuidanceConfig guidance;
  EnsembleConfig ensemble;

  /// Throws ConfigError for inconsistent values.
  void validate() const;

  bool guided() const { return method != Method::vanilla_sac; }
  bool uses_ensemble() const { return method == Method::ba_gsac || method == Method::gsac_threshold; }
  /// Vanilla SAC always runs with K = 1.
  int effective_history() const { return method == Method::vanilla_sac ? 1 : history_length; }
  GuidanceSchedule schedule() const;
  NetShape net_shape() const { return {sac.hidden_units, sac.hidden_layers, sac.scale_inputs}; }
  AdamConfig adam() const { return AdamConfig{sac.learning_rate, 0.9, 0.999, 1e-8}; }
  /// e.g. "ba_gsac", "gsac_fixed_0.1".
  std::string method_label() const;

  /// Canonical INI text: every key, fixed order, round-trip precision.
  std::string to_ini() const;
  /// 16 hex digits of a hash of to_ini().
  std::string hash() const;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
/// Sets one "section.key" (or section + key) from its text value.
void apply_setting(RunConfig& config, const std::string& section, const std::string& key, const std::string& value);

}  // namespace bagsac
