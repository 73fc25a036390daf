#pragma once

// Run orchestration: the training loop, periodic evaluation, trace files and
// run / seed summaries.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bagsac/config.hpp"
#include "bagsac/guidance.hpp"
#include "bagsac/guided.hpp"
#include "bagsac/highway.hpp"
#include "bagsac/pomdp.hpp"
#include "bagsac/replay.hpp"
#include "bagsac/sac_core.hpp"
#include "bagsac/uncertainty.hpp"

namespace bagsac {

struct EvalRecord {
  std::int64_t step = 0;
  std::vector<double> returns;
  double mean_return = 0.0;
  double return_std = 0.0;  // population
  double collision_rate = 0.0;
};

/// Maps an observation history to an action. Never given the full state.
using HistoryPolicy = std::function<Action(const Vector& history)>;

struct EvalSpec {
  EnvConfig env;
  PomdpLevel level;
  int history_length = 1;
  int episodes = 5;
  std::uint64_t run_seed = 0;
  std::uint64_t eval_index = 0;
};

/// Rolls out `spec.episodes` episodes. Episode e resets the environment with
/// derive_seed(run_seed, "eval", {eval_index, e}). Every policy call runs under
/// a PrivilegeFirewall.
EvalRecord evaluate(const HistoryPolicy& policy, const EvalSpec& spec, std::int64_t step = 0);

/// Uniform actions in [-1, 1]^2.
EvalRecord evaluate_random(const EvalSpec& spec, std::uint64_t seed);

struct DisagreementSummary {
  std::size_t count = 0;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double p10 = 0.0;
  double p50 = 0.0;
  double p90 = 0.0;
  std::optional<double> warmup_mean;
  std::optional<double> post_warmup_mean;
};

struct RunSummary {
  std::string method;
  std::string level;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::int64_t total_steps = 0;
  std::size_t evaluations = 0;
  double last5_avg = 0.0;
  double last5_std = 0.0;
  double collision_rate_last5 = 0.0;
  double best = 0.0;
  double lambda_activity = 0.0;
  std::optional<double> lambda_activity_post_warmup;
  std::optional<DisagreementSummary> disagreement;
  std::optional<Calibration> calibration;
  std::optional<double> threshold;
  std::uint64_t privileged_reads = 0;
};

nlohmann::json to_json(const RunSummary& summary);
RunSummary summary_from_json(const nlohmann::json& j);

/// Throws InsufficientCheckpoints with fewer than 5 evaluations.
RunSummary summarize(std::span<const EvalRecord> evals, std::span<const double> lambdas,
                     std::span<const std::optional<double>> disagreements, double lambda_min,
                     std::int64_t warmup_steps);

struct SeedAggregate {
  std::vector<double> values;
  double mean = 0.0;
  std::optional<double> cv_percent;  // empty when the mean is 0
  double min = 0.0;
};

/// Population CV over per-seed last-5 averages; needs at least 2 values.
SeedAggregate aggregate_seeds(std::span<const double> last5_avgs);
SeedAggregate aggregate_seeds(std::span<const RunSummary> summaries);
nlohmann::json to_json(const SeedAggregate& aggregate);

struct TrainRow {
  std::int64_t step = 0;
  ActorTag tag = ActorTag::control;
  double reward = 0.0;
  double lambda = 0.0;
  std::optional<double> disagreement;
  std::optional<double> critic_loss;
  std::optional<double> control_loss;
  std::optional<double> distill_loss;
};

struct RunResult {
  RunSummary summary;
  std::vector<EvalRecord> evals;
  std::vector<TrainRow> rows;
  std::optional<BlindnessReport> blindness;
};

/// Owns every network, buffer and RNG stream of one run.
class Trainer {
 public:
  explicit Trainer(RunConfig config);
  ~Trainer();

  const RunConfig& config() const { return config_; }
  std::int64_t step() const { return t_; }

  /// One environment step plus the updates due at that step.
  TrainRow advance();
  EvalRecord run_evaluation(std::uint64_t eval_index);
  /// Deterministic control-actor policy (what gets deployed).
  HistoryPolicy deployed_policy() const;

  const ReplayBuffer& replay() const { return replay_; }
  const GuidanceSchedule& schedule() const { return schedule_; }
  const Ensemble* ensemble() const { return ensemble_.get(); }
  const StochasticActor& control() const { return *control_; }
  const StochasticActor* guiding() const { return guiding_.get(); }
  const DistillationNet* distill() const { return distill_.get(); }
  const Critic& critic() const { return *critic_; }
  std::optional<BlindnessReport> blindness() const;

 private:
  void begin_episode();
  void updates(double lambda, TrainRow& row);

  RunConfig config_;
  GuidanceSchedule schedule_;
  int history_dim_;
  Rng env_rng_, obs_rng_, agent_rng_, ensemble_rng_;
  HighwayEnv env_;
  ObservationHistory history_;
  FullState state_;
  ReplayBuffer replay_;
  WarmupBuffer warmup_;
  std::unique_ptr<StochasticActor> guiding_;
  std::unique_ptr<StochasticActor> control_;
  std::unique_ptr<DistillationNet> distill_;
  std::unique_ptr<Critic> critic_;
  std::unique_ptr<Ensemble> ensemble_;
  EntropyTemperature temperature_;
  std::int64_t t_ = 0;
};

/// Runs Algorithm-style training for config.total_steps and, when `out_dir`
/// is given, writes config.ini, train.csv, eval.csv (incrementally),
/// summary.json, blindness.json, policy.json and replay_head.bin. Throws
/// InsufficientCheckpoints when fewer than 5 evaluations happened (traces are
/// still written).
RunResult train_run(const RunConfig& config, const std::optional<std::filesystem::path>& out_dir);

/// Bytes of the first `count` stored transitions.
std::string replay_bytes(const ReplayBuffer& buffer, std::size_t count);

/// Re-evaluates the saved control actor of a finished run.
EvalRecord evaluate_run(const std::filesystem::path& run_dir, int episodes);

/// lambda-activity, disagreement summary and blindness split of a finished run.
nlohmann::json diagnose(const std::filesystem::path& run_dir);

}  // namespace bagsac
