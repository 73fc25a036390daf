#pragma once

// Forward-dynamics ensemble, pairwise disagreement, warmup percentile
// calibration and the observability-blindness report.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bagsac/numerics.hpp"
#include "bagsac/replay.hpp"
#include "bagsac/rng.hpp"

namespace bagsac {

enum class TargetMode { partial_obs, full_state };

const char* to_string(TargetMode mode);
TargetMode target_mode_from_string(const std::string& name);

struct EnsembleConfig {
  int size = 5;
  int hidden_units = 64;
  int hidden_layers = 2;
  int batch_size = 128;
  TargetMode target_mode = TargetMode::partial_obs;
  AdamConfig adam{3e-5, 0.9, 0.999, 1e-8};  // slower than the RL nets, see README
};

/// N independently initialised MLPs mapping (h_t, a_t) to a 25-dim prediction
/// of either o_{t+1} (partial_obs) or s_{t+1} (full_state). Inputs and targets
/// are raw kinematics, no scaling.
class Ensemble {
 public:
  /// Member i is seeded with derive_seed(seed, "ensemble_member", {i}).
  Ensemble(int history_dim, const EnsembleConfig& config, std::uint64_t seed);
  /// Explicit member seeds (fixtures).
  Ensemble(int history_dim, const EnsembleConfig& config, std::span<const std::uint64_t> member_seeds);

  int size() const { return static_cast<int>(members_.size()); }
  int history_dim() const { return history_dim_; }
  TargetMode target_mode() const { return config_.target_mode; }
  const EnsembleConfig& config() const { return config_; }
  const std::vector<std::uint64_t>& member_seeds() const { return seeds_; }

  /// One 25-vector per member.
  std::vector<Vector> predict(const Vector& history, const Action& action) const;
  Matrix predict_member(int member, const Matrix& inputs) const;

  static Matrix make_inputs(const Matrix& histories, const Matrix& actions);
  /// Training targets for the stored positions, per target mode.
  Matrix targets(const ReplayBuffer& buffer, std::span<const std::size_t> positions) const;
  Matrix inputs(const ReplayBuffer& buffer, std::span<const std::size_t> positions) const;

  /// Mean squared error over batch and output entries.
  double member_loss(int member, const Matrix& inputs, const Matrix& targets, Vector* grad) const;

  /// Every member draws its own minibatch (all draws happen before any update,
  /// in member order) and takes one Adam step. Returns pre-step losses.
  std::vector<double> update(const ReplayBuffer& buffer, Rng& rng);
  /// Same, on caller-provided minibatches (one per member).
  std::vector<double> update_on(const ReplayBuffer& buffer, const std::vector<std::vector<std::size_t>>& batches);

  const Mlp& member(int i) const { return members_[static_cast<std::size_t>(i)]; }
  Mlp& mutable_member(int i) { return members_[static_cast<std::size_t>(i)]; }

 private:
  int history_dim_;
  EnsembleConfig config_;
  std::vector<std::uint64_t> seeds_;
  std::vector<Mlp> members_;
  std::vector<Adam> adams_;
};

/// u = 2 / (N (N - 1)) * sum_{i<j} ||p_i - p_j||^2. Requires N >= 2.
double disagreement(std::span<const Vector> predictions);

inline constexpr double kCalibrationEpsilon = 1e-8;

struct Calibration {
  double u_lo = 0.0;
  double u_hi = 0.0;
  bool frozen = false;
  bool degenerate = false;  // spread was zero and got widened by kCalibrationEpsilon
};

/// Linear interpolation between order statistics at position p * (n - 1).
double percentile(std::vector<double> values, double p);

/// u_lo = P10, u_hi = P90 of the warmup values (at least 10 of them).
Calibration calibrate(const WarmupBuffer& warmup);

struct PartitionStats {
  std::size_t entries = 0;
  std::optional<double> mse;           // member prediction vs target, averaged over members
  std::optional<double> disagreement;  // per-entry pairwise disagreement; empty for N = 1
  std::optional<double> mean_abs_prediction;  // |ensemble mean prediction|
  double target_mean = 0.0;
  double target_std = 0.0;
  std::array<double, kFeatureCols> feature_target_std{};  // presence, x, y, vx, vy
  std::optional<double> u_share;       // this partition's part of the mean u
};

/// Prediction quality split by whether a target row was occluded in o_{t+1}.
struct BlindnessReport {
  TargetMode mode = TargetMode::partial_obs;
  std::string level;
  std::size_t n_samples = 0;
  PartitionStats visible;
  std::optional<PartitionStats> occluded;  // empty when no row in the sample was occluded
  PartitionStats visible_neighbors;        // visible minus the ego row
  bool no_occlusion_observed() const { return !occluded.has_value(); }
};

/// Evaluated on the `sample_size` most recent transitions.
BlindnessReport blindness_report(const Ensemble& ensemble, const ReplayBuffer& buffer, std::size_t sample_size,
                                 const std::string& level);
/// Target-only variant for methods that carry no ensemble.
BlindnessReport target_report(TargetMode mode, const ReplayBuffer& buffer, std::size_t sample_size,
                              const std::string& level);

nlohmann::json to_json(const BlindnessReport& report);

}  // namespace bagsac
