#pragma once

// Kinematic multi-lane highway: ego point-kinematics, constant-speed traffic in
// fixed lanes, speed/lane/collision reward.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "bagsac/numerics.hpp"
#include "bagsac/rng.hpp"

namespace bagsac {

inline constexpr int kVehicleRows = 5;   // ego + 4 nearest neighbours
inline constexpr int kFeatureCols = 5;   // presence, x, y, vx, vy
inline constexpr int kFeatureDim = kVehicleRows * kFeatureCols;
inline constexpr int kNeighbors = kVehicleRows - 1;
inline constexpr int kActionDim = 2;

using Features = std::array<double, kFeatureDim>;

/// Counts reads of privileged state made while a deployed policy is running.
/// Evaluation wraps every policy call in a guard; any FullState::features()
/// call inside it is recorded as a violation.
class PrivilegeFirewall {
 public:
  PrivilegeFirewall();
  ~PrivilegeFirewall();
  PrivilegeFirewall(const PrivilegeFirewall&) = delete;
  PrivilegeFirewall& operator=(const PrivilegeFirewall&) = delete;

  static bool active();
  static std::uint64_t violations();
  static void reset_violations();
  static void record_read();
};

/// 5x5 kinematics matrix, row-major: row 0 ego (x reported as 0), rows 1-4 the
/// nearest neighbours relative to ego.
class FullState {
 public:
  FullState() { values_.fill(0.0); }
  explicit FullState(const Features& values) : values_(values) {}

  const Features& features() const {
    if (PrivilegeFirewall::active()) PrivilegeFirewall::record_read();
    return values_;
  }
  double at(int row, int col) const { return features()[static_cast<std::size_t>(row * kFeatureCols + col)]; }
  Vector to_vector() const;

  friend bool operator==(const FullState& a, const FullState& b) { return a.values_ == b.values_; }

 private:
  Features values_;
};

struct VehicleState {
  double x = 0.0;
  double y = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  double heading = 0.0;
  double length = 5.0;
  double width = 2.0;
  bool alive = true;

  double speed() const;
};

struct Action {
  double accel = 0.0;
  double steer = 0.0;
};

struct StepResult {
  FullState next_state;
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;
  bool collision = false;
};

struct EnvConfig {
  int lanes = 4;
  double lane_width = 4.0;
  int traffic_count = 10;
  double dt = 0.1;
  int horizon = 200;
  double accel_max = 5.0;       // m/s^2 at |accel| = 1
  double steer_rate_max = 0.3;  // rad/s at |steer| = 1
  double speed_min = 0.0;
  double speed_max = 30.0;
  double initial_speed = 20.0;
  double traffic_speed_min = 15.0;
  double traffic_speed_max = 25.0;
  double w_speed = 0.7;
  double w_lane = 0.3;
  double w_collision = 5.0;
  double lane_sigma = 1.0;
  double vehicle_length = 5.0;
  double vehicle_width = 2.0;
  double spawn_ahead_min = 20.0;   // initial traffic window, metres ahead of ego
  double spawn_ahead_max = 220.0;
  double respawn_ahead_min = 180.0;  // where recycled vehicles reappear
  double respawn_ahead_max = 240.0;
  double recycle_behind = 60.0;  // vehicles this far behind / ahead get recycled
  double recycle_ahead = 260.0;
  double min_gap = 8.0;  // bumper-to-bumper spacing enforced at placement
  int placement_retries = 200;

  /// Throws ConfigError on invalid values.
  void validate() const;
  double road_width() const { return lanes * lane_width; }
  double lane_center(int lane) const { return (lane + 0.5) * lane_width; }
  double nearest_lane_center(double y) const;
};

/// Separating-axis test on the two oriented footprints.
bool rectangles_overlap(const VehicleState& a, const VehicleState& b);

/// Ego row plus the four nearest vehicles by Euclidean distance (ties by lower
/// index); missing rows are zero.
FullState nearest_neighbors(const VehicleState& ego, std::span<const VehicleState> traffic);

double step_reward(const EnvConfig& config, const VehicleState& ego, bool collision);

class HighwayEnv {
 public:
  explicit HighwayEnv(EnvConfig config);

  /// New episode; the layout is a pure function of (seed, config).
  FullState reset(std::uint64_t seed);
  /// Episode from an explicit layout (test fixtures). Recycling draws from `seed`.
  FullState reset_to(const VehicleState& ego, std::vector<VehicleState> traffic, std::uint64_t seed = 0);

  StepResult step(const Action& action);

  bool active() const { return active_; }
  int step_index() const { return step_; }
  const VehicleState& ego() const { return ego_; }
  const std::vector<VehicleState>& traffic() const { return traffic_; }
  const EnvConfig& config() const { return config_; }
  FullState state() const { return nearest_neighbors(ego_, traffic_); }

 private:
  bool collided() const;
  bool place_vehicle(VehicleState& v, double x_lo, double x_hi, std::size_t skip);

  EnvConfig config_;
  Rng rng_;
  VehicleState ego_;
  std::vector<VehicleState> traffic_;
  int step_ = 0;
  bool active_ = false;
};

}  // namespace bagsac
