#include "bagsac/highway.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bagsac/errors.hpp"

namespace bagsac {

namespace {
thread_local int g_firewall_depth = 0;
thread_local std::uint64_t g_violations = 0;
}  // namespace

PrivilegeFirewall::PrivilegeFirewall() { ++g_firewall_depth; }
PrivilegeFirewall::~PrivilegeFirewall() { --g_firewall_depth; }
bool PrivilegeFirewall::active() { return g_firewall_depth > 0; }
std::uint64_t PrivilegeFirewall::violations() { return g_violations; }
void PrivilegeFirewall::reset_violations() { g_violations = 0; }
void PrivilegeFirewall::record_read() { ++g_violations; }

Vector FullState::to_vector() const {
  const Features& f = features();
  return Eigen::Map<const Vector>(f.data(), kFeatureDim);
}

double VehicleState::speed() const { return std::hypot(vx, vy); }

void EnvConfig::validate() const {
  if (lanes < 2) throw ConfigError("env.lanes must be >= 2");
  if (traffic_count < 4) throw ConfigError("env.traffic_count must be >= 4");
  if (!(dt > 0.0)) throw ConfigError("env.dt must be positive");
  if (horizon < 1) throw ConfigError("env.horizon must be >= 1");
  if (!(lane_width > 0.0) || !(vehicle_length > 0.0) || !(vehicle_width > 0.0))
    throw ConfigError("env: lane and vehicle extents must be positive");
  if (!(speed_max > speed_min) || speed_min < 0.0) throw ConfigError("env: need 0 <= speed_min < speed_max");
  if (initial_speed < speed_min || initial_speed > speed_max) throw ConfigError("env.initial_speed outside speed range");
  if (traffic_speed_min > traffic_speed_max) throw ConfigError("env: traffic speed range inverted");
  if (spawn_ahead_min > spawn_ahead_max || respawn_ahead_min > respawn_ahead_max)
    throw ConfigError("env: spawn window inverted");
  if (!(lane_sigma > 0.0)) throw ConfigError("env.lane_sigma must be positive");
  if (w_speed < 0.0 || w_lane < 0.0 || w_collision < 0.0) throw ConfigError("env: reward weights must be >= 0");
  if (placement_retries < 1) throw ConfigError("env.placement_retries must be >= 1");
}

double EnvConfig::nearest_lane_center(double y) const {
  const int lane = std::clamp(static_cast<int>(std::floor(y / lane_width)), 0, lanes - 1);
  return lane_center(lane);
}

bool rectangles_overlap(const VehicleState& a, const VehicleState& b) {
  struct Box {
    double cx, cy, ux, uy, hl, hw;  // centre, unit heading, half extents
  };
  auto box = [](const VehicleState& v) {
    return Box{v.x, v.y, std::cos(v.heading), std::sin(v.heading), 0.5 * v.length, 0.5 * v.width};
  };
  const Box p = box(a);
  const Box q = box(b);
  const double axes[4][2] = {{p.ux, p.uy}, {-p.uy, p.ux}, {q.ux, q.uy}, {-q.uy, q.ux}};
  const double dx = q.cx - p.cx;
  const double dy = q.cy - p.cy;
  for (const auto& ax : axes) {
    auto radius = [&](const Box& r) {
      return r.hl * std::abs(r.ux * ax[0] + r.uy * ax[1]) + r.hw * std::abs(-r.uy * ax[0] + r.ux * ax[1]);
    };
    const double dist = std::abs(dx * ax[0] + dy * ax[1]);
    if (dist >= radius(p) + radius(q)) return false;
  }
  return true;
}

FullState nearest_neighbors(const VehicleState& ego, std::span<const VehicleState> traffic) {
  Features f{};
  f[0] = 1.0;
  f[1] = 0.0;
  f[2] = ego.y;
  f[3] = ego.vx;
  f[4] = ego.vy;

  std::vector<std::size_t> order;
  std::vector<double> dist(traffic.size());
  for (std::size_t i = 0; i < traffic.size(); ++i) {
    if (!traffic[i].alive) continue;
    dist[i] = std::hypot(traffic[i].x - ego.x, traffic[i].y - ego.y);
    order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });

  const std::size_t n = std::min<std::size_t>(order.size(), kNeighbors);
  for (std::size_t r = 0; r < n; ++r) {
    const VehicleState& v = traffic[order[r]];
    const std::size_t base = (r + 1) * kFeatureCols;
    f[base + 0] = 1.0;
    f[base + 1] = v.x - ego.x;
    f[base + 2] = v.y - ego.y;
    f[base + 3] = v.vx - ego.vx;
    f[base + 4] = v.vy - ego.vy;
  }
  return FullState(f);
}

double step_reward(const EnvConfig& c, const VehicleState& ego, bool collision) {
  const double speed_term = std::clamp((ego.speed() - c.speed_min) / (c.speed_max - c.speed_min), 0.0, 1.0);
  const double off = ego.y - c.nearest_lane_center(ego.y);
  const double lane_term = std::exp(-(off * off) / (c.lane_sigma * c.lane_sigma));
  return c.w_speed * speed_term + c.w_lane * lane_term - (collision ? c.w_collision : 0.0);
}

HighwayEnv::HighwayEnv(EnvConfig config) : config_(config) { config_.validate(); }

bool HighwayEnv::place_vehicle(VehicleState& v, double x_lo, double x_hi, std::size_t skip) {
  std::uniform_int_distribution<int> lane_dist(0, config_.lanes - 1);
  std::uniform_real_distribution<double> x_dist(x_lo, x_hi);
  std::uniform_real_distribution<double> speed_dist(config_.traffic_speed_min, config_.traffic_speed_max);
  for (int attempt = 0; attempt < config_.placement_retries; ++attempt) {
    VehicleState cand;
    cand.length = config_.vehicle_length;
    cand.width = config_.vehicle_width;
    cand.y = config_.lane_center(lane_dist(rng_));
    cand.x = ego_.x + x_dist(rng_);
    cand.vx = speed_dist(rng_);
    // Placement uses a footprint padded by min_gap so spawned cars are not bumper to bumper.
    VehicleState padded = cand;
    padded.length += config_.min_gap;
    bool clear = !rectangles_overlap(padded, ego_);
    for (std::size_t j = 0; clear && j < traffic_.size(); ++j) {
      if (j == skip || !traffic_[j].alive) continue;
      clear = !rectangles_overlap(padded, traffic_[j]);
    }
    if (clear) {
      v = cand;
      return true;
    }
  }
  return false;
}

FullState HighwayEnv::reset(std::uint64_t seed) {
  rng_.seed(seed);
  std::uniform_int_distribution<int> lane_dist(0, config_.lanes - 1);
  ego_ = VehicleState{};
  ego_.length = config_.vehicle_length;
  ego_.width = config_.vehicle_width;
  ego_.y = config_.lane_center(lane_dist(rng_));
  ego_.vx = config_.initial_speed;

  traffic_.clear();
  traffic_.reserve(static_cast<std::size_t>(config_.traffic_count));
  for (int i = 0; i < config_.traffic_count; ++i) {
    VehicleState v;
    v.alive = false;
    traffic_.push_back(v);
    if (!place_vehicle(traffic_.back(), config_.spawn_ahead_min, config_.spawn_ahead_max, traffic_.size() - 1)) {
      throw ConfigError("highway reset: could not place " + std::to_string(config_.traffic_count) +
                        " vehicles without overlap; widen the spawn window or reduce traffic_count");
    }
  }
  step_ = 0;
  active_ = true;
  return state();
}

FullState HighwayEnv::reset_to(const VehicleState& ego, std::vector<VehicleState> traffic, std::uint64_t seed) {
  rng_.seed(seed);
  ego_ = ego;
  traffic_ = std::move(traffic);
  step_ = 0;
  active_ = true;
  return state();
}

bool HighwayEnv::collided() const {
  if (ego_.y < 0.0 || ego_.y > config_.road_width()) return true;
  return std::any_of(traffic_.begin(), traffic_.end(),
                     [&](const VehicleState& v) { return v.alive && rectangles_overlap(ego_, v); });
}

StepResult HighwayEnv::step(const Action& action) {
  require(active_, "env_step called on a finished episode; call reset first");
  const double accel = std::clamp(action.accel, -1.0, 1.0);
  const double steer = std::clamp(action.steer, -1.0, 1.0);
  const double dt = config_.dt;

  const double speed =
      std::clamp(ego_.speed() + accel * config_.accel_max * dt, config_.speed_min, config_.speed_max);
  ego_.heading += steer * config_.steer_rate_max * dt;
  ego_.vx = speed * std::cos(ego_.heading);
  ego_.vy = speed * std::sin(ego_.heading);
  ego_.x += ego_.vx * dt;
  ego_.y += ego_.vy * dt;

  for (auto& v : traffic_) v.x += v.vx * dt;
  for (std::size_t i = 0; i < traffic_.size(); ++i) {
    const double rel = traffic_[i].x - ego_.x;
    if (rel < -config_.recycle_behind || rel > config_.recycle_ahead) {
      VehicleState fresh;
      if (place_vehicle(fresh, config_.respawn_ahead_min, config_.respawn_ahead_max, i)) traffic_[i] = fresh;
    }
  }
  ++step_;

  StepResult out;
  out.collision = collided();
  out.reward = step_reward(config_, ego_, out.collision);
  out.terminated = out.collision;
  out.truncated = !out.terminated && step_ >= config_.horizon;
  out.next_state = state();
  if (out.terminated || out.truncated) active_ = false;
  return out;
}

}  // namespace bagsac
