#include <doctest.h>

#include <cmath>
#include <random>

#include "bagsac/errors.hpp"
#include "bagsac/highway.hpp"

using namespace bagsac;

namespace {

VehicleState car(double x, double y, double vx = 0.0) {
  VehicleState v;
  v.x = x;
  v.y = y;
  v.vx = vx;
  return v;
}

// Interval test, valid for heading 0 only.
bool aligned_overlap(const VehicleState& a, const VehicleState& b) {
  return std::abs(a.x - b.x) < 0.5 * (a.length + b.length) && std::abs(a.y - b.y) < 0.5 * (a.width + b.width);
}

std::array<std::pair<double, double>, 4> corners(const VehicleState& v) {
  const double c = std::cos(v.heading), s = std::sin(v.heading);
  std::array<std::pair<double, double>, 4> out;
  const double hl = 0.5 * v.length, hw = 0.5 * v.width;
  const double sx[4] = {hl, hl, -hl, -hl}, sy[4] = {hw, -hw, -hw, hw};
  for (int i = 0; i < 4; ++i) out[static_cast<std::size_t>(i)] = {v.x + c * sx[i] - s * sy[i], v.y + s * sx[i] + c * sy[i]};
  return out;
}

bool inside(const VehicleState& v, double px, double py) {
  const double c = std::cos(v.heading), s = std::sin(v.heading);
  const double lx = c * (px - v.x) + s * (py - v.y);
  const double ly = -s * (px - v.x) + c * (py - v.y);
  return std::abs(lx) < 0.5 * v.length && std::abs(ly) < 0.5 * v.width;
}

bool segments_cross(std::pair<double, double> a, std::pair<double, double> b, std::pair<double, double> c,
                    std::pair<double, double> d) {
  auto cross = [](auto o, auto p, auto q) {
    return (p.first - o.first) * (q.second - o.second) - (p.second - o.second) * (q.first - o.first);
  };
  const double d1 = cross(c, d, a), d2 = cross(c, d, b), d3 = cross(a, b, c), d4 = cross(a, b, d);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
}

// Polygon test: a corner inside the other box or crossing edges.
bool polygon_overlap(const VehicleState& a, const VehicleState& b) {
  const auto ca = corners(a), cb = corners(b);
  for (auto p : ca)
    if (inside(b, p.first, p.second)) return true;
  for (auto p : cb)
    if (inside(a, p.first, p.second)) return true;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (segments_cross(ca[static_cast<std::size_t>(i)], ca[static_cast<std::size_t>((i + 1) % 4)], cb[static_cast<std::size_t>(j)],
                         cb[static_cast<std::size_t>((j + 1) % 4)]))
        return true;
  return false;
}

}  // namespace

TEST_CASE("reset is a pure function of seed and config") {
  HighwayEnv a(EnvConfig{}), b(EnvConfig{});
  const FullState sa = a.reset(17);
  const FullState sb = b.reset(17);
  CHECK(sa == sb);
  CHECK(a.ego().y == b.ego().y);
  for (std::size_t i = 0; i < a.traffic().size(); ++i) CHECK(a.traffic()[i].x == b.traffic()[i].x);
  CHECK_FALSE(a.reset(18) == sb);
}

TEST_CASE("traffic count 4 fills every neighbour row") {
  EnvConfig cfg;
  cfg.traffic_count = 4;
  HighwayEnv env(cfg);
  const FullState s = env.reset(3);
  for (int r = 1; r <= 4; ++r) CHECK(s.at(r, 0) == 1.0);
}

TEST_CASE("1000 resets place no overlapping vehicles") {
  HighwayEnv env(EnvConfig{});
  int overlaps = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    env.reset(seed);
    std::vector<VehicleState> all = env.traffic();
    all.push_back(env.ego());
    for (std::size_t i = 0; i < all.size(); ++i)
      for (std::size_t j = i + 1; j < all.size(); ++j)
        if (aligned_overlap(all[i], all[j])) ++overlaps;
  }
  CHECK(overlaps == 0);
}

TEST_CASE("infeasible placement is a configuration error") {
  EnvConfig cfg;
  cfg.traffic_count = 200;
  cfg.spawn_ahead_min = 20;
  cfg.spawn_ahead_max = 40;
  cfg.placement_retries = 5;
  HighwayEnv env(cfg);
  CHECK_THROWS_AS(env.reset(1), ConfigError);
}

TEST_CASE("invalid configs are rejected") {
  EnvConfig cfg;
  cfg.lanes = 1;
  CHECK_THROWS_AS(HighwayEnv{cfg}, ConfigError);
  cfg = EnvConfig{};
  cfg.traffic_count = 3;
  CHECK_THROWS_AS(HighwayEnv{cfg}, ConfigError);
}

TEST_CASE("oriented overlap agrees with the interval and polygon oracles") {
  Rng rng(4);
  std::uniform_real_distribution<double> pos(-6.0, 6.0), ang(-1.5, 1.5);
  int agree_aligned = 0, agree_poly = 0;
  for (int k = 0; k < 5000; ++k) {
    VehicleState a = car(0.0, 0.0), b = car(pos(rng), pos(rng));
    if (rectangles_overlap(a, b) == aligned_overlap(a, b)) ++agree_aligned;
    a.heading = ang(rng);
    b.heading = ang(rng);
    if (rectangles_overlap(a, b) == polygon_overlap(a, b)) ++agree_poly;
    CHECK(rectangles_overlap(a, b) == rectangles_overlap(b, a));
  }
  CHECK(agree_aligned == 5000);
  CHECK(agree_poly == 5000);
}

TEST_CASE("ego at rest with zero action stays put") {
  HighwayEnv env(EnvConfig{});
  VehicleState ego = car(0.0, 6.0, 0.0);
  env.reset_to(ego, {car(100.0, 2.0, 20.0)});
  const StepResult r = env.step({0.0, 0.0});
  CHECK(env.ego().x == 0.0);
  CHECK(env.ego().y == 6.0);
  CHECK_FALSE(r.collision);
}

TEST_CASE("20 m/s for one 0.1 s step advances x by 2.0 m") {
  HighwayEnv env(EnvConfig{});
  env.reset_to(car(10.0, 6.0, 20.0), {car(100.0, 2.0, 20.0)});
  env.step({0.0, 0.0});
  CHECK(env.ego().x == doctest::Approx(12.0).epsilon(1e-12));
  CHECK(env.ego().y == 6.0);
}

TEST_CASE("overlap with traffic terminates with the collision penalty") {
  EnvConfig cfg;
  HighwayEnv env(cfg);
  env.reset_to(car(0.0, 6.0, 20.0), {car(2.0, 6.0, 20.0)});
  const StepResult r = env.step({0.3, -0.2});
  CHECK(r.collision);
  CHECK(r.terminated);
  CHECK_FALSE(r.truncated);
  CHECK(r.reward <= cfg.w_speed + cfg.w_lane - cfg.w_collision + 1e-12);
  CHECK_THROWS_AS(env.step({0.0, 0.0}), ContractViolation);
}

TEST_CASE("leaving the road counts as a collision") {
  HighwayEnv env(EnvConfig{});
  env.reset_to(car(0.0, 0.05, 20.0), {car(200.0, 10.0, 20.0)});
  bool hit = false;
  for (int i = 0; i < 40 && env.active(); ++i) hit = env.step({0.0, -1.0}).collision;
  CHECK(hit);
}

TEST_CASE("horizon truncates without termination") {
  EnvConfig cfg;
  cfg.horizon = 5;
  HighwayEnv env(cfg);
  env.reset_to(car(0.0, 6.0, 20.0), {car(100.0, 2.0, 20.0)});
  StepResult r;
  for (int i = 0; i < 5; ++i) r = env.step({0.0, 0.0});
  CHECK(r.truncated);
  CHECK_FALSE(r.terminated);
  CHECK_FALSE(env.active());
}

TEST_CASE("reward formula") {
  EnvConfig cfg;
  VehicleState ego = car(0.0, 6.0, 15.0);  // lane centre, half speed
  CHECK(step_reward(cfg, ego, false) == doctest::Approx(0.7 * 0.5 + 0.3).epsilon(1e-14));
  ego.y = 7.0;  // 1 m off the centre, sigma 1
  CHECK(step_reward(cfg, ego, false) == doctest::Approx(0.35 + 0.3 * std::exp(-1.0)).epsilon(1e-14));
  CHECK(step_reward(cfg, ego, true) == doctest::Approx(0.35 + 0.3 * std::exp(-1.0) - 5.0).epsilon(1e-14));
}

TEST_CASE("nearest neighbours: ordering, exclusion, zero rows, ties") {
  const VehicleState ego = car(0.0, 6.0, 20.0);
  CHECK(nearest_neighbors(ego, {}).to_vector().tail(20).cwiseAbs().maxCoeff() == 0.0);

  const std::vector<VehicleState> traffic{car(10, 6), car(5, 6), car(20, 6), car(1, 6), car(7, 6)};
  const FullState s = nearest_neighbors(ego, traffic);
  CHECK(s.at(0, 0) == 1.0);
  CHECK(s.at(0, 1) == 0.0);
  CHECK(s.at(0, 2) == 6.0);
  const double expected[4] = {1, 5, 7, 10};
  for (int r = 0; r < 4; ++r) CHECK(s.at(r + 1, 1) == expected[r]);

  const std::vector<VehicleState> tied{car(-5, 6, 1.0), car(5, 6, 2.0)};
  for (int k = 0; k < 3; ++k) {
    const FullState t = nearest_neighbors(ego, tied);
    CHECK(t.at(1, 1) == -5.0);
    CHECK(t.at(2, 1) == 5.0);
    CHECK(t.at(3, 0) == 0.0);
  }
}

TEST_CASE("episode invariants: reward bounds, neighbour order, determinism, braking") {
  EnvConfig cfg;
  HighwayEnv a(cfg), b(cfg);
  Rng rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::uint64_t ep = 0; ep < 20; ++ep) {
    a.reset(ep);
    b.reset(ep);
    double ret = 0.0;
    while (a.active()) {
      const Action act{u(rng), u(rng)};
      const StepResult ra = a.step(act);
      const StepResult rb = b.step(act);
      CHECK(ra.next_state == rb.next_state);
      CHECK(ra.reward == rb.reward);
      CHECK(ra.reward >= -cfg.w_collision);
      CHECK(ra.reward <= cfg.w_speed + cfg.w_lane);
      if (ra.terminated) CHECK(ra.collision);
      double prev = 0.0;
      for (int r = 1; r <= 4; ++r) {
        if (ra.next_state.at(r, 0) == 0.0) break;
        const double d = std::hypot(ra.next_state.at(r, 1), ra.next_state.at(r, 2));
        CHECK(d >= prev - 1e-9);
        prev = d;
      }
      ret += ra.reward;
    }
    CHECK(ret >= -cfg.w_collision - 1e-9);
    CHECK(ret <= cfg.horizon * (cfg.w_speed + cfg.w_lane));
  }

  // braking never speeds the ego up
  a.reset(99);
  double speed = a.ego().speed();
  while (a.active()) {
    a.step({-std::abs(u(rng)), u(rng)});
    CHECK(a.ego().speed() <= speed + 1e-12);
    speed = a.ego().speed();
  }
}

TEST_CASE("privilege firewall counts reads only inside a guard") {
  PrivilegeFirewall::reset_violations();
  FullState s;
  (void)s.features();
  CHECK(PrivilegeFirewall::violations() == 0);
  {
    PrivilegeFirewall guard;
    (void)s.features();
    (void)s.at(0, 0);
  }
  CHECK(PrivilegeFirewall::violations() == 2);
  (void)s.features();
  CHECK(PrivilegeFirewall::violations() == 2);
  PrivilegeFirewall::reset_violations();
}

TEST_CASE("full braking in a clear lane stops without a collision") {
  EnvConfig cfg;
  HighwayEnv env(cfg);
  env.reset_to(car(0.0, 6.0, 20.0), {car(30.0, 14.0, 20.0), car(-30.0, 2.0, 20.0)});
  double ret = 0.0;
  StepResult r;
  while (env.active()) {
    r = env.step({-1.0, 0.0});
    CHECK_FALSE(r.collision);
    ret += r.reward;
  }
  CHECK(env.ego().speed() == 0.0);
  CHECK(r.truncated);
  CHECK(ret > 0.0);
}
