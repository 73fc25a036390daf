#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "bagsac/errors.hpp"
#include "bagsac/pomdp.hpp"
#include "bagsac/uncertainty.hpp"
#include "oracles.hpp"

using namespace bagsac;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

WarmupBuffer warmup_of(const std::vector<double>& values) {
  WarmupBuffer w(values.size());
  for (double v : values) w.push(v);
  return w;
}

// Random-policy rollout with K = 1 histories at the given level.
ReplayBuffer rollout(const PomdpLevel& level, int steps, std::uint64_t seed) {
  HighwayEnv env(EnvConfig{});
  ObservationHistory h(1);
  ReplayBuffer buf(static_cast<std::size_t>(steps));
  Rng rng(seed), obs(seed + 1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  FullState s = env.reset(rng());
  h.push(observe(s, level, obs).observation);
  for (int t = 0; t < steps; ++t) {
    Transition tr;
    tr.full_state = s;
    tr.history = h.flatten();
    tr.action = {u(rng), u(rng)};
    const StepResult r = env.step(tr.action);
    const Observed o = observe(r.next_state, level, obs);
    h.push(o.observation);
    tr.next_full_state = r.next_state;
    tr.next_history = h.flatten();
    tr.reward = r.reward;
    tr.done = r.terminated;
    tr.occlusion_mask = o.occluded;
    buf.push(std::move(tr));
    s = r.next_state;
    if (r.terminated || r.truncated) {
      s = env.reset(rng());
      h.reset();
      h.push(observe(s, level, obs).observation);
    }
  }
  return buf;
}

EnsembleConfig small_config(int n) {
  EnsembleConfig c;
  c.size = n;
  c.hidden_units = 16;
  c.batch_size = 32;
  return c;
}

}  // namespace

TEST_CASE("disagreement hand cases") {
  const std::vector<Vector> two{vec({0, 0}), vec({1, 1})};
  CHECK(disagreement(two) == 2.0);
  const std::vector<Vector> three{vec({0}), vec({1}), vec({2})};
  CHECK(disagreement(three) == doctest::Approx(2.0).epsilon(1e-15));
  const std::vector<Vector> same(4, vec({3, -1, 2}));
  CHECK(disagreement(same) == 0.0);
  const std::vector<Vector> one{vec({1})};
  CHECK_THROWS_AS(disagreement(one), ContractViolation);
}

TEST_CASE("disagreement: brute force, permutation, scaling") {
  Rng rng(1);
  std::normal_distribution<double> g(0.0, 3.0);
  for (int n = 2; n <= 7; ++n) {
    std::vector<Vector> p(static_cast<std::size_t>(n), Vector(25));
    for (auto& v : p)
      for (Eigen::Index k = 0; k < 25; ++k) v[k] = g(rng);
    const double u = disagreement(p);
    CHECK(u >= 0.0);
    CHECK(std::abs(u - oracle::brute_force_disagreement(p)) <= 1e-12 * std::max(1.0, u));

    std::vector<Vector> shuffled = p;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(disagreement(shuffled) == doctest::Approx(u).epsilon(1e-13));

    std::vector<Vector> scaled = p;
    for (auto& v : scaled) v *= 3.0;
    CHECK(disagreement(scaled) == doctest::Approx(9.0 * u).epsilon(1e-12));
  }
}

TEST_CASE("percentiles and calibration") {
  std::vector<double> v{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  CHECK(std::abs(percentile(v, 0.1) - 0.9) <= 1e-12);
  CHECK(std::abs(percentile(v, 0.9) - 8.1) <= 1e-12);
  std::vector<double> shuffled{7, 2, 9, 0, 4, 1, 8, 3, 6, 5};
  CHECK(percentile(shuffled, 0.1) == oracle::sorted_percentile(shuffled, 0.1));

  const Calibration c = calibrate(warmup_of(v));
  CHECK(c.frozen);
  CHECK_FALSE(c.degenerate);
  CHECK(std::abs(c.u_lo - 0.9) <= 1e-12);
  CHECK(std::abs(c.u_hi - 8.1) <= 1e-12);

  const Calibration d = calibrate(warmup_of(std::vector<double>(12, 4.0)));
  CHECK(d.degenerate);
  CHECK(d.u_lo == 4.0);
  CHECK(d.u_hi == 4.0 + kCalibrationEpsilon);

  std::vector<double> skew(10, 5.0);
  skew.push_back(15.0);
  const Calibration s = calibrate(warmup_of(skew));
  CHECK(s.u_hi < 15.0);
  CHECK(s.u_hi == doctest::Approx(oracle::sorted_percentile(skew, 0.9)));

  CHECK_THROWS_AS(calibrate(warmup_of({1, 2, 3})), ContractViolation);
}

TEST_CASE("predictions match the naive forward oracle") {
  Ensemble e(25, small_config(3), 7);
  Vector h(25);
  for (Eigen::Index k = 0; k < 25; ++k) h[k] = 0.3 * static_cast<double>(k) - 2.0;
  const Action a{0.2, -0.4};
  const auto preds = e.predict(h, a);
  REQUIRE(preds.size() == 3);
  std::vector<double> x(h.data(), h.data() + 25);
  x.push_back(a.accel);
  x.push_back(a.steer);
  for (int i = 0; i < 3; ++i) {
    const auto ref = oracle::naive_forward(e.member(i), x);
    for (Eigen::Index k = 0; k < 25; ++k) CHECK(std::abs(preds[static_cast<std::size_t>(i)][k] - ref[static_cast<std::size_t>(k)]) <= 1e-12);
  }
  const std::uint64_t seeds[3] = {5, 5, 5};
  Ensemble clones(25, small_config(3), seeds);
  const auto same = clones.predict(h, a);
  CHECK(disagreement(same) == 0.0);
}

TEST_CASE("member loss gradient matches finite differences") {
  Ensemble e(25, small_config(2), 3);
  const ReplayBuffer buf = rollout(PomdpLevel::moderate(), 40, 9);
  std::vector<std::size_t> pos(12);
  for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = i * 3;
  const Matrix x = e.inputs(buf, pos);
  const Matrix y = e.targets(buf, pos);
  Vector g;
  e.member_loss(0, x, y, &g);
  const Vector fd = oracle::finite_difference(e.mutable_member(0), [&] { return e.member_loss(0, x, y, nullptr); });
  CHECK(oracle::compare_gradients(g, fd).tight_fraction() >= 0.99);
}

TEST_CASE("constant transition is learned and identical members stay identical") {
  ReplayBuffer buf(1);
  Transition t;
  t.history = Vector::LinSpaced(25, -1.0, 1.0);
  t.action = {0.5, -0.5};
  t.next_history = Vector::LinSpaced(25, 2.0, -2.0);
  buf.push(t);
  EnsembleConfig cfg = small_config(2);
  cfg.adam.learning_rate = 1e-3;
  Ensemble e(25, cfg, 11);
  Rng rng(1);
  std::vector<double> losses;
  for (int k = 0; k < 2000; ++k) losses = e.update(buf, rng);
  for (double l : losses) CHECK(l < 1e-4);

  const std::uint64_t seeds[2] = {4, 4};
  Ensemble twins(25, small_config(2), seeds);
  const std::vector<std::vector<std::size_t>> batches{{0, 0, 0}, {0, 0, 0}};
  for (int k = 0; k < 10; ++k) twins.update_on(buf, batches);
  CHECK(twins.member(0).parameters() == twins.member(1).parameters());
}

TEST_CASE("disagreement shrinks with training on a stationary distribution") {
  // linear dynamics on bounded inputs; held-out probe inputs
  Rng rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix w(25, 27);
  for (Eigen::Index r = 0; r < 25; ++r)
    for (Eigen::Index c = 0; c < 27; ++c) w(r, c) = 0.3 * u(rng);
  ReplayBuffer buf(2000);
  for (int i = 0; i < 2000; ++i) {
    Transition t;
    t.history = Vector(25);
    for (Eigen::Index k = 0; k < 25; ++k) t.history[k] = u(rng);
    t.action = {u(rng), u(rng)};
    Vector x(27);
    x << t.history, t.action.accel, t.action.steer;
    t.next_history = w * x;
    buf.push(std::move(t));
  }
  Ensemble e(25, EnsembleConfig{}, 21);
  auto probe_u = [&] {
    Rng p(99);
    double s = 0.0;
    for (int i = 0; i < 200; ++i) {
      Vector h(25);
      for (Eigen::Index k = 0; k < 25; ++k) h[k] = u(p);
      s += disagreement(e.predict(h, {u(p), u(p)}));
    }
    return s / 200.0;
  };
  Rng train(5);
  for (int k = 0; k < 1000; ++k) e.update(buf, train);
  const double early = probe_u();
  for (int k = 1000; k < 20000; ++k) e.update(buf, train);
  const double late = probe_u();
  MESSAGE("probe disagreement after 1K " << early << ", after 20K " << late);
  CHECK(late < early);
}

TEST_CASE("partial_obs targets keep occluded rows at zero") {
  const ReplayBuffer buf = rollout(PomdpLevel::severe(), 400, 4);
  Ensemble e(25, small_config(2), 1);
  std::vector<std::size_t> pos(buf.size());
  for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = i;
  const Matrix y = e.targets(buf, pos);
  long occluded = 0;
  for (std::size_t i = 0; i < pos.size(); ++i)
    for (int r = 0; r < 4; ++r)
      if (buf.at(i).occlusion_mask[static_cast<std::size_t>(r)]) {
        ++occluded;
        for (int c = 0; c < 5; ++c) CHECK(y(static_cast<Eigen::Index>(i), (r + 1) * 5 + c) == 0.0);
      }
  CHECK(occluded > 0);
}

TEST_CASE("blindness report partitions") {
  const ReplayBuffer severe = rollout(PomdpLevel::severe(), 600, 6);
  Ensemble partial(25, small_config(3), 2);
  const BlindnessReport p = blindness_report(partial, severe, 500, "severe");
  REQUIRE(p.occluded.has_value());
  CHECK(p.occluded->target_std == 0.0);
  CHECK(p.occluded->target_mean == 0.0);
  CHECK(p.visible.target_std > 0.0);
  CHECK(p.n_samples == 500);

  const BlindnessReport f = target_report(TargetMode::full_state, severe, 500, "severe");
  REQUIRE(f.occluded.has_value());
  CHECK(f.occluded->target_std > 0.0);

  const ReplayBuffer clear = rollout(PomdpLevel::none(), 300, 7);
  const BlindnessReport n = blindness_report(partial, clear, 200, "none");
  CHECK(n.no_occlusion_observed());
  const auto j = to_json(n);
  CHECK(j.contains("visible"));
  CHECK(j["mode"] == "partial_obs");
}
