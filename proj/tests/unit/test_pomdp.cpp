#include <doctest.h>

#include <cmath>

#include "bagsac/errors.hpp"
#include "bagsac/pomdp.hpp"

using namespace bagsac;

namespace {

FullState busy_state() {
  Features f{};
  const double rows[5][5] = {{1, 0, 6, 20, 0.1}, {1, 12, 0, -3, 0}, {1, -8, 4, 2, 0}, {1, 30, -4, 1, 0}, {1, -40, 8, 5, 0}};
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c) f[static_cast<std::size_t>(r * 5 + c)] = rows[r][c];
  return FullState(f);
}

// 2x2 chi-squared statistic for independence of two binary variables.
double chi_squared(const long n[2][2]) {
  const double total = static_cast<double>(n[0][0] + n[0][1] + n[1][0] + n[1][1]);
  double chi = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double row = static_cast<double>(n[i][0] + n[i][1]);
      const double col = static_cast<double>(n[0][j] + n[1][j]);
      const double e = row * col / total;
      chi += (static_cast<double>(n[i][j]) - e) * (static_cast<double>(n[i][j]) - e) / e;
    }
  return chi;
}

}  // namespace

TEST_CASE("level presets") {
  CHECK(PomdpLevel::mild().noise_sigma == 0.02);
  CHECK(PomdpLevel::mild().occlusion_rate == 0.10);
  CHECK(PomdpLevel::moderate().noise_sigma == 0.05);
  CHECK(PomdpLevel::moderate().occlusion_rate == 0.25);
  CHECK(PomdpLevel::severe().noise_sigma == 0.10);
  CHECK(PomdpLevel::severe().occlusion_rate == 0.50);
  CHECK(PomdpLevel::from_name("none").occlusion_rate == 0.0);
  CHECK_THROWS_AS(PomdpLevel::from_name("extreme"), ConfigError);
  CHECK_THROWS_AS(PomdpLevel::custom(0.1, 1.5), ConfigError);
}

TEST_CASE("level none returns the state unchanged") {
  Rng rng(1);
  const FullState s = busy_state();
  const Observed o = observe(s, PomdpLevel::none(), rng);
  CHECK(o.observation.features == s.features());
}

TEST_CASE("full occlusion zeroes every neighbour row but keeps the ego row") {
  Rng rng(2);
  const FullState s = busy_state();
  const Observed o = observe(s, PomdpLevel::custom(0.1, 1.0), rng);
  for (int i = 5; i < 25; ++i) CHECK(o.observation.features[static_cast<std::size_t>(i)] == 0.0);
  CHECK(o.observation.features[0] == 1.0);
  CHECK(o.observation.features[2] != 6.0);  // noisy
}

TEST_CASE("severe level statistics and zero structure") {
  Rng rng(3);
  const FullState s = busy_state();
  const PomdpLevel level = PomdpLevel::severe();
  const int n = 100000;
  long hidden = 0, rows = 0;
  double ss = 0.0;
  long count = 0;
  for (int k = 0; k < n; ++k) {
    const Observed o = observe(s, level, rng);
    for (int r = 1; r <= 4; ++r) {
      ++rows;
      const std::size_t base = static_cast<std::size_t>(r * 5);
      if (o.occluded[static_cast<std::size_t>(r - 1)]) {
        ++hidden;
        for (int c = 0; c < 5; ++c) CHECK(o.observation.features[base + static_cast<std::size_t>(c)] == 0.0);
      } else {
        CHECK(o.observation.features[base] == 1.0);
        for (int c = 1; c < 5; ++c) {
          const double d = o.observation.features[base + static_cast<std::size_t>(c)] - s.features()[base + static_cast<std::size_t>(c)];
          ss += d * d;
          ++count;
        }
      }
    }
  }
  const double freq = static_cast<double>(hidden) / static_cast<double>(rows);
  const double sd = std::sqrt(ss / static_cast<double>(count));
  CHECK(std::abs(freq - 0.5) <= 0.01);
  CHECK(std::abs(sd - 0.1) <= 0.005);
}

TEST_CASE("occlusion events are independent across rows and steps") {
  Rng rng(4);
  const FullState s = busy_state();
  long rows[2][2] = {{0, 0}, {0, 0}}, steps[2][2] = {{0, 0}, {0, 0}};
  bool prev = false;
  for (int k = 0; k < 100000; ++k) {
    const Observed o = observe(s, PomdpLevel::moderate(), rng);
    ++rows[o.occluded[0]][o.occluded[1]];
    if (k > 0) ++steps[prev][o.occluded[0]];
    prev = o.occluded[0];
  }
  CHECK(chi_squared(rows) < 6.635);   // p > 0.01 at one degree of freedom
  CHECK(chi_squared(steps) < 6.635);
}

TEST_CASE("absent rows stay zero and presence never gets noise") {
  Rng rng(5);
  Features f{};
  f[0] = 1.0;
  f[2] = 6.0;
  f[3] = 20.0;
  const Observed o = observe(FullState(f), PomdpLevel::custom(0.5, 0.0), rng);
  for (int i = 5; i < 25; ++i) CHECK(o.observation.features[static_cast<std::size_t>(i)] == 0.0);
  CHECK(o.observation.features[0] == 1.0);
}

TEST_CASE("same seed gives the same mask and noise") {
  Rng a(7), b(7);
  const FullState s = busy_state();
  for (int k = 0; k < 100; ++k) {
    const Observed oa = observe(s, PomdpLevel::moderate(), a);
    const Observed ob = observe(s, PomdpLevel::moderate(), b);
    CHECK(oa.observation.features == ob.observation.features);
    CHECK(oa.occluded == ob.occluded);
  }
}

namespace {
Observation filled(double v) {
  Observation o;
  o.features.fill(v);
  return o;
}
}  // namespace

TEST_CASE("history window") {
  ObservationHistory k1(1);
  k1.push(filled(1));
  k1.push(filled(2));
  CHECK(k1.flatten() == Vector::Constant(25, 2.0));

  ObservationHistory h(3);
  CHECK(h.flatten() == Vector::Zero(75));
  h.push(filled(1));
  Vector expected = Vector::Zero(75);
  expected.tail(25).setConstant(1.0);
  CHECK(h.flatten() == expected);
  h.push(filled(2));
  h.push(filled(3));
  h.push(filled(4));
  CHECK(h.flatten().head(25) == Vector::Constant(25, 2.0));
  CHECK(h.flatten().segment(25, 25) == Vector::Constant(25, 3.0));
  CHECK(h.flatten().tail(25) == Vector::Constant(25, 4.0));
  CHECK(h.newest().features[0] == 4.0);

  h.reset();
  CHECK(h.flatten() == Vector::Zero(75));
  CHECK(ObservationHistory(5).flatten().size() == 125);
  CHECK_THROWS_AS(ObservationHistory(0), ContractViolation);
}

TEST_CASE("occluded rows are zero inside every history slot") {
  Rng rng(8);
  const FullState s = busy_state();
  ObservationHistory h(3);
  std::vector<OcclusionMask> masks;
  for (int k = 0; k < 3; ++k) {
    const Observed o = observe(s, PomdpLevel::severe(), rng);
    masks.push_back(o.occluded);
    h.push(o.observation);
  }
  const Vector flat = h.flatten();
  for (int slot = 0; slot < 3; ++slot)
    for (int r = 0; r < 4; ++r)
      if (masks[static_cast<std::size_t>(slot)][static_cast<std::size_t>(r)])
        for (int c = 0; c < 5; ++c) CHECK(flat[slot * 25 + (r + 1) * 5 + c] == 0.0);
}
