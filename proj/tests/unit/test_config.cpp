#include <doctest.h>

#include <set>

#include "bagsac/campaign.hpp"
#include "bagsac/config.hpp"
#include "bagsac/errors.hpp"

using namespace bagsac;

TEST_CASE("defaults validate and round-trip through INI text") {
  RunConfig c;
  c.validate();
  const RunConfig back = parse_config(c.to_ini());
  CHECK(back.to_ini() == c.to_ini());
  CHECK(back.hash() == c.hash());
  CHECK(c.hash().size() == 16);
}

TEST_CASE("every section parses") {
  const RunConfig c = parse_config(R"(
[method]
name = gsac_fixed
lambda = 0.01
[pomdp]
level = severe
history_length = 5
[schedule]
seed = 7
total_steps = 3000
[env]
lanes = 3
[sac]
alpha_mode = auto
gamma = 0.95
[guidance]
warmup_steps = 200
[ensemble]
size = 3
target_mode = full_state
learning_rate = 1e-4
)");
  CHECK(c.method == Method::gsac_fixed);
  CHECK(c.guidance.fixed_lambda == 0.01);
  CHECK(c.level.name == "severe");
  CHECK(c.history_length == 5);
  CHECK(c.seed == 7);
  CHECK(c.env.lanes == 3);
  CHECK(c.sac.alpha_mode == AlphaMode::automatic);
  CHECK(c.guidance.warmup_steps == 200);
  CHECK(c.ensemble.target_mode == TargetMode::full_state);
  CHECK(c.ensemble.adam.learning_rate == 1e-4);
  CHECK(c.method_label() == "gsac_fixed_0.01");
  CHECK(parse_config(c.to_ini()).hash() == c.hash());
}

TEST_CASE("changing a value changes the hash") {
  RunConfig a, b;
  b.seed = 43;
  CHECK(a.hash() != b.hash());
}

TEST_CASE("unknown keys, sections and bad values are rejected") {
  CHECK_THROWS_AS(parse_config("[sac]\nlearning_rat = 1e-3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[optimizer]\nlr = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[sac]\ngamma = fast\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[method]\nname = ppo\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[pomdp]\nlevel = extreme\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[method]\nname = ba_gsac\nlambda = 0.3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[method]\nname = gsac_threshold\n[ensemble]\nsize = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[guidance]\nlambda_min = 0.6\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/run.ini"), ConfigError);
}

TEST_CASE("custom noise turns the level into custom") {
  const RunConfig c = parse_config("[pomdp]\nlevel = mild\nnoise_sigma = 0.07\n");
  CHECK(c.level.name == "custom");
  CHECK(c.level.noise_sigma == 0.07);
}

TEST_CASE("schedules per method") {
  RunConfig c;
  c.method = Method::vanilla_sac;
  CHECK(std::get<FixedLambda>(c.schedule().kind).value == 0.0);
  c.method = Method::linear_decay;
  c.total_steps = 20000;
  CHECK(std::get<LinearDecayLambda>(c.schedule().kind).horizon == 20000);
  c.method = Method::ba_gsac;
  c.ensemble.size = 1;
  CHECK(std::get<AdaptiveLambda>(c.schedule().kind).single_member);
}

TEST_CASE("campaign presets") {
  const MatrixSpec main = matrix_preset("main");
  CHECK(main.run_count() == 45);
  const auto runs = plan_runs(main);
  CHECK(runs.size() == 45);
  std::set<std::string> names;
  for (const auto& r : runs) names.insert(r.name);
  CHECK(names.size() == 45);

  const auto n = plan_runs(matrix_preset("ensemble_size"));
  std::set<int> sizes;
  for (const auto& r : n) sizes.insert(r.config.ensemble.size);
  CHECK(sizes == std::set<int>{1, 3, 5, 7});
  for (const auto& r : n) CHECK(r.config.level.name == "moderate");

  const auto w = plan_runs(matrix_preset("warmup"));
  for (const auto& r : w) CHECK(r.config.level.name == "severe");
  CHECK_THROWS_AS(matrix_preset("everything"), ConfigError);

  const MatrixSpec custom = parse_matrix("[matrix]\nmethods = ba_gsac, gsac_fixed:0.1\nlevels = mild\nseeds = 1, 2\n[schedule]\ntotal_steps = 100\n");
  const auto cr = plan_runs(custom);
  CHECK(cr.size() == 4);
  CHECK(cr[0].config.total_steps == 100);
}
