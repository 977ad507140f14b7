#include <filesystem>
#include <fstream>

#include "awpo/config.hpp"
#include "doctest.h"

using namespace awpo;

namespace {

nlohmann::json minimal_config() {
  return {{"algorithm", "awpo"},
          {"iterations", 20},
          {"out_dir", "runs/x"},
          {"hyper", {{"k", 4}, {"seed", 9}}},
          {"env", {{"prompts", 5}, {"templates_per_prompt", 3}}}};
}

}  // namespace

TEST_CASE("config: defaults fill unspecified fields") {
  const auto cfg = RunConfig::from_json(minimal_config());
  CHECK(cfg.trainer.algorithm == Algorithm::awpo);
  CHECK(cfg.trainer.iterations == 20);
  CHECK(cfg.trainer.hyper.k == 4);
  CHECK(cfg.trainer.hyper.eps_mix == 0.5);  // default preserved
  CHECK(cfg.trainer.env.prompts == 5);
  CHECK(cfg.theory.trials == 100);
}

TEST_CASE("config: unknown keys are named in the diagnostic") {
  auto j = minimal_config();
  j["hyper"]["typo_key"] = 1;
  CHECK_THROWS_WITH_AS(RunConfig::from_json(j),
                       doctest::Contains("hyper.typo_key"), ConfigError);

  auto top = minimal_config();
  top["iterationz"] = 3;
  CHECK_THROWS_WITH_AS(RunConfig::from_json(top),
                       doctest::Contains("iterationz"), ConfigError);
}

TEST_CASE("config: type and range errors name the offending key") {
  auto j = minimal_config();
  j["hyper"]["k"] = "eight";
  CHECK_THROWS_WITH_AS(RunConfig::from_json(j), doctest::Contains("hyper.k"),
                       ConfigError);

  auto bad_range = minimal_config();
  bad_range["hyper"]["alpha_prio"] = 0.5;  // must exceed alpha_base
  CHECK_THROWS_WITH_AS(RunConfig::from_json(bad_range),
                       doctest::Contains("hyper.alpha_prio"), ConfigError);

  auto bad_algo = minimal_config();
  bad_algo["algorithm"] = "ppo";
  CHECK_THROWS_AS(RunConfig::from_json(bad_algo), ConfigError);

  auto k1 = minimal_config();
  k1["hyper"]["k"] = 1;  // group statistics need dispersion
  CHECK_THROWS_WITH_AS(RunConfig::from_json(k1), doctest::Contains("hyper.k"),
                       ConfigError);
}

TEST_CASE("config: dotted overrides") {
  auto j = minimal_config();
  apply_override(j, "algorithm=grpo_outcome");
  apply_override(j, "hyper.learning_rate=0.05");
  apply_override(j, "env.seed=123");
  apply_override(j, "out_dir=runs/other");
  const auto cfg = RunConfig::from_json(j);
  CHECK(cfg.trainer.algorithm == Algorithm::grpo_outcome);
  CHECK(cfg.trainer.hyper.learning_rate == 0.05);
  CHECK(cfg.trainer.env.seed == 123);
  CHECK(cfg.out_dir == "runs/other");

  CHECK_THROWS_AS(apply_override(j, "no_equals_sign"), ConfigError);
}

TEST_CASE("config: judge endpoint honors the environment override") {
  namespace fs = std::filesystem;
  fs::create_directories(AWPO_TEST_TMP);
  const auto path = (fs::path(AWPO_TEST_TMP) / "config_env.json").string();
  auto j = minimal_config();
  j["judge"] = {{"kind", "mock"}, {"endpoint", "http://file.example:1/judge"}};
  {
    std::ofstream out(path);
    out << j.dump(2);
  }
  setenv("AWPO_JUDGE_ENDPOINT", "http://env.example:2/judge", 1);
  const auto cfg = RunConfig::load(path);
  unsetenv("AWPO_JUDGE_ENDPOINT");
  CHECK(cfg.trainer.judge.remote.endpoint == "http://env.example:2/judge");
}

TEST_CASE("config: load applies overrides and round-trips") {
  namespace fs = std::filesystem;
  fs::create_directories(AWPO_TEST_TMP);
  const auto path = (fs::path(AWPO_TEST_TMP) / "config.json").string();
  {
    std::ofstream out(path);
    out << minimal_config().dump(2);
  }
  const auto cfg = RunConfig::load(path, {"iterations=7", "hyper.epochs=2"});
  CHECK(cfg.trainer.iterations == 7);
  CHECK(cfg.trainer.hyper.epochs == 2);

  // to_json -> from_json is stable
  const auto cfg2 = RunConfig::from_json(cfg.to_json());
  CHECK(cfg2.to_json() == cfg.to_json());

  CHECK_THROWS_AS(RunConfig::load("/nonexistent/config.json"), ConfigError);
}
