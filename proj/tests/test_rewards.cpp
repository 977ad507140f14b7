#include <cmath>

#include "awpo/rewards.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace awpo;

namespace {

ToolGraph weather_truth() {
  ToolGraph g;
  ToolCall call;
  call.name = "get_weather";
  call.params["city"] = "Paris";
  call.params["unit"] = "C";
  g.calls.push_back(call);
  return g;
}

}  // namespace

TEST_CASE("outcome: perfect match saturates every ratio") {
  const auto truth = weather_truth();
  const auto r = outcome_reward(truth, truth, true);
  CHECK(r.s_format == 1.0);
  CHECK(r.r_name == 1.0);
  CHECK(r.s_exec == 1.0);
  CHECK(r.total == 2.0);
}

TEST_CASE("outcome: one wrong unit on the weather call") {
  const auto truth = weather_truth();
  auto pred = truth;
  pred.calls[0].params["unit"] = "F";
  const auto r = outcome_reward(truth, pred, true);
  CHECK(r.r_name == 1.0);
  CHECK(r.r_para == 1.0);
  CHECK(r.r_value == 1.0);
  // denominator 1 + |T| + #params = 1 + 1 + 2 = 4
  CHECK(r.s_exec == 0.75);
  CHECK(r.total == 1.75);
}

TEST_CASE("outcome: empty prediction against non-empty truth") {
  const auto r = outcome_reward(weather_truth(), {}, false);
  CHECK(r.s_format == 0.0);
  CHECK(r.r_name == 0.0);
  CHECK(r.r_para == 0.0);
  CHECK(r.r_value == 0.0);
  CHECK(r.s_exec == 0.0);
  CHECK(r.total == 0.0);
}

TEST_CASE("outcome: empty truth cases") {
  // both empty: predicting no call when none is required is correct
  const auto both = outcome_reward({}, {}, true);
  CHECK(both.r_name == 1.0);
  CHECK(both.s_exec == 1.0);  // denominator collapses to 1
  CHECK(both.total == 2.0);

  ToolGraph pred;
  pred.calls.push_back({"f", nlohmann::json::object()});
  const auto spurious = outcome_reward({}, pred, true);
  CHECK(spurious.r_name == 0.0);
  CHECK(spurious.s_exec == 0.0);
}

TEST_CASE("outcome: duplicate names match in order of appearance") {
  ToolGraph truth;
  ToolCall first{"f", nlohmann::json::object()};
  first.params["a"] = 1;
  ToolCall second{"f", nlohmann::json::object()};
  second.params["b"] = 2;
  truth.calls = {first, second};

  // prediction swaps the two bodies: the first truth call pairs with the
  // first predicted "f", so both param sets mismatch
  ToolGraph swapped;
  swapped.calls = {second, first};
  const auto r = outcome_reward(truth, swapped, true);
  CHECK(r.r_name == 1.0);
  CHECK(r.r_para == 0.0);
  CHECK(r.r_value == 0.0);

  // a single predicted "f" pairs with the first truth call only
  ToolGraph single;
  single.calls = {first};
  const auto r2 = outcome_reward(truth, single, true);
  CHECK(r2.r_para == 1.0);
  CHECK(r2.r_value == 1.0);
}

TEST_CASE("outcome: monotone in added correct values") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto truth = oracles::random_graph(rng);
    auto pred = oracles::random_graph(rng);
    const auto before = outcome_reward(truth, pred, true);

    // copy one missing truth value into the matched prediction call
    bool changed = false;
    for (std::size_t i = 0; i < truth.calls.size() && !changed; ++i) {
      const auto& tc = truth.calls[i];
      for (auto& pc : pred.calls) {
        if (pc.name != tc.name) continue;
        for (const auto& [key, value] : tc.params.items()) {
          if (!pc.params.contains(key) || pc.params[key] != value) {
            pc.params[key] = value;
            changed = true;
            break;
          }
        }
        break;
      }
    }
    if (!changed) continue;
    const auto after = outcome_reward(truth, pred, true);
    CHECK(after.r_value >= before.r_value - 1e-12);
    CHECK(after.s_exec >= before.s_exec - 1e-12);
  }
}

TEST_CASE("outcome: self-match and range properties over random graphs") {
  Rng rng(6);
  for (int trial = 0; trial < 300; ++trial) {
    const auto truth = oracles::random_graph(rng);
    CHECK(outcome_reward(truth, truth, true).s_exec == doctest::Approx(1.0));

    const auto pred = oracles::random_graph(rng);
    const auto r = outcome_reward(truth, pred, rng.uniform01() < 0.5);
    CHECK(r.s_exec >= 0.0);
    CHECK(r.s_exec <= 1.0);
    CHECK(r.total >= 0.0);
    CHECK(r.total <= 2.0);
    CHECK(r.r_para <= static_cast<double>(truth.size()) + 1e-12);
  }
}

TEST_CASE("outcome equals the brute-force scorer on random pairs") {
  Rng rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    const auto truth = oracles::random_graph(rng);
    const auto pred = oracles::random_graph(rng);
    const bool valid = rng.uniform01() < 0.7;
    const auto fast = outcome_reward(truth, pred, valid);
    const auto slow = oracles::brute_force_outcome(truth, pred, valid);
    CHECK(fast.r_name == slow.r_name);
    CHECK(fast.r_para == slow.r_para);
    CHECK(fast.r_value == slow.r_value);
    CHECK(fast.s_exec == slow.s_exec);
    CHECK(fast.total == slow.total);
  }
}

TEST_CASE("tier quantization: nearest value, ties upward") {
  CHECK(quantize_tier(0.0) == 0.0);
  CHECK(quantize_tier(1.0) == 1.0);
  CHECK(quantize_tier(0.65) == 0.6);
  CHECK(quantize_tier(0.7) == 0.8);   // tie point rounds up
  CHECK(quantize_tier(0.09) == 0.0);
  CHECK(quantize_tier(0.1) == 0.2);   // tie point rounds up
  CHECK(tier_index(1.0) == 1);
  CHECK(tier_index(0.8) == 2);
  CHECK(tier_index(0.0) == 6);
}

TEST_CASE("mock judge: identical request scores top tier") {
  const auto truth = weather_truth();
  JudgeRequest req;
  req.id = "r1";
  req.prompt = "what is the weather";
  req.reasoning = "Check the city then call get_weather.";
  req.reference_reasoning = req.reasoning;
  req.truth = truth;
  req.prediction = truth;

  MockJudge judge;
  const auto reward = judge.score(req);
  for (const auto& [dim, value] : reward.dimension_scores) CHECK(value == 1.0);
  CHECK(reward.score == 1.0);
  CHECK(reward.tier == 1);
}

TEST_CASE("mock judge: rubric weights") {
  CHECK(MockJudge::rubric_weighted({1.0, 1.0, 0.0, 0.0}) ==
        doctest::Approx(0.65));
  CHECK(MockJudge::rubric_weighted({1.0, 1.0, 1.0, 1.0}) == doctest::Approx(1.0));
}

TEST_CASE("mock judge: empty reasoning with empty prediction bottoms out") {
  JudgeRequest req;
  req.reasoning = "";
  req.reference_reasoning = "Call f with x set to 1.";
  req.truth = weather_truth();
  req.prediction = {};

  MockJudge judge;
  const auto reward = judge.score(req);
  CHECK(reward.score == 0.0);
  CHECK(reward.tier == 6);
}

TEST_CASE("mock judge: deterministic per (request, seed), sensitive to both") {
  JudgeRequest req;
  req.id = "sample-1";
  req.reasoning = "Call get_weather with city set to Paris.";
  req.reference_reasoning = "Call get_weather with city set to Paris and unit.";
  req.truth = weather_truth();
  req.prediction = weather_truth();

  MockJudge noisy({/*seed=*/9, /*noise_std=*/0.3, /*flip_fraction=*/0.2});
  const auto a = noisy.score(req);
  const auto b = noisy.score(req);
  CHECK(a.score == b.score);
  CHECK(a.raw_score == b.raw_score);
  CHECK(a.tier == b.tier);

  // a different id re-salts the perturbation
  auto req2 = req;
  req2.id = "sample-2";
  bool any_difference = false;
  for (int i = 0; i < 20 && !any_difference; ++i) {
    req2.id = "sample-" + std::to_string(i + 2);
    any_difference = noisy.score(req2).raw_score != a.raw_score;
  }
  CHECK(any_difference);

  MockJudge other_seed({/*seed=*/10, /*noise_std=*/0.3, /*flip_fraction=*/0.2});
  // scores stay clamped under noise
  for (int i = 0; i < 50; ++i) {
    req.id = "s" + std::to_string(i);
    const auto r = other_seed.score(req);
    CHECK(r.score >= 0.0);
    CHECK(r.score <= 1.0);
  }
}

TEST_CASE("mixed reward corners") {
  OutcomeReward top;
  top.total = 2.0;
  ReasoningReward best;
  best.score = 1.0;
  CHECK(mixed_reward(top, best) == 3.0);

  OutcomeReward zero;
  ReasoningReward worst;
  CHECK(mixed_reward(zero, worst) == 0.0);

  OutcomeReward mid;
  mid.total = 1.75;
  ReasoningReward part;
  part.score = 0.65;  // pre-quantization score from the rubric example
  CHECK(mixed_reward(mid, part) == doctest::Approx(2.40));
}

TEST_CASE("constant judge and wire schema") {
  ConstantJudge judge(0.61);
  const auto r = judge.score({});
  CHECK(r.score == 0.6);  // quantized
  const auto j = reasoning_reward_to_json("id-7", r);
  CHECK(j["id"] == "id-7");
  CHECK(j["score"] == 0.6);
  CHECK(j.contains("dimension_scores"));
  CHECK(j.contains("tier"));

  // clamping on the way in
  const auto parsed = reasoning_reward_from_json(
      {{"id", "x"}, {"score", 1.7}, {"tier", 1}});
  CHECK(parsed.score == 1.0);
  CHECK_THROWS_AS(reasoning_reward_from_json({{"id", "x"}}), InputError);
}
