#include "awpo/rewards.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "awpo/common.hpp"

namespace awpo {

namespace {

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& x : a) inter += b.count(x);
  const std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::set<std::string> param_names(const ToolCall& call) {
  std::set<std::string> names;
  for (const auto& [key, value] : call.params.items()) names.insert(key);
  return names;
}

}  // namespace

OutcomeReward outcome_reward(const ToolGraph& truth, const ToolGraph& pred,
                             bool format_valid) {
  OutcomeReward r;
  r.s_format = format_valid ? 1.0 : 0.0;
  r.r_name = jaccard(name_set(truth), name_set(pred));

  // Truth calls are matched to same-named prediction calls in order of
  // appearance; a truth call without a partner contributes nothing.
  std::map<std::string, std::vector<const ToolCall*>> pred_by_name;
  for (const auto& call : pred.calls) pred_by_name[call.name].push_back(&call);
  std::map<std::string, std::size_t> next_match;

  std::size_t total_params = 0;
  for (const auto& call : truth.calls) {
    total_params += call.params.size();
    const ToolCall* match = nullptr;
    if (const auto it = pred_by_name.find(call.name); it != pred_by_name.end()) {
      std::size_t& cursor = next_match[call.name];
      if (cursor < it->second.size()) match = it->second[cursor++];
    }
    if (!match) continue;
    r.r_para += jaccard(param_names(call), param_names(*match));
    for (const auto& [key, value] : call.params.items()) {
      const auto pit = match->params.find(key);
      if (pit != match->params.end() && *pit == value) r.r_value += 1.0;
    }
  }

  const double denom =
      1.0 + static_cast<double>(truth.size()) + static_cast<double>(total_params);
  r.s_exec = (r.r_name + r.r_para + r.r_value) / denom;
  r.total = r.s_format + r.s_exec;
  return r;
}

std::vector<ReasoningReward> JudgeScorer::score_batch(
    const std::vector<JudgeRequest>& reqs) {
  std::vector<ReasoningReward> out;
  out.reserve(reqs.size());
  for (const auto& req : reqs) out.push_back(score(req));
  return out;
}

nlohmann::json judge_request_to_json(const JudgeRequest& req) {
  return {{"id", req.id},
          {"prompt", req.prompt},
          {"reasoning", req.reasoning},
          {"reference_reasoning", req.reference_reasoning},
          {"truth", graph_to_json(req.truth)},
          {"prediction", graph_to_json(req.prediction)}};
}

nlohmann::json reasoning_reward_to_json(const std::string& id,
                                        const ReasoningReward& reward) {
  return {{"id", id},
          {"score", reward.score},
          {"dimension_scores", reward.dimension_scores},
          {"tier", reward.tier}};
}

ReasoningReward reasoning_reward_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("score") || !j["score"].is_number())
    throw InputError("judge response: missing numeric \"score\"");
  ReasoningReward r;
  r.score = std::clamp(j["score"].get<double>(), 0.0, 1.0);
  r.raw_score = r.score;
  if (const auto it = j.find("dimension_scores");
      it != j.end() && it->is_object()) {
    for (const auto& [key, value] : it->items()) {
      if (!value.is_number())
        throw InputError("judge response: dimension score must be numeric");
      r.dimension_scores[key] = value.get<double>();
    }
  }
  if (const auto it = j.find("tier"); it != j.end() && it->is_number_integer())
    r.tier = it->get<int>();
  else
    r.tier = tier_index(quantize_tier(r.score));
  return r;
}

double quantize_tier(double raw) {
  // 5 * raw rounds to the nearest tier step; half-way cases round up.
  const double scaled = raw * 5.0;
  double snapped = std::floor(scaled + 0.5);
  snapped = std::clamp(snapped, 0.0, 5.0);
  return snapped / 5.0;
}

int tier_index(double quantized) {
  return 6 - static_cast<int>(std::lround(quantized * 5.0));
}

double MockJudge::token_similarity(std::string_view a, std::string_view b) {
  const auto tokenize = [](std::string_view text) {
    std::set<std::string> tokens;
    std::string current;
    for (char c : text) {
      if (std::isalnum(static_cast<unsigned char>(c))) {
        current.push_back(
            static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      } else if (!current.empty()) {
        tokens.insert(current);
        current.clear();
      }
    }
    if (!current.empty()) tokens.insert(current);
    return tokens;
  };
  const auto ta = tokenize(a);
  const auto tb = tokenize(b);
  if (ta.empty() && tb.empty()) return 1.0;
  if (ta.empty() || tb.empty()) return 0.0;
  std::size_t inter = 0;
  for (const auto& t : ta) inter += tb.count(t);
  return static_cast<double>(inter) /
         static_cast<double>(ta.size() + tb.size() - inter);
}

double MockJudge::rubric_weighted(const std::array<double, 4>& dims) {
  double s = 0.0;
  for (std::size_t i = 0; i < dims.size(); ++i) s += kRubricWeights[i] * dims[i];
  return s;
}

ReasoningReward MockJudge::score(const JudgeRequest& req) {
  const OutcomeReward out = outcome_reward(req.truth, req.prediction, true);
  std::array<double, 4> dims{};
  dims[0] = token_similarity(req.reasoning, req.reference_reasoning);
  dims[1] = out.r_name;
  dims[2] = req.truth.empty() ? 1.0
                              : out.r_para / static_cast<double>(req.truth.size());
  dims[3] = out.s_exec;

  double raw = rubric_weighted(dims);

  // Perturbations are derived from the request content so identical
  // (request, seed) pairs always score identically, in any call order.
  if (opt_.flip_fraction > 0.0 || opt_.noise_std > 0.0) {
    const std::uint64_t content_hash =
        fnv1a64(judge_request_to_json(req).dump());
    Rng rng(mix_seed(opt_.seed, content_hash));
    if (opt_.flip_fraction > 0.0 && rng.uniform01() < opt_.flip_fraction)
      raw = 1.0 - raw;
    if (opt_.noise_std > 0.0) raw += opt_.noise_std * rng.normal();
  }
  raw = std::clamp(raw, 0.0, 1.0);

  ReasoningReward reward;
  reward.raw_score = raw;
  reward.score = quantize_tier(raw);
  reward.tier = tier_index(reward.score);
  for (std::size_t i = 0; i < dims.size(); ++i)
    reward.dimension_scores[std::string(kRubricDimensions[i])] = dims[i];
  return reward;
}

ConstantJudge::ConstantJudge(double score) {
  reward_.raw_score = std::clamp(score, 0.0, 1.0);
  reward_.score = quantize_tier(reward_.raw_score);
  reward_.tier = tier_index(reward_.score);
  for (const auto dim : kRubricDimensions)
    reward_.dimension_scores[std::string(dim)] = reward_.raw_score;
}

ReasoningReward ConstantJudge::score(const JudgeRequest&) { return reward_; }

}  // namespace awpo
