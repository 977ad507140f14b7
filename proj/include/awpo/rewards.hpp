#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "awpo/toolgraph.hpp"

namespace awpo {

// Rule-based score for one (truth, prediction) pair: a binary format check
// plus a normalized match over tool names, parameter names and parameter
// values. total = s_format + s_exec lies in [0, 2].
struct OutcomeReward {
  double s_format = 0.0;  // 0 or 1
  double r_name = 0.0;    // Jaccard of name sets, in [0, 1]
  double r_para = 0.0;    // summed per-call parameter-name Jaccard, <= |T|
  double r_value = 0.0;   // count of exact value matches, <= total truth params
  double s_exec = 0.0;    // (r_name + r_para + r_value) / (1 + |T| + #params)
  double total = 0.0;
};

// Total function; either graph may be empty. When both name sets are empty
// r_name is 1 (predicting no call when none is required is correct). Calls
// sharing a name are matched in order of appearance; unmatched truth calls
// score zero but still count in the denominator.
OutcomeReward outcome_reward(const ToolGraph& truth, const ToolGraph& pred,
                             bool format_valid);

// Judge verdict over the rubric dimensions. score is the tier-quantized value
// in {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}; raw_score is the pre-quantization
// weighted sum (diagnostic, not part of the wire format).
struct ReasoningReward {
  double score = 0.0;
  double raw_score = 0.0;
  std::map<std::string, double> dimension_scores;
  int tier = 6;  // 1 (best) .. 6 (worst)
};

struct JudgeRequest {
  std::string id;  // wire correlation id; also salts per-sample judge noise
  std::string prompt;
  std::string reasoning;
  std::string reference_reasoning;
  ToolGraph truth;
  ToolGraph prediction;
};

nlohmann::json judge_request_to_json(const JudgeRequest& req);
nlohmann::json reasoning_reward_to_json(const std::string& id,
                                        const ReasoningReward& reward);
// Throws InputError on schema violations; clamps score into [0, 1].
ReasoningReward reasoning_reward_from_json(const nlohmann::json& j);

class JudgeScorer {
 public:
  virtual ~JudgeScorer() = default;
  virtual ReasoningReward score(const JudgeRequest& req) = 0;
  // Default scores sequentially; remote judges override with concurrent I/O.
  virtual std::vector<ReasoningReward> score_batch(
      const std::vector<JudgeRequest>& reqs);
};

// Rubric dimensions in weight order: reasoning path, tool selection,
// parameter setting, execution strategy.
inline constexpr std::array<std::string_view, 4> kRubricDimensions = {
    "reasoning_path", "tool_selection", "parameter_setting",
    "execution_strategy"};
inline constexpr std::array<double, 4> kRubricWeights = {0.35, 0.30, 0.25, 0.10};

// Nearest of {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}; ties break upward.
double quantize_tier(double raw);
// 1.0 -> tier 1 ... 0.0 -> tier 6 (input must be a quantized value)
int tier_index(double quantized);

struct MockJudgeOptions {
  std::uint64_t seed = 0;
  double noise_std = 0.0;       // Gaussian on the pre-tier score
  double flip_fraction = 0.0;   // fraction of requests scored as 1 - raw
};

// Deterministic judge stand-in: dimension scores come from measurable proxies
// (token similarity to the reference rationale and the outcome-reward
// components), weighted, optionally perturbed by seeded noise derived from the
// request content, clamped and tier-quantized. Pure given (request, options).
class MockJudge final : public JudgeScorer {
 public:
  explicit MockJudge(MockJudgeOptions opt = {}) : opt_(opt) {}

  ReasoningReward score(const JudgeRequest& req) override;

  // Jaccard similarity over lowercased alphanumeric token sets.
  static double token_similarity(std::string_view a, std::string_view b);
  static double rubric_weighted(const std::array<double, 4>& dims);

 private:
  MockJudgeOptions opt_;
};

class ConstantJudge final : public JudgeScorer {
 public:
  explicit ConstantJudge(double score);
  ReasoningReward score(const JudgeRequest& req) override;

 private:
  ReasoningReward reward_;
};

inline double mixed_reward(const OutcomeReward& out, const ReasoningReward& r) {
  return out.total + r.score;
}

}  // namespace awpo
