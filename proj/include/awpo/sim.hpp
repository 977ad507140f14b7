#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "awpo/advantage.hpp"
#include "awpo/judge_client.hpp"
#include "awpo/rewards.hpp"
#include "awpo/toolgraph.hpp"

namespace awpo {

// One candidate response a policy can emit for a prompt.
struct ActionTemplate {
  ToolGraph prediction;
  bool format_valid = true;
  double latent_quality = 1.0;  // drives the canned rationale text
  std::string rationale;
  OutcomeReward outcome;  // precomputed against the owning task's truth
};

struct SyntheticTask {
  std::string prompt_id;
  std::string prompt;
  ToolGraph truth;
  std::string reference_reasoning;
  std::vector<ActionTemplate> templates;
  std::size_t optimal_index = 0;  // the unique template with total == 2

  nlohmann::json to_json() const;
};

// Difficulty bands are defined on the expected outcome total of a uniform
// policy over the task's templates: hard below band_low, medium strictly
// inside (band_low, band_high), easy above band_high, and saturated tasks
// keep every template at or above band_saturated so the group mean can never
// drop below the saturation gate. Band targets are best-effort for tiny M
// (e.g. M=2 cannot produce a hard mean), hard invariants always hold: exactly
// one template scores 2 and at least two distinct totals exist.
struct EnvSpec {
  int prompts = 50;
  int templates_per_prompt = 6;
  double frac_easy = 0.3;
  double frac_medium = 0.5;
  double frac_hard = 0.2;
  double frac_saturated = 0.0;
  double band_low = 0.4;
  double band_high = 1.6;
  double band_saturated = 1.95;
  double judge_noise_std = 0.0;
  double judge_flip_fraction = 0.0;
  std::uint64_t seed = 7;

  void validate() const;  // throws ConfigError naming the offending field
};

std::vector<SyntheticTask> generate_env(const EnvSpec& spec);

enum class Algorithm { awpo, grpo_outcome, grpo_mixed };
std::string_view algorithm_name(Algorithm algo);
Algorithm parse_algorithm(std::string_view name);  // throws ConfigError

struct JudgeConfig {
  enum class Kind { mock, constant, remote } kind = Kind::mock;
  double constant_score = 0.0;
  RemoteJudgeOptions remote;

  void validate() const;
};

struct TrainerConfig {
  Algorithm algorithm = Algorithm::awpo;
  HyperParams hyper;
  EnvSpec env;
  JudgeConfig judge;
  int iterations = 200;
  double fixed_clip = 0.2;    // clip radius for the two baselines
  double eval_fraction = 1.0; // fraction of prompts in the held-out greedy eval
  bool early_stop = false;    // stop after 10 consecutive perfect evals
  int checkpoint_every = 50;  // 0 disables periodic checkpoints
  bool log_advantages = false;  // embed per-group advantages in each record
  int threads = 1;            // parallel group scoring; results are merge-order
                              // deterministic regardless

  void validate() const;
};

// Per-iteration log entry. wall_clock_sec is excluded from to_json so the
// serialized stream is reproducible; timings go to a sidecar. Per-group
// advantages are captured only when the trainer's log_advantages flag is on.
struct RunRecord {
  long iteration = 0;
  std::vector<GateState> gates;  // indexed by prompt
  std::vector<GroupAdvantages> advantages;
  double clip_radius = 0.0;
  double objective = 0.0;
  double mean_r_out = 0.0;
  double mean_r_mix = 0.0;
  double mean_mix_weight = 0.0;
  double exact_match = 0.0;
  double wall_clock_sec = 0.0;

  nlohmann::json to_json() const;
};

struct EvalMetrics {
  double exact_match = 0.0;   // greedy decode hits the optimal template
  double mean_outcome = 0.0;  // expected outcome total under the policy
  double mean_exec = 0.0;     // expected execution score under the policy
};

EvalMetrics evaluate(const TabularPolicy& policy,
                     const std::vector<SyntheticTask>& tasks,
                     std::span<const std::size_t> eval_ids = {});

// Streaming observer; the CLI uses it to write the run directory while the
// trainer is running, so an abort still leaves a flushed partial log.
class RunSink {
 public:
  virtual ~RunSink() = default;
  virtual void on_record(const RunRecord& record) = 0;
  virtual void on_checkpoint(long iteration, const TabularPolicy& policy) = 0;
};

struct TrainResult {
  TabularPolicy policy;
  std::vector<RunRecord> records;
  EvalMetrics final_eval;
  bool early_stopped = false;
};

// Runs the sampled-group training loop: score K responses per prompt, gate the
// mixed signal per group, weight by difficulty, clip with the batch radius
// (AWPO) or the fixed radius (baselines), and ascend the clipped surrogate.
// Deterministic given the config seeds when the judge is the seeded mock.
TrainResult train(const TrainerConfig& cfg, RunSink* sink = nullptr);

// Prompts included in the held-out greedy eval for this config.
std::vector<std::size_t> eval_prompt_ids(const TrainerConfig& cfg,
                                         std::size_t num_tasks);

}  // namespace awpo
