#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "awpo/policy.hpp"

namespace awpo {

struct HyperParams {
  int k = 8;                   // responses sampled per prompt group
  double eps_std = 1e-6;       // stabilizer in the dispersion ratio
  double eps_mix = 0.5;        // tolerance cap on the dispersion ratio
  double r_max_out = 1.95;     // saturation gate on the group outcome mean
  double tau_low = 0.4;        // difficulty band (strict) lower edge
  double tau_high = 1.6;       // difficulty band (strict) upper edge
  double alpha_base = 1.0;     // group weight outside the band
  double alpha_prio = 1.5;     // group weight inside the band
  double eps_min = 0.1;        // clip radius range
  double eps_max = 0.28;
  double eps_norm = 1e-6;      // stabilizer in advantage normalization
  double learning_rate = 0.3;
  int epochs = 1;              // gradient steps per sampled batch
  std::uint64_t seed = 1;

  void validate() const;  // throws ConfigError naming the offending field
};

struct Sample {
  std::size_t action = 0;
  double old_log_prob = 0.0;
  double r_out = 0.0;
  double r_mix = 0.0;
};

struct GroupBatch {
  std::size_t group_id = 0;
  std::vector<Sample> samples;  // K >= 2; r_mix >= r_out per sample
};

struct GroupStats {
  double mean_out = 0.0;
  double mean_mix = 0.0;
  double sigma_out = 0.0;  // population standard deviation
  double sigma_mix = 0.0;
};

struct GateState {
  double mean_out = 0.0;
  double mean_mix = 0.0;
  double sigma_out = 0.0;
  double sigma_mix = 0.0;
  double dispersion_ratio = 0.0;   // sigma_mix / (sigma_out + sigma_mix + eps_std)
  double mix_weight = 0.0;         // ratio gated by saturation and tolerance
  double difficulty_weight = 1.0;  // alpha_prio inside the band, alpha_base outside
};

struct GroupAdvantages {
  std::vector<double> a_out;    // (r_out - mean_out) / (sigma_out + eps_norm)
  std::vector<double> a_mix;
  std::vector<double> a_final;  // d * ((1 - w) a_out + w a_mix)
};

// Run-log audit form of a gate and its advantages.
nlohmann::json gate_to_json(std::size_t group, const GateState& gs);
nlohmann::json advantages_to_json(const GroupAdvantages& adv);

// Population statistics over the group's samples. Throws ConfigError for
// K < 2 and InputError if any sample has r_mix < r_out.
GroupStats group_stats(const GroupBatch& batch);

// Strict inequalities throughout: boundary equality closes the gate and
// selects the base difficulty weight.
GateState gate(const GroupStats& stats, const HyperParams& hp);

GroupAdvantages advantages(const GroupBatch& batch, const GateState& gs,
                           const HyperParams& hp);

// eps_min + (1 - mean mix weight)(eps_max - eps_min). Throws ConfigError on
// an empty batch.
double batch_clip_radius(std::span<const GateState> gates, const HyperParams& hp);
double mean_mix_weight(std::span<const GateState> gates);

// One flattened response used by the surrogate objective and its gradient.
struct FlatSample {
  std::size_t prompt = 0;
  std::size_t action = 0;
  double old_log_prob = 0.0;
  double advantage = 0.0;
};

// Mean over samples of min(r A, clip(r, 1-eps, 1+eps) A) with
// r = exp(new_log_prob - old_log_prob). Throws InputError on non-finite
// log-probs.
double surrogate_objective(std::span<const FlatSample> samples,
                           std::span<const double> new_log_probs,
                           double clip_radius);

// Exact gradient of surrogate_objective w.r.t. the policy logits, using the
// standard subgradient convention: samples whose clipped branch is active and
// smaller contribute nothing.
std::vector<double> surrogate_gradient(std::span<const FlatSample> samples,
                                       const TabularPolicy& policy,
                                       double clip_radius);

}  // namespace awpo
