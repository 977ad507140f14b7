#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "awpo/common.hpp"
#include "json.hpp"

namespace awpo {

// Per-prompt categorical softmax policy over a small action set. The global
// parameter vector is the concatenation of the per-prompt logit blocks.
// Snapshots are immutable: updates produce a new policy, so sampling from a
// snapshot is safe from any number of threads (each with its own Rng).
class TabularPolicy {
 public:
  TabularPolicy() = default;
  TabularPolicy(std::vector<std::string> prompt_ids,
                std::vector<std::vector<double>> logits, std::uint64_t seed = 0);

  static TabularPolicy uniform(std::vector<std::string> prompt_ids,
                               const std::vector<std::size_t>& action_counts,
                               std::uint64_t seed = 0);

  std::size_t num_prompts() const { return logits_.size(); }
  std::size_t num_actions(std::size_t g) const { return logits_[g].size(); }
  std::size_t dim() const { return dim_; }
  std::size_t block_offset(std::size_t g) const { return offsets_[g]; }
  const std::vector<std::string>& prompt_ids() const { return ids_; }
  std::uint64_t seed() const { return seed_; }

  const std::vector<double>& logits(std::size_t g) const { return logits_[g]; }
  const std::vector<double>& probs(std::size_t g) const { return probs_[g]; }

  double log_prob(std::size_t g, std::size_t a) const;
  // grad of log pi(a|g) w.r.t. the block: e_a - pi(.|g)
  std::vector<double> score_block(std::size_t g, std::size_t a) const;
  // same, embedded in a dim()-sized vector (zero outside the block)
  std::vector<double> score(std::size_t g, std::size_t a) const;

  std::size_t sample(std::size_t g, Rng& rng) const;
  std::size_t greedy(std::size_t g) const;  // argmax; lowest index wins ties

  // sum_g (1/G) sum_a pi(a|g) f[g][a]
  double exact_expectation(const std::vector<std::vector<double>>& f) const;

  // New snapshot with theta + delta (delta is dim()-sized).
  TabularPolicy updated(std::span<const double> delta) const;

  nlohmann::json to_checkpoint() const;
  static TabularPolicy from_checkpoint(const nlohmann::json& j);
  void save(const std::string& path) const;
  static TabularPolicy load(const std::string& path);

 private:
  void finalize();  // offsets, softmax caches

  std::vector<std::string> ids_;
  std::vector<std::vector<double>> logits_;
  std::vector<std::vector<double>> probs_;
  std::vector<double> log_norms_;  // per-prompt max + log(sum exp(logit - max))
  std::vector<std::size_t> offsets_;
  std::size_t dim_ = 0;
  std::uint64_t seed_ = 0;
};

}  // namespace awpo
