#include "awpo/policy.hpp"

#include <cmath>
#include <fstream>

#include "awpo/kernels.hpp"

namespace awpo {

TabularPolicy::TabularPolicy(std::vector<std::string> prompt_ids,
                             std::vector<std::vector<double>> logits,
                             std::uint64_t seed)
    : ids_(std::move(prompt_ids)), logits_(std::move(logits)), seed_(seed) {
  if (ids_.size() != logits_.size())
    throw ConfigError("policy: prompt id and logit block counts differ");
  for (const auto& block : logits_)
    if (block.empty()) throw ConfigError("policy: empty logit block");
  finalize();
}

TabularPolicy TabularPolicy::uniform(std::vector<std::string> prompt_ids,
                                     const std::vector<std::size_t>& action_counts,
                                     std::uint64_t seed) {
  std::vector<std::vector<double>> logits;
  logits.reserve(action_counts.size());
  for (std::size_t m : action_counts) logits.emplace_back(m, 0.0);
  return TabularPolicy(std::move(prompt_ids), std::move(logits), seed);
}

void TabularPolicy::finalize() {
  offsets_.resize(logits_.size());
  probs_.resize(logits_.size());
  log_norms_.resize(logits_.size());
  dim_ = 0;
  for (std::size_t g = 0; g < logits_.size(); ++g) {
    offsets_[g] = dim_;
    dim_ += logits_[g].size();
    probs_[g].resize(logits_[g].size());
    kernels::softmax(logits_[g], probs_[g]);
    const double m = kernels::max_value(logits_[g]);
    double z = 0.0;
    for (double v : logits_[g]) z += std::exp(v - m);
    log_norms_[g] = m + std::log(z);
  }
}

double TabularPolicy::log_prob(std::size_t g, std::size_t a) const {
  if (a >= logits_[g].size()) throw std::out_of_range("policy: action index");
  return logits_[g][a] - log_norms_[g];
}

std::vector<double> TabularPolicy::score_block(std::size_t g, std::size_t a) const {
  if (a >= logits_[g].size()) throw std::out_of_range("policy: action index");
  std::vector<double> z(probs_[g].size());
  for (std::size_t b = 0; b < z.size(); ++b) z[b] = -probs_[g][b];
  z[a] += 1.0;
  return z;
}

std::vector<double> TabularPolicy::score(std::size_t g, std::size_t a) const {
  std::vector<double> z(dim_, 0.0);
  const auto block = score_block(g, a);
  std::copy(block.begin(), block.end(), z.begin() + offsets_[g]);
  return z;
}

std::size_t TabularPolicy::sample(std::size_t g, Rng& rng) const {
  const double u = rng.uniform01();
  double cum = 0.0;
  const auto& p = probs_[g];
  for (std::size_t a = 0; a + 1 < p.size(); ++a) {
    cum += p[a];
    if (u < cum) return a;
  }
  return p.size() - 1;
}

std::size_t TabularPolicy::greedy(std::size_t g) const {
  const auto& block = logits_[g];
  std::size_t best = 0;
  for (std::size_t a = 1; a < block.size(); ++a)
    if (block[a] > block[best]) best = a;
  return best;
}

double TabularPolicy::exact_expectation(
    const std::vector<std::vector<double>>& f) const {
  if (f.size() != logits_.size())
    throw ConfigError("exact_expectation: table has wrong prompt count");
  double total = 0.0;
  for (std::size_t g = 0; g < logits_.size(); ++g) {
    if (f[g].size() != logits_[g].size())
      throw ConfigError("exact_expectation: table block has wrong size");
    total += kernels::dot(probs_[g], f[g]);
  }
  return total / static_cast<double>(logits_.size());
}

TabularPolicy TabularPolicy::updated(std::span<const double> delta) const {
  if (delta.size() != dim_) throw ConfigError("policy update: wrong dimension");
  std::vector<std::vector<double>> next = logits_;
  for (std::size_t g = 0; g < next.size(); ++g) {
    kernels::axpy(1.0, delta.subspan(offsets_[g], next[g].size()), next[g]);
  }
  return TabularPolicy(ids_, std::move(next), seed_);
}

nlohmann::json TabularPolicy::to_checkpoint() const {
  nlohmann::json j;
  j["version"] = 1;
  j["seed"] = seed_;
  j["prompt_ids"] = ids_;
  j["logits"] = logits_;
  return j;
}

TabularPolicy TabularPolicy::from_checkpoint(const nlohmann::json& j) {
  if (!j.is_object() || j.value("version", 0) != 1)
    throw InputError("checkpoint: unsupported version");
  return TabularPolicy(j.at("prompt_ids").get<std::vector<std::string>>(),
                       j.at("logits").get<std::vector<std::vector<double>>>(),
                       j.value("seed", std::uint64_t{0}));
}

void TabularPolicy::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << to_checkpoint().dump(2) << '\n';
}

TabularPolicy TabularPolicy::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw InputError(path + ": invalid JSON");
  return from_checkpoint(j);
}

}  // namespace awpo
