#include "awpo/advantage.hpp"

#include <cmath>

#include "awpo/kernels.hpp"

namespace awpo {

void HyperParams::validate() const {
  const auto fail = [](const char* field, const char* why) {
    throw ConfigError(std::string("hyper.") + field + ": " + why);
  };
  if (k < 2) fail("k", "group size must be at least 2");
  if (!(eps_std > 0.0)) fail("eps_std", "must be positive");
  if (eps_mix < 0.0) fail("eps_mix", "must be non-negative");
  if (!(tau_low < tau_high)) fail("tau_low", "must be below tau_high");
  if (!(alpha_base > 0.0)) fail("alpha_base", "must be positive");
  if (!(alpha_prio > alpha_base)) fail("alpha_prio", "must exceed alpha_base");
  if (!(eps_min <= eps_max)) fail("eps_min", "must not exceed eps_max");
  if (!(eps_min > 0.0)) fail("eps_min", "must be positive");
  if (!(eps_norm > 0.0)) fail("eps_norm", "must be positive");
  if (!(learning_rate > 0.0)) fail("learning_rate", "must be positive");
  if (epochs < 1) fail("epochs", "must be at least 1");
}

GroupStats group_stats(const GroupBatch& batch) {
  if (batch.samples.size() < 2)
    throw ConfigError("group " + std::to_string(batch.group_id) +
                      ": needs K >= 2 samples for group statistics");
  std::vector<double> r_out(batch.samples.size());
  std::vector<double> r_mix(batch.samples.size());
  for (std::size_t j = 0; j < batch.samples.size(); ++j) {
    const auto& s = batch.samples[j];
    if (s.r_mix < s.r_out)
      throw InputError("group " + std::to_string(batch.group_id) +
                       ": mixed reward below outcome reward");
    r_out[j] = s.r_out;
    r_mix[j] = s.r_mix;
  }
  const auto mv_out = kernels::mean_var(r_out);
  const auto mv_mix = kernels::mean_var(r_mix);
  return {mv_out.mean, mv_mix.mean, std::sqrt(mv_out.var), std::sqrt(mv_mix.var)};
}

GateState gate(const GroupStats& stats, const HyperParams& hp) {
  GateState gs;
  gs.mean_out = stats.mean_out;
  gs.mean_mix = stats.mean_mix;
  gs.sigma_out = stats.sigma_out;
  gs.sigma_mix = stats.sigma_mix;
  gs.dispersion_ratio =
      stats.sigma_mix / (stats.sigma_out + stats.sigma_mix + hp.eps_std);
  const bool unsaturated = stats.mean_out < hp.r_max_out;
  const bool tolerable = gs.dispersion_ratio < hp.eps_mix;
  gs.mix_weight = (unsaturated && tolerable) ? gs.dispersion_ratio : 0.0;
  const bool mid_band = hp.tau_low < stats.mean_out && stats.mean_out < hp.tau_high;
  gs.difficulty_weight = mid_band ? hp.alpha_prio : hp.alpha_base;
  return gs;
}

GroupAdvantages advantages(const GroupBatch& batch, const GateState& gs,
                           const HyperParams& hp) {
  const std::size_t k = batch.samples.size();
  std::vector<double> r_out(k);
  std::vector<double> r_mix(k);
  for (std::size_t j = 0; j < k; ++j) {
    r_out[j] = batch.samples[j].r_out;
    r_mix[j] = batch.samples[j].r_mix;
  }
  GroupAdvantages adv;
  adv.a_out.resize(k);
  adv.a_mix.resize(k);
  adv.a_final.resize(k);
  kernels::normalize(r_out, gs.mean_out, gs.sigma_out + hp.eps_norm, adv.a_out);
  kernels::normalize(r_mix, gs.mean_mix, gs.sigma_mix + hp.eps_norm, adv.a_mix);
  kernels::blend(adv.a_out, adv.a_mix, gs.mix_weight, gs.difficulty_weight,
                 adv.a_final);
  return adv;
}

nlohmann::json gate_to_json(std::size_t group, const GateState& gs) {
  return {{"group", group},
          {"mean_out", gs.mean_out},
          {"mean_mix", gs.mean_mix},
          {"sigma_out", gs.sigma_out},
          {"sigma_mix", gs.sigma_mix},
          {"r_g", gs.dispersion_ratio},
          {"w_mix", gs.mix_weight},
          {"d_g", gs.difficulty_weight}};
}

nlohmann::json advantages_to_json(const GroupAdvantages& adv) {
  return {{"a_out", adv.a_out}, {"a_mix", adv.a_mix}, {"a_final", adv.a_final}};
}

double mean_mix_weight(std::span<const GateState> gates) {
  double s = 0.0;
  for (const auto& g : gates) s += g.mix_weight;
  return gates.empty() ? 0.0 : s / static_cast<double>(gates.size());
}

double batch_clip_radius(std::span<const GateState> gates, const HyperParams& hp) {
  if (gates.empty())
    throw ConfigError("clip radius: batch must contain at least one group");
  const double mean_w = mean_mix_weight(gates);
  return hp.eps_min + (1.0 - mean_w) * (hp.eps_max - hp.eps_min);
}

double surrogate_objective(std::span<const FlatSample> samples,
                           std::span<const double> new_log_probs,
                           double clip_radius) {
  if (samples.size() != new_log_probs.size())
    throw InputError("surrogate objective: sample/log-prob size mismatch");
  if (samples.empty()) return 0.0;
  std::vector<double> ratios(samples.size());
  std::vector<double> adv(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!std::isfinite(new_log_probs[i]) || !std::isfinite(samples[i].old_log_prob))
      throw InputError("surrogate objective: non-finite log-prob");
    ratios[i] = std::exp(new_log_probs[i] - samples[i].old_log_prob);
    adv[i] = samples[i].advantage;
  }
  return kernels::clip_objective_sum(ratios, adv, clip_radius) /
         static_cast<double>(samples.size());
}

std::vector<double> surrogate_gradient(std::span<const FlatSample> samples,
                                       const TabularPolicy& policy,
                                       double clip_radius) {
  std::vector<double> grad(policy.dim(), 0.0);
  if (samples.empty()) return grad;
  const double lo = 1.0 - clip_radius;
  const double hi = 1.0 + clip_radius;
  const double inv_n = 1.0 / static_cast<double>(samples.size());

  // Per-(prompt, action) coefficients; one score-vector pass per prompt.
  std::vector<std::vector<double>> coeff(policy.num_prompts());
  std::vector<double> coeff_total(policy.num_prompts(), 0.0);
  for (const auto& s : samples) {
    if (!std::isfinite(s.old_log_prob))
      throw InputError("surrogate gradient: non-finite log-prob");
    const double new_lp = policy.log_prob(s.prompt, s.action);
    const double r = std::exp(new_lp - s.old_log_prob);
    const double rc = r < lo ? lo : (r > hi ? hi : r);
    // Gradient flows only while the unclipped branch attains the min.
    if (r * s.advantage > rc * s.advantage) continue;
    if (coeff[s.prompt].empty())
      coeff[s.prompt].assign(policy.num_actions(s.prompt), 0.0);
    const double c = r * s.advantage * inv_n;
    coeff[s.prompt][s.action] += c;
    coeff_total[s.prompt] += c;
  }
  for (std::size_t g = 0; g < policy.num_prompts(); ++g) {
    if (coeff[g].empty()) continue;
    std::span<double> block{grad.data() + policy.block_offset(g),
                            policy.num_actions(g)};
    kernels::axpy(1.0, coeff[g], block);
    kernels::axpy(-coeff_total[g], policy.probs(g), block);
  }
  return grad;
}

}  // namespace awpo
