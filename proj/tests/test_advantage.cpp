#include <cmath>

#include "awpo/advantage.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace awpo;

namespace {

GroupBatch batch_from(std::vector<double> r_out, std::vector<double> r_mix) {
  GroupBatch b;
  for (std::size_t j = 0; j < r_out.size(); ++j)
    b.samples.push_back({j % 2, 0.0, r_out[j], r_mix[j]});
  return b;
}

}  // namespace

TEST_CASE("group statistics: hand values and guards") {
  const auto constant = group_stats(batch_from({1.3, 1.3, 1.3}, {1.3, 1.3, 1.3}));
  CHECK(constant.mean_out == doctest::Approx(1.3));
  CHECK(constant.sigma_out == 0.0);

  const auto pair = group_stats(batch_from({0.0, 2.0}, {0.0, 2.0}));
  CHECK(pair.mean_out == 1.0);
  CHECK(pair.sigma_out == 1.0);  // population (1/K) statistics

  const auto triple = group_stats(batch_from({0, 0, 0}, {0.0, 1.0, 2.0}));
  CHECK(triple.mean_mix == doctest::Approx(1.0));
  CHECK(triple.sigma_mix == doctest::Approx(std::sqrt(2.0 / 3.0)));

  CHECK_THROWS_AS(group_stats(batch_from({1.0}, {1.0})), ConfigError);
  CHECK_THROWS_AS(group_stats(batch_from({1.0, 1.0}, {0.5, 1.0})), InputError);
}

TEST_CASE("gate: dispersion ratio, saturation and tolerance") {
  HyperParams hp;

  // degenerate group contributes no mixed signal
  const auto closed = gate({1.0, 1.5, 0.0, 0.0}, hp);
  CHECK(closed.dispersion_ratio == 0.0);
  CHECK(closed.mix_weight == 0.0);

  // tolerance gate: ratio ~ 1 exceeds eps_mix = 0.5
  HyperParams tight = hp;
  tight.eps_std = 1e-8;
  const auto noisy = gate({1.0, 1.2, 0.0, 0.5}, tight);
  CHECK(noisy.dispersion_ratio == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(noisy.mix_weight == 0.0);

  // admitted: mixed dispersion below the outcome dispersion
  const auto open = gate({1.0, 1.2, 0.5, 0.25}, hp);
  CHECK(open.dispersion_ratio == doctest::Approx(0.25 / 0.7500010).epsilon(1e-5));
  CHECK(open.mix_weight == open.dispersion_ratio);

  // saturation closes the gate regardless of dispersion
  const auto saturated = gate({1.96, 2.2, 0.5, 0.25}, hp);
  CHECK(saturated.mix_weight == 0.0);

  // difficulty band is strict
  CHECK(gate({(hp.tau_low + hp.tau_high) / 2.0, 1.0, 0.1, 0.1}, hp)
            .difficulty_weight == hp.alpha_prio);
  CHECK(gate({hp.tau_low, 1.0, 0.1, 0.1}, hp).difficulty_weight == hp.alpha_base);
  CHECK(gate({hp.tau_high, 1.0, 0.1, 0.1}, hp).difficulty_weight == hp.alpha_base);
}

TEST_CASE("gate ranges over random inputs") {
  Rng rng(31);
  HyperParams hp;
  for (int trial = 0; trial < 500; ++trial) {
    GroupStats s;
    s.mean_out = 2.0 * rng.uniform01();
    s.mean_mix = s.mean_out + rng.uniform01();
    s.sigma_out = std::abs(rng.normal());
    s.sigma_mix = std::abs(rng.normal());
    const auto gs = gate(s, hp);
    CHECK(gs.dispersion_ratio >= 0.0);
    CHECK(gs.dispersion_ratio < 1.0);
    CHECK(gs.mix_weight >= 0.0);
    CHECK(gs.mix_weight < hp.eps_mix);
  }
}

TEST_CASE("advantages: degenerate and hand-computed cases") {
  HyperParams hp;

  // all outcomes equal: a_out vanishes, the mixed view carries the signal
  {
    auto b = batch_from({1.0, 1.0, 1.0}, {1.2, 1.5, 1.8});
    GateState gs = gate(group_stats(b), hp);
    const auto adv = advantages(b, gs, hp);
    for (double v : adv.a_out) CHECK(v == 0.0);
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(adv.a_final[j] == doctest::Approx(gs.difficulty_weight *
                                              gs.mix_weight * adv.a_mix[j]));
  }

  // gate closed: exactly the weighted outcome advantage
  {
    auto b = batch_from({0.0, 2.0}, {0.5, 2.1});
    GateState gs = gate(group_stats(b), hp);
    gs.mix_weight = 0.0;
    const auto adv = advantages(b, gs, hp);
    for (std::size_t j = 0; j < 2; ++j)
      CHECK(adv.a_final[j] == gs.difficulty_weight * adv.a_out[j]);
  }

  // K=2 hand case: both views normalize to the same z-scores
  {
    HyperParams tiny = hp;
    tiny.eps_norm = 1e-12;
    auto b = batch_from({0.0, 2.0}, {0.0, 3.0});
    GateState gs;
    gs.mean_out = 1.0;
    gs.sigma_out = 1.0;
    gs.mean_mix = 1.5;
    gs.sigma_mix = 1.5;
    gs.mix_weight = 0.4;
    gs.difficulty_weight = 1.0;
    const auto adv = advantages(b, gs, tiny);
    CHECK(adv.a_out[0] == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(adv.a_out[1] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(adv.a_mix[0] == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(adv.a_mix[1] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(adv.a_final[0] == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(adv.a_final[1] == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("advantages: zero-mean and shift-invariance properties") {
  Rng rng(77);
  HyperParams hp;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + rng.uniform_index(7);
    std::vector<double> r_out(k), r_mix(k);
    for (std::size_t j = 0; j < k; ++j) {
      r_out[j] = 2.0 * rng.uniform01();
      r_mix[j] = r_out[j] + rng.uniform01();
    }
    auto b = batch_from(r_out, r_mix);
    const auto stats = group_stats(b);
    const auto gs = gate(stats, hp);
    const auto adv = advantages(b, gs, hp);

    double sum_out = 0.0, sum_mix = 0.0, max_dev = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      sum_out += adv.a_out[j];
      sum_mix += adv.a_mix[j];
      max_dev = std::max(max_dev, std::abs(r_out[j] - stats.mean_out));
    }
    const double bound = static_cast<double>(k) * hp.eps_norm /
                             (stats.sigma_out + hp.eps_norm) * max_dev +
                         1e-10;
    CHECK(std::abs(sum_out) <= bound);
    CHECK(std::abs(sum_mix) <= bound + 1e-10);

    // adding a constant to every outcome leaves a_out unchanged
    const double c = 3.0;
    std::vector<double> shifted_out(k), shifted_mix(k);
    for (std::size_t j = 0; j < k; ++j) {
      shifted_out[j] = r_out[j] + c;
      shifted_mix[j] = r_mix[j] + c;
    }
    auto b2 = batch_from(shifted_out, shifted_mix);
    const auto stats2 = group_stats(b2);
    const auto gs2 = gate(stats2, hp);
    const auto adv2 = advantages(b2, gs2, hp);
    CHECK(stats2.sigma_out == doctest::Approx(stats.sigma_out).epsilon(1e-9));
    for (std::size_t j = 0; j < k; ++j)
      CHECK(adv2.a_out[j] == doctest::Approx(adv.a_out[j]).epsilon(1e-9));
  }
}

TEST_CASE("batch clip radius interpolates on the mean mix weight") {
  HyperParams hp;
  hp.eps_min = 0.1;
  hp.eps_max = 0.3;

  std::vector<GateState> gates(3);
  for (auto& g : gates) g.mix_weight = 0.0;
  CHECK(batch_clip_radius(gates, hp) == hp.eps_max);

  for (auto& g : gates) g.mix_weight = 1.0;
  CHECK(batch_clip_radius(gates, hp) == doctest::Approx(hp.eps_min));

  std::vector<GateState> pair(2);
  pair[0].mix_weight = 0.0;
  pair[1].mix_weight = 0.5;
  CHECK(batch_clip_radius(pair, hp) == doctest::Approx(0.25));

  CHECK_THROWS_AS(batch_clip_radius({}, hp), ConfigError);
}

TEST_CASE("surrogate objective: unit ratio, clipping, errors") {
  std::vector<FlatSample> samples = {{0, 0, -0.5, 1.5}, {0, 1, -1.2, -0.5}};

  // ratio 1 everywhere: objective is the advantage mean
  std::vector<double> same = {-0.5, -1.2};
  CHECK(surrogate_objective(samples, same, 0.2) == doctest::Approx(0.5));

  CHECK_THROWS_AS(surrogate_objective(
                      samples, std::vector<double>{0.0, std::nan("")}, 0.2),
                  InputError);
  std::vector<FlatSample> bad = {{0, 0, std::nan(""), 1.0}};
  CHECK_THROWS_AS(surrogate_objective(bad, std::vector<double>{0.0}, 0.2),
                  InputError);
}

TEST_CASE("surrogate gradient: REINFORCE form at the old policy") {
  const TabularPolicy policy({"a", "b"}, {{0.2, -0.4, 0.9}, {0.0, 1.0}});
  std::vector<FlatSample> samples;
  Rng rng(3);
  for (int i = 0; i < 6; ++i) {
    const std::size_t g = rng.uniform_index(2);
    const std::size_t a = rng.uniform_index(policy.num_actions(g));
    samples.push_back({g, a, policy.log_prob(g, a), rng.normal()});
  }
  const auto grad = surrogate_gradient(samples, policy, 0.2);

  std::vector<double> expected(policy.dim(), 0.0);
  for (const auto& s : samples) {
    const auto z = policy.score(s.prompt, s.action);
    for (std::size_t i = 0; i < z.size(); ++i)
      expected[i] += s.advantage * z[i] / static_cast<double>(samples.size());
  }
  for (std::size_t i = 0; i < expected.size(); ++i)
    CHECK(grad[i] == doctest::Approx(expected[i]).epsilon(1e-12));

  // zero advantages produce the zero vector
  auto zeroed = samples;
  for (auto& s : zeroed) s.advantage = 0.0;
  for (double v : surrogate_gradient(zeroed, policy, 0.2)) CHECK(v == 0.0);
}

TEST_CASE("surrogate gradient matches central finite differences") {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<double>> logits = {{0.0, 0.0, 0.0}};
    for (auto& v : logits[0]) v = rng.normal();
    TabularPolicy policy({"p"}, logits);

    std::vector<FlatSample> samples;
    bool near_kink = false;
    for (int i = 0; i < 4; ++i) {
      const std::size_t a = rng.uniform_index(3);
      // old log-probs jittered so ratios are not 1
      const double old_lp = policy.log_prob(0, a) - 0.2 * rng.normal();
      const double advantage = rng.normal();
      const double ratio = std::exp(policy.log_prob(0, a) - old_lp);
      // the objective is non-differentiable exactly at the clip boundary;
      // keep the finite-difference probe away from it
      if (std::abs(ratio - 0.8) < 1e-3 || std::abs(ratio - 1.2) < 1e-3)
        near_kink = true;
      samples.push_back({0, a, old_lp, advantage});
    }
    if (near_kink) continue;

    const double eps = 0.2;
    const auto grad = surrogate_gradient(samples, policy, eps);

    const double h = 1e-6;
    double err2 = 0.0, norm2 = 0.0;
    for (std::size_t i = 0; i < policy.dim(); ++i) {
      std::vector<double> up(policy.dim(), 0.0), down(policy.dim(), 0.0);
      up[i] = h;
      down[i] = -h;
      const auto eval = [&](const std::vector<double>& delta) {
        const auto p = policy.updated(delta);
        std::vector<double> lps(samples.size());
        for (std::size_t s = 0; s < samples.size(); ++s)
          lps[s] = p.log_prob(samples[s].prompt, samples[s].action);
        return surrogate_objective(samples, lps, eps);
      };
      const double fd = (eval(up) - eval(down)) / (2.0 * h);
      err2 += (fd - grad[i]) * (fd - grad[i]);
      norm2 += grad[i] * grad[i];
    }
    CHECK(std::sqrt(err2) <= 1e-5 * std::max(1.0, std::sqrt(norm2)));
  }
}

TEST_CASE("reduction to the plain group-normalized baseline") {
  Rng rng(2718);
  HyperParams hp;
  hp.eps_min = hp.eps_max = 0.2;  // fixed radius

  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t groups = 1 + rng.uniform_index(4);
    const std::size_t k = 2 + rng.uniform_index(6);

    std::vector<oracles::ReferenceGroup> reference(groups);
    std::vector<FlatSample> flat;
    std::vector<double> new_lps;
    std::vector<GateState> gates(groups);

    for (std::size_t g = 0; g < groups; ++g) {
      GroupBatch batch;
      batch.group_id = g;
      for (std::size_t j = 0; j < k; ++j) {
        const double r = 2.0 * rng.uniform01();
        batch.samples.push_back({0, -1.0, r, r + rng.uniform01()});
        reference[g].rewards.push_back(r);
        const double ratio = std::exp(0.4 * rng.normal());
        reference[g].ratios.push_back(ratio);
      }
      auto gs = gate(group_stats(batch), hp);
      gs.mix_weight = 0.0;        // forced off
      gs.difficulty_weight = 1.0; // forced off
      gates[g] = gs;
      const auto adv = advantages(batch, gs, hp);
      for (std::size_t j = 0; j < k; ++j) {
        flat.push_back({g, 0, -1.0, adv.a_final[j]});
        new_lps.push_back(-1.0 + std::log(reference[g].ratios[j]));
      }
    }
    const double eps = batch_clip_radius(gates, hp);
    CHECK(eps == doctest::Approx(0.2));
    const double ours = surrogate_objective(flat, new_lps, eps);
    const double theirs =
        oracles::reference_grpo_objective(reference, 0.2, hp.eps_norm);
    CHECK(std::abs(ours - theirs) <= 1e-12);
  }
}
