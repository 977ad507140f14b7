#include "awpo/sim.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <future>
#include <numeric>

#include "awpo/kernels.hpp"

namespace awpo {

namespace {

constexpr std::array<std::string_view, 12> kToolNames = {
    "get_weather",   "search_flights", "lookup_user",  "convert_units",
    "schedule_meet", "translate_text", "query_orders", "send_message",
    "fetch_stock",   "create_invoice", "track_parcel", "book_hotel"};

constexpr std::array<std::string_view, 12> kParamNames = {
    "city",   "date",     "unit",     "query",    "limit",     "user_id",
    "amount", "currency", "language", "priority", "recipient", "subject"};

constexpr std::array<std::string_view, 8> kWords = {
    "paris", "tokyo", "berlin", "rome", "cairo", "oslo", "lima", "quito"};

// Filler vocabulary disjoint from the reference-reasoning vocabulary, so a
// low-quality rationale shares almost no tokens with the reference.
constexpr std::array<std::string_view, 8> kFiller = {
    "perhaps", "unclear",  "revisit",    "loosely",
    "somehow", "roughly",  "eventually", "anyway"};

enum class Band { easy, medium, hard, saturated };

ParamValue random_value(Rng& rng) {
  switch (rng.uniform_index(4)) {
    case 0: return std::string(kWords[rng.uniform_index(kWords.size())]);
    case 1: return static_cast<std::int64_t>(rng.uniform_index(100));
    case 2: return static_cast<double>(rng.uniform_index(400)) / 4.0;
    default: return rng.uniform01() < 0.5;
  }
}

ParamValue different_value(const ParamValue& old, Rng& rng) {
  for (;;) {
    ParamValue v = random_value(rng);
    if (v != old) return v;
  }
}

ToolGraph random_truth(Rng& rng, std::size_t calls, std::size_t params_per_call) {
  ToolGraph g;
  std::vector<std::size_t> name_order(kToolNames.size());
  std::iota(name_order.begin(), name_order.end(), 0);
  for (std::size_t c = 0; c < calls; ++c) {
    const std::size_t pick = c + rng.uniform_index(name_order.size() - c);
    std::swap(name_order[c], name_order[pick]);
    ToolCall call;
    call.name = kToolNames[name_order[c]];
    std::vector<std::size_t> param_order(kParamNames.size());
    std::iota(param_order.begin(), param_order.end(), 0);
    for (std::size_t p = 0; p < params_per_call; ++p) {
      const std::size_t ppick = p + rng.uniform_index(param_order.size() - p);
      std::swap(param_order[p], param_order[ppick]);
      call.params[std::string(kParamNames[param_order[p]])] = random_value(rng);
    }
    g.calls.push_back(std::move(call));
  }
  return g;
}

std::string render_reference(const ToolGraph& truth) {
  std::string text = "The request needs " + std::to_string(truth.size()) +
                     " tool call" + (truth.size() == 1 ? "" : "s") + ".";
  std::size_t step = 1;
  for (const auto& call : truth.calls) {
    text += " Step " + std::to_string(step++) + " call " + call.name + " with";
    bool first = true;
    for (const auto& [key, value] : call.params.items()) {
      text += first ? " " : " and ";
      text += key + " set to " + value.dump();
      first = false;
    }
    text += ".";
  }
  if (truth.empty()) text += " Answer directly without calling any tool.";
  return text;
}

std::string render_rationale(const std::string& reference, double quality,
                             Rng& rng) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : reference) {
    if (c == ' ') {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));

  const auto keep = static_cast<std::size_t>(
      std::lround(quality * static_cast<double>(tokens.size())));
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!out.empty()) out.push_back(' ');
    if (i < keep)
      out += tokens[i];
    else
      out += kFiller[rng.uniform_index(kFiller.size())];
  }
  return out;
}

// Corruption recipes; each produces a prediction strictly worse than truth.
struct Corruption {
  enum class Kind {
    value_miss,     // arg: number of values replaced
    param_drop,     // arg: number of parameters removed
    wrong_name,     // arg: number of calls renamed
    empty_valid,    // well-formed block with no calls
    garbage_invalid // malformed response, empty graph
  };
  Kind kind;
  std::size_t arg = 1;
};

ToolGraph corrupt(const ToolGraph& truth, const Corruption& c, Rng& rng) {
  switch (c.kind) {
    case Corruption::Kind::empty_valid:
      return {};
    case Corruption::Kind::garbage_invalid:
      return {};
    case Corruption::Kind::wrong_name: {
      ToolGraph pred = truth;
      const auto truth_names = name_set(truth);
      std::size_t renamed = 0;
      for (auto& call : pred.calls) {
        if (renamed >= c.arg) break;
        for (const auto name : kToolNames) {
          if (!truth_names.count(std::string(name))) {
            call.name = name;
            ++renamed;
            break;
          }
        }
      }
      return pred;
    }
    case Corruption::Kind::param_drop: {
      ToolGraph pred = truth;
      std::size_t dropped = 0;
      for (auto& call : pred.calls) {
        while (dropped < c.arg && !call.params.empty()) {
          call.params.erase(call.params.begin());
          ++dropped;
        }
      }
      return pred;
    }
    case Corruption::Kind::value_miss: {
      ToolGraph pred = truth;
      std::size_t missed = 0;
      for (auto& call : pred.calls) {
        for (auto& [key, value] : call.params.items()) {
          if (missed >= c.arg) break;
          value = different_value(value, rng);
          ++missed;
        }
        if (missed >= c.arg) break;
      }
      return pred;
    }
  }
  return {};
}

std::vector<Corruption> band_recipes(Band band, std::size_t count) {
  std::vector<Corruption> base;
  using K = Corruption::Kind;
  switch (band) {
    case Band::easy:
      base = {{K::value_miss, 1}, {K::value_miss, 2}, {K::value_miss, 1},
              {K::value_miss, 2}, {K::value_miss, 1}};
      break;
    case Band::medium:
      base = {{K::wrong_name, 1}, {K::empty_valid, 0}, {K::value_miss, 4},
              {K::garbage_invalid, 0}, {K::value_miss, 1}};
      break;
    case Band::hard:
      base = {{K::garbage_invalid, 0}};
      break;
    case Band::saturated:
      base = {{K::value_miss, 1}};
      break;
  }
  std::vector<Corruption> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(base[i % base.size()]);
  return out;
}

SyntheticTask build_task(std::size_t index, Band band, const EnvSpec& spec) {
  Rng rng(mix_seed(spec.seed, index));
  SyntheticTask task;
  char id[16];
  std::snprintf(id, sizeof(id), "task-%04zu", index);
  task.prompt_id = id;
  task.prompt = "Request " + std::string(id) +
                ": satisfy the user with the available tools.";

  switch (band) {
    case Band::saturated: task.truth = random_truth(rng, 4, 4); break;
    case Band::hard: {
      const std::size_t calls = 1 + rng.uniform_index(3);
      task.truth = random_truth(rng, calls, 1 + rng.uniform_index(3));
      break;
    }
    default: task.truth = random_truth(rng, 2, 2); break;
  }
  task.reference_reasoning = render_reference(task.truth);

  const auto m = static_cast<std::size_t>(spec.templates_per_prompt);
  auto recipes = band_recipes(band, m - 1);

  const auto realize = [&](const Corruption& c) {
    ActionTemplate tmpl;
    tmpl.prediction = corrupt(task.truth, c, rng);
    tmpl.format_valid = c.kind != Corruption::Kind::garbage_invalid;
    tmpl.outcome = outcome_reward(task.truth, tmpl.prediction, tmpl.format_valid);
    // Easy-band mistakes are execution slips under an essentially correct
    // plan, so their rationales stay close to the reference and a noise-free
    // judge rates the whole band alike; elsewhere rationale quality tracks
    // the outcome.
    const double q = tmpl.outcome.total / 2.0;
    tmpl.latent_quality = band == Band::easy ? 0.85 + 0.15 * q : q;
    tmpl.rationale =
        render_rationale(task.reference_reasoning, tmpl.latent_quality, rng);
    return tmpl;
  };

  const auto uniform_mean = [](const std::vector<ActionTemplate>& templates) {
    double s = 0.0;
    for (const auto& t : templates) s += t.outcome.total;
    return s / static_cast<double>(templates.size());
  };

  std::vector<ActionTemplate> templates;
  {
    ActionTemplate optimum;
    optimum.prediction = task.truth;
    optimum.format_valid = true;
    optimum.outcome = outcome_reward(task.truth, task.truth, true);
    optimum.latent_quality = 1.0;
    optimum.rationale = task.reference_reasoning;
    templates.push_back(std::move(optimum));
  }
  for (const auto& recipe : recipes) templates.push_back(realize(recipe));

  // Nudge the uniform mean into the requested band where the template count
  // allows it: too-easy tasks get a template degraded to garbage, too-hard
  // ones get a near-miss upgrade.
  const auto in_band = [&](double mean) {
    switch (band) {
      case Band::easy: return mean > spec.band_high;
      case Band::medium: return spec.band_low < mean && mean < spec.band_high;
      case Band::hard: return mean < spec.band_low;
      case Band::saturated: return true;  // guaranteed by construction
    }
    return true;
  };
  for (int attempt = 0; attempt < 16 && !in_band(uniform_mean(templates));
       ++attempt) {
    const double mean = uniform_mean(templates);
    // Worst or best non-optimal slot, by band need.
    std::size_t slot = 1;
    for (std::size_t i = 2; i < templates.size(); ++i) {
      const bool pick_high = mean > spec.band_high || band == Band::hard;
      const double a = templates[i].outcome.total;
      const double b = templates[slot].outcome.total;
      if (pick_high ? a > b : a < b) slot = i;
    }
    const Corruption fix = (mean > spec.band_high || band == Band::hard)
                               ? Corruption{Corruption::Kind::garbage_invalid, 0}
                               : Corruption{Corruption::Kind::value_miss, 1};
    templates[slot] = realize(fix);
  }

  // Seeded placement of the optimum among the templates.
  const std::size_t optimum_slot = rng.uniform_index(templates.size());
  std::swap(templates[0], templates[optimum_slot]);
  task.templates = std::move(templates);
  task.optimal_index = optimum_slot;

  // Hard invariants regardless of band feasibility.
  std::size_t perfect = 0;
  std::set<double> distinct;
  for (const auto& t : task.templates) {
    distinct.insert(t.outcome.total);
    if (t.outcome.total == 2.0) ++perfect;
  }
  if (perfect != 1 || distinct.size() < 2)
    throw std::logic_error("environment generation produced a degenerate task");
  return task;
}

std::vector<Band> band_assignment(const EnvSpec& spec) {
  const std::array<std::pair<Band, double>, 4> fracs = {
      {{Band::easy, spec.frac_easy},
       {Band::medium, spec.frac_medium},
       {Band::hard, spec.frac_hard},
       {Band::saturated, spec.frac_saturated}}};
  const auto g = static_cast<std::size_t>(spec.prompts);
  std::array<std::size_t, 4> counts{};
  std::array<double, 4> remainders{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double exact = fracs[i].second * static_cast<double>(g);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    remainders[i] = exact - std::floor(exact);
    assigned += counts[i];
  }
  while (assigned < g) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < 4; ++i)
      if (remainders[i] > remainders[best]) best = i;
    ++counts[best];
    remainders[best] = -1.0;
    ++assigned;
  }
  std::vector<Band> bands;
  for (std::size_t i = 0; i < 4; ++i)
    bands.insert(bands.end(), counts[i], fracs[i].first);
  // Seeded spread so prompt index does not correlate with difficulty.
  Rng rng(mix_seed(spec.seed, 0xba4d));
  for (std::size_t i = bands.size(); i > 1; --i)
    std::swap(bands[i - 1], bands[rng.uniform_index(i)]);
  return bands;
}

void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(threads, n);
  std::atomic<std::size_t> next{0};
  std::vector<std::future<void>> futures;
  futures.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    futures.push_back(std::async(std::launch::async, [&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    }));
  }
  std::exception_ptr error;
  for (auto& f : futures) {
    try {
      f.get();
    } catch (...) {
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

void EnvSpec::validate() const {
  const auto fail = [](const char* field, const char* why) {
    throw ConfigError(std::string("env.") + field + ": " + why);
  };
  if (prompts < 1) fail("prompts", "must be at least 1");
  if (templates_per_prompt < 2) fail("templates_per_prompt", "must be at least 2");
  for (double f : {frac_easy, frac_medium, frac_hard, frac_saturated})
    if (f < 0.0 || f > 1.0) fail("frac_*", "fractions must lie in [0, 1]");
  const double sum = frac_easy + frac_medium + frac_hard + frac_saturated;
  if (std::abs(sum - 1.0) > 1e-6) fail("frac_*", "fractions must sum to 1");
  if (!(band_low < band_high)) fail("band_low", "must be below band_high");
  if (judge_noise_std < 0.0) fail("judge_noise_std", "must be non-negative");
  if (judge_flip_fraction < 0.0 || judge_flip_fraction > 1.0)
    fail("judge_flip_fraction", "must lie in [0, 1]");
}

std::vector<SyntheticTask> generate_env(const EnvSpec& spec) {
  spec.validate();
  const auto bands = band_assignment(spec);
  std::vector<SyntheticTask> tasks;
  tasks.reserve(bands.size());
  for (std::size_t i = 0; i < bands.size(); ++i)
    tasks.push_back(build_task(i, bands[i], spec));
  return tasks;
}

nlohmann::json SyntheticTask::to_json() const {
  nlohmann::json j;
  j["prompt_id"] = prompt_id;
  j["prompt"] = prompt;
  j["truth"] = graph_to_json(truth);
  j["reference_reasoning"] = reference_reasoning;
  j["optimal_index"] = optimal_index;
  j["templates"] = nlohmann::json::array();
  for (const auto& t : templates) {
    j["templates"].push_back({{"prediction", graph_to_json(t.prediction)},
                              {"format_valid", t.format_valid},
                              {"latent_quality", t.latent_quality},
                              {"rationale", t.rationale},
                              {"outcome_total", t.outcome.total}});
  }
  return j;
}

std::string_view algorithm_name(Algorithm algo) {
  switch (algo) {
    case Algorithm::awpo: return "awpo";
    case Algorithm::grpo_outcome: return "grpo_outcome";
    case Algorithm::grpo_mixed: return "grpo_mixed";
  }
  return "awpo";
}

Algorithm parse_algorithm(std::string_view name) {
  if (name == "awpo") return Algorithm::awpo;
  if (name == "grpo_outcome") return Algorithm::grpo_outcome;
  if (name == "grpo_mixed") return Algorithm::grpo_mixed;
  throw ConfigError("algorithm: unknown value \"" + std::string(name) +
                    "\" (expected awpo, grpo_outcome or grpo_mixed)");
}

void JudgeConfig::validate() const {
  if (constant_score < 0.0 || constant_score > 1.0)
    throw ConfigError("judge.constant_score: must lie in [0, 1]");
  if (kind == Kind::remote) remote.validate();
}

void TrainerConfig::validate() const {
  hyper.validate();
  env.validate();
  judge.validate();
  if (iterations < 1) throw ConfigError("iterations: must be at least 1");
  if (!(fixed_clip > 0.0)) throw ConfigError("fixed_clip: must be positive");
  if (!(eval_fraction > 0.0) || eval_fraction > 1.0)
    throw ConfigError("eval_fraction: must lie in (0, 1]");
  if (checkpoint_every < 0)
    throw ConfigError("checkpoint_every: must be non-negative");
  if (threads < 1) throw ConfigError("threads: must be at least 1");
}

nlohmann::json RunRecord::to_json() const {
  nlohmann::json j;
  j["iteration"] = iteration;
  j["clip_radius"] = clip_radius;
  j["objective"] = objective;
  j["mean_r_out"] = mean_r_out;
  j["mean_r_mix"] = mean_r_mix;
  j["mean_w_mix"] = mean_mix_weight;
  j["exact_match"] = exact_match;
  j["gates"] = nlohmann::json::array();
  for (std::size_t g = 0; g < gates.size(); ++g)
    j["gates"].push_back(gate_to_json(g, gates[g]));
  if (!advantages.empty()) {
    j["advantages"] = nlohmann::json::array();
    for (const auto& adv : advantages) j["advantages"].push_back(advantages_to_json(adv));
  }
  return j;
}

EvalMetrics evaluate(const TabularPolicy& policy,
                     const std::vector<SyntheticTask>& tasks,
                     std::span<const std::size_t> eval_ids) {
  std::vector<std::size_t> all;
  if (eval_ids.empty()) {
    all.resize(tasks.size());
    std::iota(all.begin(), all.end(), 0);
    eval_ids = all;
  }
  EvalMetrics m;
  for (const std::size_t g : eval_ids) {
    const auto& task = tasks[g];
    m.exact_match += policy.greedy(g) == task.optimal_index ? 1.0 : 0.0;
    std::vector<double> totals(task.templates.size());
    std::vector<double> execs(task.templates.size());
    for (std::size_t a = 0; a < task.templates.size(); ++a) {
      totals[a] = task.templates[a].outcome.total;
      execs[a] = task.templates[a].outcome.s_exec;
    }
    m.mean_outcome += kernels::dot(policy.probs(g), totals);
    m.mean_exec += kernels::dot(policy.probs(g), execs);
  }
  const double n = static_cast<double>(eval_ids.size());
  m.exact_match /= n;
  m.mean_outcome /= n;
  m.mean_exec /= n;
  return m;
}

std::vector<std::size_t> eval_prompt_ids(const TrainerConfig& cfg,
                                         std::size_t num_tasks) {
  std::vector<std::size_t> ids(num_tasks);
  std::iota(ids.begin(), ids.end(), 0);
  if (cfg.eval_fraction >= 1.0) return ids;
  const auto keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(
             std::lround(cfg.eval_fraction * static_cast<double>(num_tasks))));
  Rng rng(mix_seed(cfg.env.seed, 0x6576616cULL));
  for (std::size_t i = ids.size(); i > 1; --i)
    std::swap(ids[i - 1], ids[rng.uniform_index(i)]);
  ids.resize(keep);
  std::sort(ids.begin(), ids.end());
  return ids;
}

namespace {

std::unique_ptr<JudgeScorer> make_judge(const TrainerConfig& cfg) {
  switch (cfg.judge.kind) {
    case JudgeConfig::Kind::constant:
      return std::make_unique<ConstantJudge>(cfg.judge.constant_score);
    case JudgeConfig::Kind::remote:
      return std::make_unique<RemoteJudge>(cfg.judge.remote);
    case JudgeConfig::Kind::mock:
      break;
  }
  MockJudgeOptions opt;
  opt.seed = mix_seed(cfg.env.seed, 0x4a554447ULL);
  opt.noise_std = cfg.env.judge_noise_std;
  opt.flip_fraction = cfg.env.judge_flip_fraction;
  return std::make_unique<MockJudge>(opt);
}

GateState apply_algorithm(GateState gs, Algorithm algo) {
  switch (algo) {
    case Algorithm::grpo_outcome:
      gs.mix_weight = 0.0;
      gs.difficulty_weight = 1.0;
      break;
    case Algorithm::grpo_mixed:
      gs.mix_weight = 1.0;
      gs.difficulty_weight = 1.0;
      break;
    case Algorithm::awpo:
      break;
  }
  return gs;
}

}  // namespace

TrainResult train(const TrainerConfig& cfg, RunSink* sink) {
  cfg.validate();
  const auto tasks = generate_env(cfg.env);
  const std::size_t num_prompts = tasks.size();
  const auto k = static_cast<std::size_t>(cfg.hyper.k);

  std::vector<std::string> ids;
  std::vector<std::size_t> sizes;
  for (const auto& task : tasks) {
    ids.push_back(task.prompt_id);
    sizes.push_back(task.templates.size());
  }
  TabularPolicy policy = TabularPolicy::uniform(ids, sizes, cfg.hyper.seed);

  const auto judge = make_judge(cfg);
  const auto eval_ids = eval_prompt_ids(cfg, num_prompts);

  TrainResult result;
  int perfect_streak = 0;
  for (long iter = 1; iter <= cfg.iterations; ++iter) {
    const auto t_start = std::chrono::steady_clock::now();
    const TabularPolicy snapshot = policy;  // sampling distribution for this step

    std::vector<GroupBatch> batches(num_prompts);
    std::vector<JudgeRequest> requests(num_prompts * k);
    parallel_for(num_prompts, cfg.threads, [&](std::size_t g) {
      Rng rng(mix_seed(cfg.hyper.seed, static_cast<std::uint64_t>(iter), g));
      auto& batch = batches[g];
      batch.group_id = g;
      batch.samples.resize(k);
      for (std::size_t j = 0; j < k; ++j) {
        const std::size_t a = snapshot.sample(g, rng);
        auto& s = batch.samples[j];
        s.action = a;
        s.old_log_prob = snapshot.log_prob(g, a);
        s.r_out = tasks[g].templates[a].outcome.total;
        auto& req = requests[g * k + j];
        req.id = tasks[g].prompt_id + "#" + std::to_string(iter) + "#" +
                 std::to_string(j);
        req.prompt = tasks[g].prompt;
        req.reasoning = tasks[g].templates[a].rationale;
        req.reference_reasoning = tasks[g].reference_reasoning;
        req.truth = tasks[g].truth;
        req.prediction = tasks[g].templates[a].prediction;
      }
    });

    const auto reasoning = judge->score_batch(requests);

    std::vector<GateState> gates(num_prompts);
    std::vector<GroupAdvantages> advs(num_prompts);
    parallel_for(num_prompts, cfg.threads, [&](std::size_t g) {
      auto& batch = batches[g];
      for (std::size_t j = 0; j < k; ++j) {
        batch.samples[j].r_mix =
            batch.samples[j].r_out + reasoning[g * k + j].score;
      }
      gates[g] = apply_algorithm(gate(group_stats(batch), cfg.hyper),
                                 cfg.algorithm);
      advs[g] = advantages(batch, gates[g], cfg.hyper);
    });

    const double clip = cfg.algorithm == Algorithm::awpo
                            ? batch_clip_radius(gates, cfg.hyper)
                            : cfg.fixed_clip;

    std::vector<FlatSample> flat;
    flat.reserve(num_prompts * k);
    double sum_r_out = 0.0, sum_r_mix = 0.0;
    for (std::size_t g = 0; g < num_prompts; ++g) {
      for (std::size_t j = 0; j < k; ++j) {
        const auto& s = batches[g].samples[j];
        flat.push_back({g, s.action, s.old_log_prob, advs[g].a_final[j]});
        sum_r_out += s.r_out;
        sum_r_mix += s.r_mix;
      }
    }

    for (int epoch = 0; epoch < cfg.hyper.epochs; ++epoch) {
      auto grad = surrogate_gradient(flat, policy, clip);
      for (auto& v : grad) v *= cfg.hyper.learning_rate;
      policy = policy.updated(grad);
    }

    std::vector<double> new_log_probs(flat.size());
    for (std::size_t i = 0; i < flat.size(); ++i)
      new_log_probs[i] = policy.log_prob(flat[i].prompt, flat[i].action);
    const double objective = surrogate_objective(flat, new_log_probs, clip);

    const EvalMetrics eval = evaluate(policy, tasks, eval_ids);

    RunRecord record;
    record.iteration = iter;
    record.gates = std::move(gates);
    if (cfg.log_advantages) record.advantages = advs;
    record.clip_radius = clip;
    record.objective = objective;
    record.mean_r_out = sum_r_out / static_cast<double>(flat.size());
    record.mean_r_mix = sum_r_mix / static_cast<double>(flat.size());
    record.mean_mix_weight = mean_mix_weight(record.gates);
    record.exact_match = eval.exact_match;
    record.wall_clock_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
            .count();
    if (sink) sink->on_record(record);
    result.records.push_back(std::move(record));
    if (sink && cfg.checkpoint_every > 0 && iter % cfg.checkpoint_every == 0)
      sink->on_checkpoint(iter, policy);

    result.final_eval = eval;
    if (cfg.early_stop) {
      perfect_streak = eval.exact_match >= 1.0 ? perfect_streak + 1 : 0;
      if (perfect_streak >= 10) {
        result.early_stopped = true;
        break;
      }
    }
  }

  result.policy = std::move(policy);
  if (result.records.empty())
    result.final_eval = evaluate(result.policy, tasks, eval_ids);
  return result;
}

}  // namespace awpo
