#include "awpo/config.hpp"

#include <fstream>

namespace awpo {

namespace {

// Strict field reader: tracks the dotted path for diagnostics and flags keys
// that no reader consumed.
class Reader {
 public:
  Reader(const nlohmann::json& j, std::string path)
      : json_(j), path_(std::move(path)) {
    if (!json_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  ~Reader() = default;

  template <typename T>
  void read(const char* key, T& out) {
    const auto it = json_.find(key);
    if (it == json_.end()) return;
    consumed_.insert(key);
    try {
      out = it->get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(dotted(key) + ": wrong type");
    }
  }

  void read_fraction(const char* key, double& out) {
    read(key, out);
  }

  bool has(const char* key) const { return json_.contains(key); }

  const nlohmann::json* object(const char* key) {
    const auto it = json_.find(key);
    if (it == json_.end()) return nullptr;
    consumed_.insert(key);
    if (!it->is_object()) throw ConfigError(dotted(key) + ": expected an object");
    return &*it;
  }

  std::string consume_string(const char* key, std::string fallback) {
    std::string out = std::move(fallback);
    read(key, out);
    return out;
  }

  void finish() const {
    for (const auto& [key, value] : json_.items()) {
      if (!consumed_.count(key))
        throw ConfigError(dotted(key.c_str()) + ": unknown key");
    }
  }

  std::string dotted(const char* key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  const nlohmann::json& json_;
  std::string path_;
  std::set<std::string> consumed_;
};

HyperParams parse_hyper(const nlohmann::json& j) {
  HyperParams hp;
  Reader r(j, "hyper");
  r.read("k", hp.k);
  r.read("eps_std", hp.eps_std);
  r.read("eps_mix", hp.eps_mix);
  r.read("r_max_out", hp.r_max_out);
  r.read("tau_low", hp.tau_low);
  r.read("tau_high", hp.tau_high);
  r.read("alpha_base", hp.alpha_base);
  r.read("alpha_prio", hp.alpha_prio);
  r.read("eps_min", hp.eps_min);
  r.read("eps_max", hp.eps_max);
  r.read("eps_norm", hp.eps_norm);
  r.read("learning_rate", hp.learning_rate);
  r.read("epochs", hp.epochs);
  r.read("seed", hp.seed);
  r.finish();
  return hp;
}

EnvSpec parse_env(const nlohmann::json& j) {
  EnvSpec env;
  Reader r(j, "env");
  r.read("prompts", env.prompts);
  r.read("templates_per_prompt", env.templates_per_prompt);
  r.read("frac_easy", env.frac_easy);
  r.read("frac_medium", env.frac_medium);
  r.read("frac_hard", env.frac_hard);
  r.read("frac_saturated", env.frac_saturated);
  r.read("band_low", env.band_low);
  r.read("band_high", env.band_high);
  r.read("band_saturated", env.band_saturated);
  r.read("judge_noise_std", env.judge_noise_std);
  r.read("judge_flip_fraction", env.judge_flip_fraction);
  r.read("seed", env.seed);
  r.finish();
  return env;
}

JudgeConfig parse_judge(const nlohmann::json& j) {
  JudgeConfig judge;
  Reader r(j, "judge");
  const std::string kind = r.consume_string("kind", "mock");
  if (kind == "mock")
    judge.kind = JudgeConfig::Kind::mock;
  else if (kind == "constant")
    judge.kind = JudgeConfig::Kind::constant;
  else if (kind == "remote")
    judge.kind = JudgeConfig::Kind::remote;
  else
    throw ConfigError("judge.kind: unknown value \"" + kind + "\"");
  r.read("constant_score", judge.constant_score);
  r.read("endpoint", judge.remote.endpoint);
  r.read("timeout_ms", judge.remote.timeout_ms);
  r.read("retries", judge.remote.retries);
  r.read("concurrency", judge.remote.concurrency);
  r.read("cache_dir", judge.remote.cache_dir);
  const std::string fallback = r.consume_string("fallback", "error");
  if (fallback == "error")
    judge.remote.fallback = RemoteJudgeOptions::Fallback::error;
  else if (fallback == "zero")
    judge.remote.fallback = RemoteJudgeOptions::Fallback::zero;
  else
    throw ConfigError("judge.fallback: unknown value \"" + fallback + "\"");
  r.finish();
  return judge;
}

TheoryConfig parse_theory(const nlohmann::json& j) {
  TheoryConfig cfg;
  Reader r(j, "theory");
  r.read("smoothness", cfg.smoothness);
  r.read("smoothness_safety", cfg.smoothness_safety);
  r.read("batch_size", cfg.batch_size);
  r.read("learning_rate", cfg.learning_rate);
  r.read("mc_samples", cfg.mc_samples);
  r.read("tolerance", cfg.tolerance);
  r.read("lambda_reg", cfg.lambda_reg);
  r.read("trials", cfg.trials);
  r.read("seed", cfg.seed);
  r.finish();
  return cfg;
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig cfg;
  Reader r(j, "");
  cfg.trainer.algorithm =
      parse_algorithm(r.consume_string("algorithm", "awpo"));
  r.read("iterations", cfg.trainer.iterations);
  r.read("fixed_clip", cfg.trainer.fixed_clip);
  r.read("eval_fraction", cfg.trainer.eval_fraction);
  r.read("early_stop", cfg.trainer.early_stop);
  r.read("checkpoint_every", cfg.trainer.checkpoint_every);
  r.read("log_advantages", cfg.trainer.log_advantages);
  r.read("threads", cfg.trainer.threads);
  r.read("out_dir", cfg.out_dir);
  if (const auto* sub = r.object("hyper")) cfg.trainer.hyper = parse_hyper(*sub);
  if (const auto* sub = r.object("env")) cfg.trainer.env = parse_env(*sub);
  if (const auto* sub = r.object("judge")) cfg.trainer.judge = parse_judge(*sub);
  if (const auto* sub = r.object("theory")) cfg.theory = parse_theory(*sub);
  r.finish();
  cfg.validate();
  return cfg;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  j["algorithm"] = std::string(algorithm_name(trainer.algorithm));
  j["iterations"] = trainer.iterations;
  j["fixed_clip"] = trainer.fixed_clip;
  j["eval_fraction"] = trainer.eval_fraction;
  j["early_stop"] = trainer.early_stop;
  j["checkpoint_every"] = trainer.checkpoint_every;
  j["log_advantages"] = trainer.log_advantages;
  j["threads"] = trainer.threads;
  j["out_dir"] = out_dir;
  const auto& hp = trainer.hyper;
  j["hyper"] = {{"k", hp.k},
                {"eps_std", hp.eps_std},
                {"eps_mix", hp.eps_mix},
                {"r_max_out", hp.r_max_out},
                {"tau_low", hp.tau_low},
                {"tau_high", hp.tau_high},
                {"alpha_base", hp.alpha_base},
                {"alpha_prio", hp.alpha_prio},
                {"eps_min", hp.eps_min},
                {"eps_max", hp.eps_max},
                {"eps_norm", hp.eps_norm},
                {"learning_rate", hp.learning_rate},
                {"epochs", hp.epochs},
                {"seed", hp.seed}};
  const auto& env = trainer.env;
  j["env"] = {{"prompts", env.prompts},
              {"templates_per_prompt", env.templates_per_prompt},
              {"frac_easy", env.frac_easy},
              {"frac_medium", env.frac_medium},
              {"frac_hard", env.frac_hard},
              {"frac_saturated", env.frac_saturated},
              {"band_low", env.band_low},
              {"band_high", env.band_high},
              {"band_saturated", env.band_saturated},
              {"judge_noise_std", env.judge_noise_std},
              {"judge_flip_fraction", env.judge_flip_fraction},
              {"seed", env.seed}};
  const auto& judge = trainer.judge;
  const char* kind = judge.kind == JudgeConfig::Kind::mock ? "mock"
                     : judge.kind == JudgeConfig::Kind::constant ? "constant"
                                                                 : "remote";
  j["judge"] = {{"kind", kind},
                {"constant_score", judge.constant_score},
                {"endpoint", judge.remote.endpoint},
                {"timeout_ms", judge.remote.timeout_ms},
                {"retries", judge.remote.retries},
                {"concurrency", judge.remote.concurrency},
                {"cache_dir", judge.remote.cache_dir},
                {"fallback",
                 judge.remote.fallback == RemoteJudgeOptions::Fallback::zero
                     ? "zero"
                     : "error"}};
  j["theory"] = {{"smoothness", theory.smoothness},
                 {"smoothness_safety", theory.smoothness_safety},
                 {"batch_size", theory.batch_size},
                 {"learning_rate", theory.learning_rate},
                 {"mc_samples", theory.mc_samples},
                 {"tolerance", theory.tolerance},
                 {"lambda_reg", theory.lambda_reg},
                 {"trials", theory.trials},
                 {"seed", theory.seed}};
  return j;
}

void RunConfig::validate() const {
  trainer.validate();
  theory.validate();
  if (out_dir.empty()) throw ConfigError("out_dir: must not be empty");
}

void apply_override(nlohmann::json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override \"" + assignment + "\": expected path=value");
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;  // bare strings need no quotes

  nlohmann::json* node = &j;
  std::size_t start = 0;
  for (;;) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (key.empty())
      throw ConfigError("override \"" + assignment + "\": empty path segment");
    if (dot == std::string::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

RunConfig RunConfig::load(const std::string& path,
                          const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError(path + ": invalid JSON");
  for (const auto& assignment : overrides) apply_override(j, assignment);
  // The judge endpoint can be swapped per deployment without editing the file.
  if (const char* endpoint = std::getenv("AWPO_JUDGE_ENDPOINT"))
    j["judge"]["endpoint"] = endpoint;
  return from_json(j);
}

}  // namespace awpo
