#include "awpo/runner.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace awpo {

namespace {

class DirectorySink final : public RunSink {
 public:
  explicit DirectorySink(const std::string& dir)
      : dir_(dir),
        records_(dir + "/run.jsonl"),
        timings_(dir + "/timings.csv") {
    if (!records_ || !timings_)
      throw InputError("cannot write run directory " + dir);
    timings_ << "iteration,wall_clock_sec\n";
  }

  void on_record(const RunRecord& record) override {
    records_ << record.to_json().dump() << '\n';
    records_.flush();  // partial logs survive an aborted run
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%ld,%.6f\n", record.iteration,
                  record.wall_clock_sec);
    timings_ << buf;
    timings_.flush();
  }

  void on_checkpoint(long iteration, const TabularPolicy& policy) override {
    char name[32];
    std::snprintf(name, sizeof(name), "ckpt_%06ld.json", iteration);
    policy.save(dir_ + "/" + name);
  }

 private:
  std::string dir_;
  std::ofstream records_;
  std::ofstream timings_;
};

}  // namespace

nlohmann::json metrics_json(const RunConfig& cfg, const TrainResult& result) {
  nlohmann::json j;
  j["algorithm"] = std::string(algorithm_name(cfg.trainer.algorithm));
  j["seed"] = cfg.trainer.hyper.seed;
  j["env_seed"] = cfg.trainer.env.seed;
  j["iterations_run"] = result.records.size();
  j["early_stopped"] = result.early_stopped;
  j["final"] = {{"exact_match", result.final_eval.exact_match},
                {"mean_outcome", result.final_eval.mean_outcome},
                {"mean_exec", result.final_eval.mean_exec}};
  double mean_w = 0.0;
  double final_clip = 0.0;
  for (const auto& rec : result.records) {
    mean_w += rec.mean_mix_weight;
    final_clip = rec.clip_radius;
  }
  if (!result.records.empty())
    mean_w /= static_cast<double>(result.records.size());
  j["mean_w_mix_over_run"] = mean_w;
  j["final_clip_radius"] = final_clip;
  return j;
}

RunArtifacts run_training_job(const RunConfig& cfg) {
  cfg.validate();
  std::filesystem::create_directories(cfg.out_dir);

  {
    std::ofstream config_copy(cfg.out_dir + "/config.json");
    if (!config_copy) throw InputError("cannot write " + cfg.out_dir);
    config_copy << cfg.to_json().dump(2) << '\n';
  }

  DirectorySink sink(cfg.out_dir);
  RunArtifacts artifacts;
  artifacts.dir = cfg.out_dir;
  try {
    artifacts.result = train(cfg.trainer, &sink);
  } catch (...) {
    // run.jsonl is already flushed up to the failing iteration
    throw;
  }

  artifacts.result.policy.save(cfg.out_dir + "/policy_final.json");
  std::ofstream metrics(cfg.out_dir + "/metrics.json");
  metrics << metrics_json(cfg, artifacts.result).dump(2) << '\n';
  return artifacts;
}

}  // namespace awpo
