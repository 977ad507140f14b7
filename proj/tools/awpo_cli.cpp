#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "awpo/config.hpp"
#include "awpo/runner.hpp"

namespace {

// Exit-code contract: 0 success, 1 runtime failure, 2 config/usage error,
// 3 bound violation.
enum ExitCode { kOk = 0, kRuntime = 1, kUsage = 2, kBoundViolation = 3 };

int cmd_score(const std::string& pred_path, const std::string& truth_path,
              const std::string& out_path) {
  const auto truths = awpo::load_truth_jsonl(truth_path);
  const auto preds = awpo::load_pred_jsonl(pred_path);
  if (truths.size() != preds.size())
    throw awpo::InputError(
        "line " + std::to_string(std::min(truths.size(), preds.size()) + 1) +
        ": prediction and truth files have different lengths");

  nlohmann::json lines = nlohmann::json::array();
  double sum_total = 0.0, sum_exec = 0.0, sum_format = 0.0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (truths[i].prompt_id != preds[i].prompt_id)
      throw awpo::InputError("line " + std::to_string(i + 1) +
                             ": prompt_id mismatch (\"" + preds[i].prompt_id +
                             "\" vs \"" + truths[i].prompt_id + "\")");
    const auto parsed = awpo::parse_tool_graph(preds[i].response);
    const auto r =
        awpo::outcome_reward(truths[i].truth, parsed.graph, parsed.format_valid);
    lines.push_back({{"prompt_id", truths[i].prompt_id},
                     {"s_format", r.s_format},
                     {"r_name", r.r_name},
                     {"r_para", r.r_para},
                     {"r_value", r.r_value},
                     {"s_exec", r.s_exec},
                     {"total", r.total}});
    sum_total += r.total;
    sum_exec += r.s_exec;
    sum_format += r.s_format;
  }
  const double n = truths.empty() ? 1.0 : static_cast<double>(truths.size());
  nlohmann::json report;
  report["lines"] = std::move(lines);
  report["aggregate"] = {{"count", truths.size()},
                         {"mean_total", sum_total / n},
                         {"mean_s_exec", sum_exec / n},
                         {"mean_s_format", sum_format / n}};
  const std::string text = report.dump(2);
  std::cout << text << '\n';
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw awpo::InputError("cannot write " + out_path);
    out << text << '\n';
  }
  return kOk;
}

int cmd_train(const std::string& config_path,
              const std::vector<std::string>& overrides,
              const std::string& out_dir_flag) {
  auto cfg = awpo::RunConfig::load(config_path, overrides);
  if (!out_dir_flag.empty()) cfg.out_dir = out_dir_flag;
  try {
    const auto artifacts = awpo::run_training_job(cfg);
    std::cout << "run complete: dir=" << artifacts.dir
              << " iterations=" << artifacts.result.records.size()
              << " exact_match=" << artifacts.result.final_eval.exact_match
              << '\n';
    return kOk;
  } catch (const awpo::JudgeUnavailableError& e) {
    std::cerr << "error: " << e.what() << " (partial log flushed to " << cfg.out_dir
              << ")\n";
    return kRuntime;
  }
}

int cmd_verify_bounds(const std::string& config_path,
                      const std::vector<std::string>& overrides,
                      const std::string& out_path) {
  const auto cfg = awpo::RunConfig::load(config_path, overrides);
  const auto audit = awpo::run_bounds_audit(cfg.theory);
  const auto j = audit.to_json();
  for (const auto& report : audit.reports) {
    std::printf("%-32s %s  min_margin=%.3e  trials=%lld\n",
                report.name.c_str(), report.satisfied ? "ok  " : "FAIL",
                report.margin, static_cast<long long>(report.trials));
  }
  std::printf("skipped_degenerate=%lld\n",
              static_cast<long long>(audit.skipped_degenerate));
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw awpo::InputError("cannot write " + out_path);
    out << j.dump(2) << '\n';
  } else {
    std::cout << j.dump(2) << '\n';
  }
  return audit.all_exact_satisfied() ? kOk : kBoundViolation;
}

int cmd_export(const std::string& run_dir, const std::string& out_flag) {
  const std::string log_path = run_dir + "/run.jsonl";
  std::ifstream in(log_path);
  if (!in) throw awpo::InputError("missing run log " + log_path);
  const std::string out_path =
      out_flag.empty() ? run_dir + "/export.csv" : out_flag;
  std::ofstream out(out_path);
  if (!out) throw awpo::InputError("cannot write " + out_path);

  out << "iteration,objective,mean_r_out,mean_r_mix,mean_w_mix,clip_radius,"
         "exact_match\n";
  std::string line;
  std::size_t rows = 0;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw awpo::InputError(log_path + ":" + std::to_string(lineno) +
                             ": invalid JSON");
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  j.at("iteration").get<long long>(),
                  j.at("objective").get<double>(),
                  j.at("mean_r_out").get<double>(),
                  j.at("mean_r_mix").get<double>(),
                  j.at("mean_w_mix").get<double>(),
                  j.at("clip_radius").get<double>(),
                  j.at("exact_match").get<double>());
    out << buf;
    ++rows;
  }
  std::cout << "exported " << rows << " rows to " << out_path << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AWPO: tool-use RL with gated reasoning rewards"};
  app.require_subcommand(1);

  auto* score = app.add_subcommand("score", "Score a prediction file against a truth file");
  std::string pred_path, truth_path, score_out;
  score->add_option("--pred", pred_path, "prediction JSONL (prompt_id, response)")
      ->required();
  score->add_option("--truth", truth_path, "ground-truth JSONL (prompt_id, truth)")
      ->required();
  score->add_option("--out", score_out, "also write the JSON report here");

  auto* train = app.add_subcommand("train", "Run a training job into a run directory");
  std::string config_path, train_out_dir;
  std::vector<std::string> overrides;
  train->add_option("--config", config_path, "config JSON file")->required();
  train->add_option("--set", overrides, "dotted.path=value override (repeatable)");
  train->add_option("--out-dir", train_out_dir, "override the configured out_dir");

  auto* verify = app.add_subcommand("verify-bounds",
                                    "Run the randomized bound audit");
  std::string verify_config, verify_out;
  std::vector<std::string> verify_overrides;
  verify->add_option("--config", verify_config, "config JSON file")->required();
  verify->add_option("--set", verify_overrides, "dotted.path=value override");
  verify->add_option("--out", verify_out, "write the JSON report here");

  auto* exp = app.add_subcommand("export", "Export a run log as CSV");
  std::string run_dir, export_out;
  exp->add_option("--run", run_dir, "run directory containing run.jsonl")->required();
  exp->add_option("--out", export_out, "CSV path (default <run>/export.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (score->parsed()) return cmd_score(pred_path, truth_path, score_out);
    if (train->parsed()) return cmd_train(config_path, overrides, train_out_dir);
    if (verify->parsed())
      return cmd_verify_bounds(verify_config, verify_overrides, verify_out);
    if (exp->parsed()) return cmd_export(run_dir, export_out);
  } catch (const awpo::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
