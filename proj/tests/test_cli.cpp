#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"

namespace {

namespace fs = std::filesystem;

struct CommandResult {
  int exit_code = -1;
  std::string output;  // stdout only
};

CommandResult run_cli(const std::string& args) {
  const std::string cmd = std::string(AWPO_CLI_PATH) + " " + args + " 2>/dev/null";
  std::array<char, 4096> buf{};
  CommandResult result;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0)
    result.output.append(buf.data(), n);
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path tmp_dir(const std::string& name) {
  const fs::path dir = fs::path(AWPO_TEST_TMP) / "cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// the three hand-derived fixture lines: perfect, one wrong unit, empty
void write_score_fixture(const fs::path& dir) {
  const nlohmann::json truth_graph = nlohmann::json::array(
      {{{"name", "get_weather"},
        {"arguments", {{"city", "Paris"}, {"unit", "C"}}}}});
  std::ofstream truth(dir / "truth.jsonl");
  for (const char* id : {"a", "b", "c"})
    truth << nlohmann::json{{"prompt_id", id}, {"truth", truth_graph}}.dump()
          << "\n";

  const auto transcript = [](const char* unit) {
    return "```tool_call\n[{\"name\": \"get_weather\", \"arguments\": "
           "{\"city\": \"Paris\", \"unit\": \"" +
           std::string(unit) + "\"}}]\n```";
  };
  std::ofstream pred(dir / "pred.jsonl");
  pred << nlohmann::json{{"prompt_id", "a"}, {"response", transcript("C")}}.dump()
       << "\n";
  pred << nlohmann::json{{"prompt_id", "b"}, {"response", transcript("F")}}.dump()
       << "\n";
  pred << nlohmann::json{{"prompt_id", "c"},
                         {"response", "no call block here"}}
              .dump()
       << "\n";
}

nlohmann::json base_config(const fs::path& out_dir) {
  return {{"algorithm", "awpo"},
          {"iterations", 12},
          {"checkpoint_every", 6},
          {"out_dir", out_dir.string()},
          {"hyper", {{"k", 4}, {"seed", 3}}},
          {"env", {{"prompts", 4}, {"templates_per_prompt", 4}, {"seed", 5}}},
          {"theory", {{"trials", 12}, {"mc_samples", 2000}, {"seed", 8}}}};
}

}  // namespace

TEST_CASE("cli score: fixture totals and aggregate") {
  const auto dir = tmp_dir("score");
  write_score_fixture(dir);
  const auto res = run_cli("score --pred " + (dir / "pred.jsonl").string() +
                           " --truth " + (dir / "truth.jsonl").string());
  REQUIRE(res.exit_code == 0);
  const auto report = nlohmann::json::parse(res.output);
  REQUIRE(report["lines"].size() == 3);
  CHECK(report["lines"][0]["total"] == 2.0);
  CHECK(report["lines"][1]["total"] == 1.75);
  CHECK(report["lines"][1]["s_exec"] == 0.75);
  CHECK(report["lines"][2]["total"] == 0.0);
  CHECK(report["aggregate"]["mean_total"] == doctest::Approx(3.75 / 3.0));
}

TEST_CASE("cli score: id mismatch exits with the line number") {
  const auto dir = tmp_dir("score_mismatch");
  write_score_fixture(dir);
  // swap an id
  auto lines = read_file(dir / "pred.jsonl");
  lines.replace(lines.find("\"b\""), 3, "\"z\"");
  std::ofstream(dir / "pred.jsonl") << lines;
  const auto res = run_cli("score --pred " + (dir / "pred.jsonl").string() +
                           " --truth " + (dir / "truth.jsonl").string());
  CHECK(res.exit_code == 1);

  const auto missing = run_cli("score --pred /nonexistent.jsonl --truth " +
                               (dir / "truth.jsonl").string());
  CHECK(missing.exit_code == 1);
}

TEST_CASE("cli train: run directory artifacts and byte-stable reruns") {
  const auto dir = tmp_dir("train");
  const auto run_dir = dir / "run";
  const auto cfg_path = dir / "config.json";
  std::ofstream(cfg_path) << base_config(run_dir).dump(2);

  const auto config_bytes_before = read_file(cfg_path);
  const auto res =
      run_cli("train --config " + cfg_path.string() +
              " --set algorithm=grpo_outcome --set iterations=10");
  REQUIRE(res.exit_code == 0);
  CHECK(read_file(cfg_path) == config_bytes_before);  // inputs stay untouched
  CHECK(fs::exists(run_dir / "config.json"));
  CHECK(fs::exists(run_dir / "run.jsonl"));
  CHECK(fs::exists(run_dir / "metrics.json"));
  CHECK(fs::exists(run_dir / "timings.csv"));
  CHECK(fs::exists(run_dir / "ckpt_000006.json"));
  CHECK(fs::exists(run_dir / "policy_final.json"));

  const auto metrics = nlohmann::json::parse(read_file(run_dir / "metrics.json"));
  CHECK(metrics["algorithm"] == "grpo_outcome");
  CHECK(metrics["iterations_run"] == 10);

  std::size_t record_lines = 0;
  std::istringstream log(read_file(run_dir / "run.jsonl"));
  for (std::string line; std::getline(log, line);)
    record_lines += line.empty() ? 0 : 1;
  CHECK(record_lines == 10);

  // rerun reproduces metrics and log byte for byte
  const auto metrics_bytes = read_file(run_dir / "metrics.json");
  const auto log_bytes = read_file(run_dir / "run.jsonl");
  const auto rerun =
      run_cli("train --config " + cfg_path.string() +
              " --set algorithm=grpo_outcome --set iterations=10");
  REQUIRE(rerun.exit_code == 0);
  CHECK(read_file(run_dir / "metrics.json") == metrics_bytes);
  CHECK(read_file(run_dir / "run.jsonl") == log_bytes);
}

TEST_CASE("cli train: config errors exit 2") {
  const auto dir = tmp_dir("train_bad");
  const auto cfg_path = dir / "config.json";
  auto cfg = base_config(dir / "run");
  cfg["hyper"]["k"] = 1;
  std::ofstream(cfg_path) << cfg.dump(2);
  CHECK(run_cli("train --config " + cfg_path.string()).exit_code == 2);
  CHECK(run_cli("train --config /nonexistent.json").exit_code == 2);
  CHECK(run_cli("train").exit_code == 2);           // missing required option
  CHECK(run_cli("not-a-command").exit_code == 2);
}

TEST_CASE("cli export: csv schema, row count, byte-stable re-export") {
  const auto dir = tmp_dir("export");
  const auto run_dir = dir / "run";
  const auto cfg_path = dir / "config.json";
  std::ofstream(cfg_path) << base_config(run_dir).dump(2);
  REQUIRE(run_cli("train --config " + cfg_path.string()).exit_code == 0);

  const auto res = run_cli("export --run " + run_dir.string());
  REQUIRE(res.exit_code == 0);
  const auto csv = read_file(run_dir / "export.csv");
  std::istringstream lines(csv);
  std::string header;
  std::getline(lines, header);
  CHECK(header ==
        "iteration,objective,mean_r_out,mean_r_mix,mean_w_mix,clip_radius,"
        "exact_match");
  std::size_t rows = 0;
  for (std::string line; std::getline(lines, line);) rows += line.empty() ? 0 : 1;
  CHECK(rows == 12);

  REQUIRE(run_cli("export --run " + run_dir.string()).exit_code == 0);
  CHECK(read_file(run_dir / "export.csv") == csv);

  CHECK(run_cli("export --run " + (dir / "empty").string()).exit_code == 1);
}

TEST_CASE("cli verify-bounds: clean audit exits 0 with a schema-complete report") {
  const auto dir = tmp_dir("verify");
  const auto cfg_path = dir / "config.json";
  std::ofstream(cfg_path) << base_config(dir / "run").dump(2);
  const auto out_path = dir / "report.json";
  const auto res = run_cli("verify-bounds --config " + cfg_path.string() +
                           " --out " + out_path.string());
  REQUIRE(res.exit_code == 0);
  const auto report = nlohmann::json::parse(read_file(out_path));
  CHECK(report["exact_bounds_satisfied"] == true);
  CHECK(report["skipped_degenerate"] == 2);
  REQUIRE(report["reports"].is_array());
  bool saw_gradient_bound = false;
  for (const auto& r : report["reports"]) {
    CHECK(r.contains("min_margin"));
    CHECK(r.contains("trials"));
    saw_gradient_bound =
        saw_gradient_bound || r["name"] == "lemma2_gradient_norm";
  }
  CHECK(saw_gradient_bound);
}
