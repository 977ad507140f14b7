#include "awpo/toolgraph.hpp"

#include <fstream>
#include <sstream>

#include "awpo/common.hpp"

namespace awpo {

namespace {

constexpr std::string_view kFenceOpen = "```tool_call";
constexpr std::string_view kFenceClose = "```";

bool at_line_start(std::string_view text, std::size_t pos) {
  return pos == 0 || text[pos - 1] == '\n';
}

// Rest of the line after pos must be blank for a fence marker to count.
bool line_blank_after(std::string_view text, std::size_t pos) {
  while (pos < text.size() && text[pos] != '\n') {
    if (text[pos] != ' ' && text[pos] != '\t' && text[pos] != '\r') return false;
    ++pos;
  }
  return true;
}

}  // namespace

ParseResult parse_tool_graph(std::string_view text) {
  // Last opening fence wins; earlier text (including earlier blocks) is
  // treated as reasoning.
  std::size_t open = std::string_view::npos;
  for (std::size_t pos = text.find(kFenceOpen); pos != std::string_view::npos;
       pos = text.find(kFenceOpen, pos + 1)) {
    if (at_line_start(text, pos) && line_blank_after(text, pos + kFenceOpen.size()))
      open = pos;
  }
  if (open == std::string_view::npos) return {};

  std::size_t body_start = text.find('\n', open);
  if (body_start == std::string_view::npos) return {};
  ++body_start;

  // Closing fence: a line that is exactly ``` (modulo trailing blanks).
  std::size_t close = std::string_view::npos;
  for (std::size_t pos = text.find(kFenceClose, body_start);
       pos != std::string_view::npos; pos = text.find(kFenceClose, pos + 1)) {
    if (at_line_start(text, pos) && line_blank_after(text, pos + kFenceClose.size())) {
      close = pos;
      break;
    }
  }
  if (close == std::string_view::npos) return {};

  const std::string_view body = text.substr(body_start, close - body_start);
  const nlohmann::json parsed =
      nlohmann::json::parse(body, /*cb=*/nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded() || !parsed.is_array()) return {};

  ParseResult result;
  for (const auto& item : parsed) {
    if (!item.is_object()) return {};
    const auto name_it = item.find("name");
    const auto args_it = item.find("arguments");
    if (name_it == item.end() || args_it == item.end()) return {};
    if (!name_it->is_string() || name_it->get<std::string>().empty()) return {};
    if (!args_it->is_object()) return {};
    result.graph.calls.push_back({name_it->get<std::string>(), *args_it});
  }
  result.format_valid = true;
  return result;
}

std::string to_transcript(const ToolGraph& g, std::string_view reasoning) {
  std::string out;
  if (!reasoning.empty()) {
    out.append(reasoning);
    if (reasoning.back() != '\n') out.push_back('\n');
  }
  out.append(kFenceOpen);
  out.push_back('\n');
  out.append(graph_to_json(g).dump());
  out.append("\n```\n");
  return out;
}

nlohmann::json graph_to_json(const ToolGraph& g) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& call : g.calls) {
    arr.push_back({{"name", call.name}, {"arguments", call.params}});
  }
  return arr;
}

ToolGraph graph_from_json(const nlohmann::json& arr) {
  if (!arr.is_array()) throw InputError("tool graph: expected a JSON array");
  ToolGraph g;
  for (const auto& item : arr) {
    if (!item.is_object() || !item.contains("name") || !item.contains("arguments"))
      throw InputError("tool graph: call must be {\"name\", \"arguments\"}");
    if (!item["name"].is_string() || item["name"].get<std::string>().empty())
      throw InputError("tool graph: call name must be a non-empty string");
    if (!item["arguments"].is_object())
      throw InputError("tool graph: arguments must be an object");
    g.calls.push_back({item["name"].get<std::string>(), item["arguments"]});
  }
  return g;
}

std::set<std::string> name_set(const ToolGraph& g) {
  std::set<std::string> names;
  for (const auto& call : g.calls) names.insert(call.name);
  return names;
}

namespace {

std::vector<nlohmann::json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::vector<nlohmann::json> lines;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw InputError(path + ":" + std::to_string(lineno) + ": not a JSON object");
    j["__line"] = lineno;
    lines.push_back(std::move(j));
  }
  return lines;
}

std::string require_string(const nlohmann::json& j, const char* key,
                           const std::string& path) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_string())
    throw InputError(path + ":" + j["__line"].dump() + ": missing string field \"" +
                     key + "\"");
  return it->get<std::string>();
}

}  // namespace

std::vector<TruthRecord> load_truth_jsonl(const std::string& path) {
  std::vector<TruthRecord> records;
  for (const auto& j : read_jsonl(path)) {
    TruthRecord rec;
    rec.prompt_id = require_string(j, "prompt_id", path);
    const auto truth_it = j.find("truth");
    if (truth_it == j.end())
      throw InputError(path + ":" + j["__line"].dump() + ": missing field \"truth\"");
    try {
      rec.truth = graph_from_json(*truth_it);
    } catch (const InputError& e) {
      throw InputError(path + ":" + j["__line"].dump() + ": " + e.what());
    }
    if (const auto it = j.find("reference_reasoning");
        it != j.end() && it->is_string())
      rec.reference_reasoning = it->get<std::string>();
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<PredRecord> load_pred_jsonl(const std::string& path) {
  std::vector<PredRecord> records;
  for (const auto& j : read_jsonl(path)) {
    PredRecord rec;
    rec.prompt_id = require_string(j, "prompt_id", path);
    rec.response = require_string(j, "response", path);
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace awpo
