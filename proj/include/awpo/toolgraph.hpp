#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace awpo {

// Parameter values are JSON values compared structurally: integer and decimal
// spellings of the same number are equal, strings never equal numbers, lists
// compare elementwise in order, maps key by key.
using ParamValue = nlohmann::json;

struct ToolCall {
  std::string name;
  nlohmann::json params = nlohmann::json::object();  // object; keys unique

  bool operator==(const ToolCall&) const = default;
};

struct ToolGraph {
  std::vector<ToolCall> calls;

  bool empty() const { return calls.empty(); }
  std::size_t size() const { return calls.size(); }
  bool operator==(const ToolGraph&) const = default;
};

struct ParseResult {
  ToolGraph graph;
  bool format_valid = false;
};

// Extracts the last fenced tool-call block from a transcript. The block is a
// line "```tool_call", a JSON array of {"name": ..., "arguments": {...}}
// objects, and a closing "```" line. Total and deterministic: anything
// malformed (no block, truncated fence, bad JSON, incomplete call objects)
// yields an empty graph with format_valid=false.
ParseResult parse_tool_graph(std::string_view text);

// Reasoning text followed by the fenced block; parse_tool_graph round-trips it.
std::string to_transcript(const ToolGraph& g, std::string_view reasoning = {});

// [{"name": ..., "arguments": {...}}, ...]
nlohmann::json graph_to_json(const ToolGraph& g);
// Throws InputError on schema violations.
ToolGraph graph_from_json(const nlohmann::json& arr);

// Distinct call names.
std::set<std::string> name_set(const ToolGraph& g);

// Line-delimited record files. Truth lines: {"prompt_id", "truth",
// "reference_reasoning"?}. Prediction lines: {"prompt_id", "response"} where
// response is a raw transcript string. Loaders throw InputError with the
// 1-based line number on malformed lines.
struct TruthRecord {
  std::string prompt_id;
  ToolGraph truth;
  std::string reference_reasoning;
};

struct PredRecord {
  std::string prompt_id;
  std::string response;
};

std::vector<TruthRecord> load_truth_jsonl(const std::string& path);
std::vector<PredRecord> load_pred_jsonl(const std::string& path);

}  // namespace awpo
