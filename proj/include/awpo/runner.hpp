#pragma once

#include <string>

#include "awpo/config.hpp"

namespace awpo {

// Writes a complete run directory: config copy, streamed run.jsonl,
// checkpoints, final policy, metrics.json, and a timings sidecar. Everything
// except the sidecar is byte-reproducible for identical configs and seeds.
struct RunArtifacts {
  std::string dir;
  TrainResult result;
};

RunArtifacts run_training_job(const RunConfig& cfg);

nlohmann::json metrics_json(const RunConfig& cfg, const TrainResult& result);

}  // namespace awpo
