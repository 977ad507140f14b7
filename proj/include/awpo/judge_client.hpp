#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <vector>

#include "awpo/common.hpp"
#include "awpo/rewards.hpp"

namespace awpo {

struct RemoteJudgeOptions {
  std::string endpoint;  // e.g. http://127.0.0.1:8731/judge
  int timeout_ms = 5000;
  int retries = 2;       // attempts beyond the first
  int concurrency = 4;   // in-flight request limit for score_batch
  std::string cache_dir; // empty disables the disk cache
  // After retries are exhausted: fail the run, or substitute a zero score
  // and count it (silent zeros bias the group statistics, so error is the
  // default).
  enum class Fallback { error, zero } fallback = Fallback::error;

  void validate() const;
};

// HTTP client for an external judge service. One JSON object per request is
// POSTed to the endpoint; the response must echo the request id. Identical
// request content (ignoring the id) is served from the disk cache when one is
// configured.
class RemoteJudge final : public JudgeScorer {
 public:
  explicit RemoteJudge(RemoteJudgeOptions opt);
  ~RemoteJudge() override;

  ReasoningReward score(const JudgeRequest& req) override;
  std::vector<ReasoningReward> score_batch(
      const std::vector<JudgeRequest>& reqs) override;

  std::size_t fallback_count() const { return fallbacks_.load(); }

 private:
  ReasoningReward score_uncached(const JudgeRequest& req);
  std::string cache_path(const JudgeRequest& req) const;

  RemoteJudgeOptions opt_;
  std::string host_;
  int port_ = 80;
  std::string path_;
  std::atomic<std::size_t> fallbacks_{0};
};

}  // namespace awpo
