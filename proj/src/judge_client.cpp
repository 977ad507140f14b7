#include "awpo/judge_client.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <thread>

#include "awpo/common.hpp"
#include "httplib.h"

namespace awpo {

namespace {

// Content key excludes the correlation id, so identical payloads hit the
// cache across runs.
std::string content_key(const JudgeRequest& req) {
  auto j = judge_request_to_json(req);
  j.erase("id");
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

}  // namespace

void RemoteJudgeOptions::validate() const {
  const auto fail = [](const char* field, const char* why) {
    throw ConfigError(std::string("judge.remote.") + field + ": " + why);
  };
  if (endpoint.empty()) fail("endpoint", "must be set for the remote judge");
  if (endpoint.rfind("http://", 0) != 0)
    fail("endpoint", "must start with http://");
  if (timeout_ms <= 0) fail("timeout_ms", "must be positive");
  if (retries < 0) fail("retries", "must be non-negative");
  if (concurrency < 1) fail("concurrency", "must be at least 1");
}

RemoteJudge::RemoteJudge(RemoteJudgeOptions opt) : opt_(std::move(opt)) {
  opt_.validate();
  std::string rest = opt_.endpoint.substr(7);  // past http://
  const auto slash = rest.find('/');
  path_ = slash == std::string::npos ? "/" : rest.substr(slash);
  std::string hostport = rest.substr(0, slash);
  const auto colon = hostport.find(':');
  host_ = hostport.substr(0, colon);
  if (colon != std::string::npos) {
    const auto port_str = hostport.substr(colon + 1);
    const auto [ptr, ec] =
        std::from_chars(port_str.data(), port_str.data() + port_str.size(), port_);
    if (ec != std::errc{} || ptr != port_str.data() + port_str.size())
      throw ConfigError("judge.remote.endpoint: invalid port \"" + port_str + "\"");
  }
  if (host_.empty()) throw ConfigError("judge.remote.endpoint: missing host");
  if (!opt_.cache_dir.empty())
    std::filesystem::create_directories(opt_.cache_dir);
}

RemoteJudge::~RemoteJudge() = default;

std::string RemoteJudge::cache_path(const JudgeRequest& req) const {
  return opt_.cache_dir + "/" + content_key(req) + ".json";
}

ReasoningReward RemoteJudge::score_uncached(const JudgeRequest& req) {
  const std::string payload = judge_request_to_json(req).dump();
  std::string last_error = "no attempt made";
  for (int attempt = 0; attempt <= opt_.retries; ++attempt) {
    httplib::Client client(host_, port_);
    client.set_connection_timeout(0, opt_.timeout_ms * 1000);
    client.set_read_timeout(0, opt_.timeout_ms * 1000);
    auto res = client.Post(path_, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP status " + std::to_string(res->status);
      continue;
    }
    nlohmann::json body = nlohmann::json::parse(res->body, nullptr, false);
    if (body.is_discarded()) {
      last_error = "response is not JSON";
      continue;
    }
    if (body.value("id", std::string{}) != req.id) {
      last_error = "response id does not match request id";
      continue;
    }
    return reasoning_reward_from_json(body);
  }
  if (opt_.fallback == RemoteJudgeOptions::Fallback::zero) {
    fallbacks_.fetch_add(1);
    std::fprintf(stderr, "judge fallback: request %s scored 0 (%s)\n",
                 req.id.c_str(), last_error.c_str());
    ReasoningReward zero;
    zero.tier = 6;
    return zero;
  }
  throw JudgeUnavailableError("judge unavailable after " +
                              std::to_string(opt_.retries + 1) + " attempts: " +
                              last_error);
}

ReasoningReward RemoteJudge::score(const JudgeRequest& req) {
  const bool cached = !opt_.cache_dir.empty();
  if (cached) {
    std::ifstream in(cache_path(req));
    if (in) {
      nlohmann::json body = nlohmann::json::parse(in, nullptr, false);
      if (!body.is_discarded()) return reasoning_reward_from_json(body);
    }
  }
  ReasoningReward reward = score_uncached(req);
  if (cached) {
    std::ofstream out(cache_path(req));
    out << reasoning_reward_to_json(req.id, reward).dump() << '\n';
  }
  return reward;
}

std::vector<ReasoningReward> RemoteJudge::score_batch(
    const std::vector<JudgeRequest>& reqs) {
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(opt_.concurrency), reqs.size());
  if (workers <= 1) return JudgeScorer::score_batch(reqs);

  std::vector<ReasoningReward> out(reqs.size());
  std::atomic<std::size_t> next{0};
  std::vector<std::future<void>> futures;
  futures.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    futures.push_back(std::async(std::launch::async, [&] {
      for (std::size_t i = next.fetch_add(1); i < reqs.size();
           i = next.fetch_add(1)) {
        out[i] = score(reqs[i]);
      }
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
  return out;
}

}  // namespace awpo
