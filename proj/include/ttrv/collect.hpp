#pragma once

#include <chrono>
#include <filesystem>
#include <iosfwd>
#include <string>

namespace ttrv {

// Chat-completion style endpoint, e.g. base_url "http://localhost:8000" and
// path "/v1/chat/completions".
struct CollectConfig {
  std::string base_url;
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string api_key;  // sent as a bearer token when non-empty
  std::size_t n = 32;
  double temperature = 1.0;
  int max_tokens = 0;  // omitted from requests when 0
  // false: one request asking for n choices, topped up with single-choice
  // requests if the server returns fewer.
  bool single_requests = false;
  int attempts = 3;
  std::chrono::milliseconds backoff_base{500};
  std::chrono::seconds timeout{60};
};

struct CollectReport {
  std::size_t prompts = 0;
  std::size_t failed = 0;
};

// Reads {"prompt_id","text"} lines and writes one RolloutRecord per prompt.
// Prompts that still fail after retries get an "error" field and no
// responses; `label` skips them.
CollectReport collect_rollouts(std::istream& prompts, std::ostream& out,
                               const CollectConfig& config);
CollectReport collect_rollouts_file(const std::filesystem::path& prompts,
                                    const std::filesystem::path& out,
                                    const CollectConfig& config);

}  // namespace ttrv
