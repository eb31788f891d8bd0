#include "ttrv/collect.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "ttrv/error.hpp"

namespace ttrv {

using json = nlohmann::json;

namespace {

struct Attempt {
  std::vector<std::string> choices;
  std::string error;  // empty on success
};

Attempt request_once(httplib::Client& client, const CollectConfig& config,
                     const std::string& text, std::size_t n) {
  json body;
  body["model"] = config.model;
  body["messages"] = json::array({{{"role", "user"}, {"content", text}}});
  body["temperature"] = config.temperature;
  body["n"] = n;
  if (config.max_tokens > 0) body["max_tokens"] = config.max_tokens;

  httplib::Headers headers;
  if (!config.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + config.api_key);
  }
  Attempt out;
  const auto res = client.Post(config.path, headers, body.dump(), "application/json");
  if (!res) {
    out.error = "transport error: " + httplib::to_string(res.error());
    return out;
  }
  if (res->status < 200 || res->status >= 300) {
    out.error = "HTTP " + std::to_string(res->status);
    return out;
  }
  try {
    const auto j = json::parse(res->body);
    for (const auto& c : j.at("choices")) {
      // Chat shape first, then the legacy completion shape.
      if (c.contains("message")) {
        out.choices.push_back(c.at("message").at("content").get<std::string>());
      } else {
        out.choices.push_back(c.at("text").get<std::string>());
      }
    }
  } catch (const json::exception& e) {
    out.choices.clear();
    out.error = std::string("bad response body: ") + e.what();
  }
  return out;
}

// Up to config.attempts tries with exponential backoff.
Attempt request_with_retry(httplib::Client& client, const CollectConfig& config,
                           const std::string& text, std::size_t n) {
  Attempt last;
  auto delay = config.backoff_base;
  for (int attempt = 0; attempt < config.attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
    last = request_once(client, config, text, n);
    if (last.error.empty()) return last;
  }
  return last;
}

}  // namespace

CollectReport collect_rollouts(std::istream& prompts, std::ostream& out,
                               const CollectConfig& config) {
  if (config.base_url.empty()) fail(Errc::invalid_argument, "endpoint base URL is required");
  if (config.n == 0) fail(Errc::invalid_argument, "n must be positive");
  if (config.attempts < 1) fail(Errc::invalid_argument, "attempts must be >= 1");

  httplib::Client client(config.base_url);
  if (!client.is_valid()) {
    fail(Errc::invalid_argument, "unsupported endpoint URL '" + config.base_url + "'");
  }
  client.set_connection_timeout(config.timeout);
  client.set_read_timeout(config.timeout);
  client.set_write_timeout(config.timeout);

  CollectReport report;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(prompts, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string id;
    std::string text;
    try {
      const auto j = json::parse(line);
      id = j.at("prompt_id").get<std::string>();
      text = j.at("text").get<std::string>();
    } catch (const json::exception& e) {
      fail(Errc::parse, "line " + std::to_string(line_no) + ": " + e.what());
    }
    ++report.prompts;

    std::vector<std::string> responses;
    std::string error;
    if (!config.single_requests) {
      auto a = request_with_retry(client, config, text, config.n);
      error = a.error;
      responses = std::move(a.choices);
    }
    while (error.empty() && responses.size() < config.n) {
      auto a = request_with_retry(client, config, text, 1);
      if (!a.error.empty()) {
        error = a.error;
        break;
      }
      if (a.choices.empty()) {
        error = "endpoint returned no choices";
        break;
      }
      responses.push_back(std::move(a.choices.front()));
    }
    if (responses.size() > config.n) responses.resize(config.n);

    json rec;
    rec["prompt_id"] = id;
    if (!error.empty()) {
      ++report.failed;
      rec["responses"] = json::array();
      rec["error"] = error;
    } else {
      rec["responses"] = responses;
    }
    rec["metadata"] = {{"model", config.model},
                       {"temperature", config.temperature},
                       {"n", config.n}};
    out << rec.dump() << "\n";
  }
  return report;
}

CollectReport collect_rollouts_file(const std::filesystem::path& prompts,
                                    const std::filesystem::path& out_path,
                                    const CollectConfig& config) {
  std::ifstream in(prompts, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open '" + prompts.string() + "'");
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io, "cannot write '" + out_path.string() + "'");
  const auto report = collect_rollouts(in, out, config);
  if (report.prompts > 0 && report.failed == report.prompts) {
    fail(Errc::network, "all " + std::to_string(report.prompts) + " prompts failed");
  }
  return report;
}

}  // namespace ttrv
