// SPDX-License-Identifier: Apache-2.0
#include <httplib.h>

#include <cstdlib>
#include <thread>

#include <json.hpp>

#include "preact/llm.hpp"

namespace preact {

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // without trailing slash
};

ParsedUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw std::invalid_argument("base_url needs a scheme: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl out;
  out.origin = url.substr(0, path_start);
  out.path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

}  // namespace

HttpBackend::HttpBackend(HttpBackendConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.base_url.empty()) throw std::invalid_argument("live backend needs a base_url");
  if (!cfg_.api_key_env.empty()) {
    if (const char* key = std::getenv(cfg_.api_key_env.c_str())) api_key_ = key;
  }
}

std::string HttpBackend::request_body(const HttpBackendConfig& cfg, const ChatRequest& req, int n) {
  nlohmann::ordered_json body;
  body["model"] = cfg.model;
  auto messages = nlohmann::ordered_json::array();
  if (!req.system.empty()) messages.push_back({{"role", "system"}, {"content", req.system}});
  for (const auto& t : req.turns)
    messages.push_back({{"role", std::string(to_string(t.role))}, {"content", t.content}});
  body["messages"] = std::move(messages);
  body["temperature"] = req.temperature;
  body["n"] = n;
  return body.dump();
}

std::vector<std::string> HttpBackend::post(const ChatRequest& req, int n) {
  auto url = split_url(cfg_.base_url);
  httplib::Client client(url.origin);
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout).count();
  client.set_connection_timeout(secs, 0);
  client.set_read_timeout(secs, 0);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  const auto body = request_body(cfg_, req, n);

  for (int attempt = 0;; ++attempt) {
    auto res = client.Post(url.path + "/chat/completions", headers, body, "application/json");
    if (!res) {
      if (attempt >= cfg_.max_retries)
        throw TransportError("POST " + cfg_.base_url + "/chat/completions failed: " +
                             httplib::to_string(res.error()));
      std::this_thread::sleep_for(cfg_.backoff * (1 << attempt));
      continue;
    }
    if ((res->status == 429 || res->status >= 500) && attempt < cfg_.max_retries) {
      std::this_thread::sleep_for(cfg_.backoff * (1 << attempt));
      continue;
    }
    if (res->status < 200 || res->status >= 300) throw ProviderError(res->status, res->body);

    std::vector<std::string> out;
    try {
      auto j = nlohmann::json::parse(res->body);
      for (const auto& choice : j.at("choices")) {
        const auto& content = choice.at("message").at("content");
        out.push_back(content.is_string() ? content.get<std::string>() : std::string());
      }
    } catch (const nlohmann::json::exception& e) {
      throw ProviderError(res->status, std::string("unreadable response (") + e.what() + "): " + res->body);
    }
    return out;
  }
}

std::vector<std::string> HttpBackend::do_complete(const ChatRequest& req) {
  std::vector<std::string> out;
  if (cfg_.supports_n || req.n_samples == 1) {
    out = post(req, req.n_samples);
    if (out.size() > static_cast<std::size_t>(req.n_samples)) out.resize(req.n_samples);
  }
  // Providers without n support return a single choice; top up sequentially.
  while (out.size() < static_cast<std::size_t>(req.n_samples)) {
    auto more = post(req, 1);
    if (more.empty()) throw ProviderError(200, "response carried no choices");
    out.push_back(std::move(more.front()));
  }
  return out;
}

}  // namespace preact
