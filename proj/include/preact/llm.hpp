// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "preact/chat.hpp"
#include "preact/core.hpp"

namespace preact {

class TransportError : public Error {
 public:
  using Error::Error;
};

class ProviderError : public Error {
 public:
  ProviderError(int status, std::string body)
      : Error("provider returned HTTP " + std::to_string(status) + ": " + body),
        status_(status),
        body_(std::move(body)) {}
  int status() const { return status_; }
  const std::string& body() const { return body_; }

 private:
  int status_;
  std::string body_;
};

class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

/// Chat-completion backend. complete() validates the request, enforces the
/// call budget and counts every call that reaches the backend.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;

  /// Exactly req.n_samples texts.
  std::vector<std::string> complete(const ChatRequest& req);

  std::uint64_t calls() const { return calls_.load(); }
  void set_budget(std::uint64_t max_calls) { budget_ = max_calls; }
  std::uint64_t budget() const { return budget_; }

 protected:
  virtual std::vector<std::string> do_complete(const ChatRequest& req) = 0;

 private:
  std::atomic<std::uint64_t> calls_{0};
  std::uint64_t budget_ = std::numeric_limits<std::uint64_t>::max();
};

// ---------------------------------------------------------------------------
// Scripted backend

using RequestMatcher = std::function<bool(const ChatRequest&)>;
/// Produces the text for one sample of a request.
using ResponseGenerator = std::function<std::string(const ChatRequest&, int sample)>;

struct ScriptRule {
  RequestMatcher when;
  ResponseGenerator respond;
};

/// First matching rule wins; otherwise default_response.
struct ScriptedPolicy {
  std::vector<ScriptRule> rules;
  std::string default_response;
};

/// Deterministic backend: every response is a pure function of
/// (request, seed, sample index).
class ScriptedBackend final : public ChatBackend {
 public:
  explicit ScriptedBackend(ScriptedPolicy policy) : policy_(std::move(policy)) {}

 protected:
  std::vector<std::string> do_complete(const ChatRequest& req) override;

 private:
  ScriptedPolicy policy_;
};

namespace script {

/// Number of assistant turns already in the request.
int assistant_turns(const ChatRequest& req);

RequestMatcher request_contains(std::string needle);
RequestMatcher system_contains(std::string needle);
RequestMatcher last_user_contains(std::string needle);
/// Any assistant turn contains the needle.
RequestMatcher assistant_contains(std::string needle);
RequestMatcher all_of(std::vector<RequestMatcher> ms);
RequestMatcher any_of(std::vector<RequestMatcher> ms);
RequestMatcher negate(RequestMatcher m);
RequestMatcher always();

ResponseGenerator fixed(std::string text);
/// responses[sample % size].
ResponseGenerator cycle(std::vector<std::string> responses);
/// responses[min(assistant_turns, size-1)].
ResponseGenerator by_turn(std::vector<std::string> responses);
/// Seeded pick keyed on (rendered request, seed, sample).
ResponseGenerator seeded_choice(std::vector<std::string> responses);

/// Loads a ScriptedPolicy from a JSON script file. Schema:
///   {"default": "...",
///    "rules": [{"when": {"request": [..], "system": [..], "last_user": [..],
///                        "assistant": [..], "not_request": [..],
///                        "not_assistant": [..]},
///               "respond": "text" | {"cycle": [..]} | {"by_turn": [..]}
///                          | {"choice": [..]}}]}
/// Every listed substring must match; an empty "when" always matches.
ScriptedPolicy load(const std::filesystem::path& path);
ScriptedPolicy parse(std::string_view json_text);

}  // namespace script

// ---------------------------------------------------------------------------
// OpenAI-compatible HTTP backend

struct HttpBackendConfig {
  std::string base_url;  // e.g. "https://api.openai.com/v1"
  std::string model;
  std::string api_key_env = "OPENAI_API_KEY";
  std::chrono::milliseconds timeout{60000};
  int max_retries = 2;
  std::chrono::milliseconds backoff{500};
  // When false, n samples are fetched as n sequential calls.
  bool supports_n = true;
};

class HttpBackend final : public ChatBackend {
 public:
  explicit HttpBackend(HttpBackendConfig cfg);

  /// Body sent to <base_url>/chat/completions for a given request.
  static std::string request_body(const HttpBackendConfig& cfg, const ChatRequest& req, int n);

 protected:
  std::vector<std::string> do_complete(const ChatRequest& req) override;

 private:
  std::vector<std::string> post(const ChatRequest& req, int n);

  HttpBackendConfig cfg_;
  std::string api_key_;
};

}  // namespace preact
