// SPDX-License-Identifier: Apache-2.0
#include "preact/llm.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "preact/hash.hpp"

namespace preact {

std::string_view to_string(Role r) { return r == Role::User ? "user" : "assistant"; }

std::string render_request(const ChatRequest& req) {
  std::string out = "[system]\n" + req.system;
  for (const auto& t : req.turns) {
    out += "\n[";
    out += to_string(t.role);
    out += "]\n";
    out += t.content;
  }
  return out;
}

std::vector<std::string> ChatBackend::complete(const ChatRequest& req) {
  if (req.n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  if (req.temperature < 0.0) throw std::invalid_argument("temperature must be >= 0");
  auto previous = calls_.fetch_add(1);
  if (previous >= budget_) {
    calls_.fetch_sub(1);
    throw BudgetExceeded("call budget of " + std::to_string(budget_) + " exhausted");
  }
  auto out = do_complete(req);
  if (out.size() != static_cast<std::size_t>(req.n_samples))
    throw Error("backend returned " + std::to_string(out.size()) + " samples, expected " +
                std::to_string(req.n_samples));
  return out;
}

std::vector<std::string> ScriptedBackend::do_complete(const ChatRequest& req) {
  const ScriptRule* hit = nullptr;
  for (const auto& rule : policy_.rules) {
    if (!rule.when || rule.when(req)) {
      hit = &rule;
      break;
    }
  }
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(req.n_samples));
  for (int i = 0; i < req.n_samples; ++i)
    out.push_back(hit ? hit->respond(req, i) : policy_.default_response);
  return out;
}

namespace script {

int assistant_turns(const ChatRequest& req) {
  int n = 0;
  for (const auto& t : req.turns)
    if (t.role == Role::Assistant) ++n;
  return n;
}

RequestMatcher request_contains(std::string needle) {
  return [needle = std::move(needle)](const ChatRequest& r) {
    return render_request(r).find(needle) != std::string::npos;
  };
}

RequestMatcher system_contains(std::string needle) {
  return [needle = std::move(needle)](const ChatRequest& r) {
    return r.system.find(needle) != std::string::npos;
  };
}

RequestMatcher last_user_contains(std::string needle) {
  return [needle = std::move(needle)](const ChatRequest& r) {
    for (auto it = r.turns.rbegin(); it != r.turns.rend(); ++it)
      if (it->role == Role::User) return it->content.find(needle) != std::string::npos;
    return false;
  };
}

RequestMatcher assistant_contains(std::string needle) {
  return [needle = std::move(needle)](const ChatRequest& r) {
    for (const auto& t : r.turns)
      if (t.role == Role::Assistant && t.content.find(needle) != std::string::npos) return true;
    return false;
  };
}

RequestMatcher all_of(std::vector<RequestMatcher> ms) {
  return [ms = std::move(ms)](const ChatRequest& r) {
    for (const auto& m : ms)
      if (!m(r)) return false;
    return true;
  };
}

RequestMatcher any_of(std::vector<RequestMatcher> ms) {
  return [ms = std::move(ms)](const ChatRequest& r) {
    for (const auto& m : ms)
      if (m(r)) return true;
    return false;
  };
}

RequestMatcher negate(RequestMatcher m) {
  return [m = std::move(m)](const ChatRequest& r) { return !m(r); };
}

RequestMatcher always() {
  return [](const ChatRequest&) { return true; };
}

ResponseGenerator fixed(std::string text) {
  return [text = std::move(text)](const ChatRequest&, int) { return text; };
}

ResponseGenerator cycle(std::vector<std::string> responses) {
  if (responses.empty()) throw std::invalid_argument("cycle needs at least one response");
  return [responses = std::move(responses)](const ChatRequest&, int sample) {
    return responses[static_cast<std::size_t>(sample) % responses.size()];
  };
}

ResponseGenerator by_turn(std::vector<std::string> responses) {
  if (responses.empty()) throw std::invalid_argument("by_turn needs at least one response");
  return [responses = std::move(responses)](const ChatRequest& r, int) {
    auto k = static_cast<std::size_t>(assistant_turns(r));
    return responses[std::min(k, responses.size() - 1)];
  };
}

ResponseGenerator seeded_choice(std::vector<std::string> responses) {
  if (responses.empty()) throw std::invalid_argument("choice needs at least one response");
  return [responses = std::move(responses)](const ChatRequest& r, int sample) {
    auto h = splitmix64(fnv1a64(render_request(r)) ^ splitmix64(r.seed) ^
                        static_cast<std::uint64_t>(sample));
    return responses[h % responses.size()];
  };
}

namespace {

std::vector<std::string> string_list(const nlohmann::json& j, const char* key) {
  std::vector<std::string> out;
  auto it = j.find(key);
  if (it == j.end()) return out;
  if (it->is_string()) {
    out.push_back(it->get<std::string>());
    return out;
  }
  if (!it->is_array()) throw Error(std::string("script: '") + key + "' must be a string or list");
  for (const auto& v : *it) out.push_back(v.get<std::string>());
  return out;
}

RequestMatcher matcher_from(const nlohmann::json& when) {
  static const std::set<std::string, std::less<>> known{"request",     "system",        "last_user",    "assistant",
                                                        "not_request", "not_assistant", "not_last_user"};
  if (!when.is_object()) throw Error("script: 'when' must be an object");
  for (const auto& [key, _] : when.items())
    if (!known.count(key)) throw Error("script: unknown 'when' key '" + key + "'");
  std::vector<RequestMatcher> ms;
  for (auto& s : string_list(when, "request")) ms.push_back(request_contains(s));
  for (auto& s : string_list(when, "system")) ms.push_back(system_contains(s));
  for (auto& s : string_list(when, "last_user")) ms.push_back(last_user_contains(s));
  for (auto& s : string_list(when, "assistant")) ms.push_back(assistant_contains(s));
  for (auto& s : string_list(when, "not_request")) ms.push_back(negate(request_contains(s)));
  for (auto& s : string_list(when, "not_assistant")) ms.push_back(negate(assistant_contains(s)));
  for (auto& s : string_list(when, "not_last_user")) ms.push_back(negate(last_user_contains(s)));
  return all_of(std::move(ms));
}

ResponseGenerator generator_from(const nlohmann::json& respond) {
  if (respond.is_string()) return fixed(respond.get<std::string>());
  if (!respond.is_object()) throw Error("script: 'respond' must be a string or object");
  if (respond.contains("cycle")) return cycle(string_list(respond, "cycle"));
  if (respond.contains("by_turn")) return by_turn(string_list(respond, "by_turn"));
  if (respond.contains("choice")) return seeded_choice(string_list(respond, "choice"));
  throw Error("script: 'respond' object needs one of cycle/by_turn/choice");
}

}  // namespace

ScriptedPolicy parse(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
    ScriptedPolicy p;
    p.default_response = j.value("default", std::string());
    if (auto it = j.find("rules"); it != j.end()) {
      for (const auto& r : *it) {
        ScriptRule rule;
        rule.when = matcher_from(r.value("when", nlohmann::json::object()));
        if (!r.contains("respond")) throw Error("script: rule without 'respond'");
        rule.respond = generator_from(r.at("respond"));
        p.rules.push_back(std::move(rule));
      }
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("script: ") + e.what());
  }
}

ScriptedPolicy load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open script " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

}  // namespace script

}  // namespace preact
