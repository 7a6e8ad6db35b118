// SPDX-License-Identifier: Apache-2.0
#include "preact/strategies.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "preact/hash.hpp"
#include "preact/text.hpp"

namespace preact {

using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Reflexion

std::string transcript(const Trajectory& t, bool with_predictions, std::size_t upto, bool with_last_observation) {
  std::string out = "Observation: " + t.initial_observation;
  const auto n = std::min(upto, t.steps.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = t.steps[i];
    if (!s.thought.empty()) out += "\nThought: " + s.thought;
    out += "\nAction: " + s.action;
    if (with_predictions && !s.prediction.empty())
      out += "\nPredicted Feedback: " + format_predictions(s.prediction, true);
    if (s.observation && (with_last_observation || i + 1 < n)) out += "\nObservation: " + *s.observation;
  }
  return out;
}

std::string generate_reflection(const Trajectory& failed, std::string_view reflexion_template,
                                std::string_view question, ChatBackend& backend) {
  if (failed.outcome == Outcome::Success) throw std::invalid_argument("reflection requested for a successful trial");
  ChatRequest req;
  req.turns.push_back({Role::User, text::substitute(reflexion_template, {{"examples", ""},
                                                                         {"question", std::string(question)},
                                                                         {"scratchpad", transcript(failed)}})});
  req.seed = splitmix64(failed.seed ^ fnv1a64(failed.task_id) ^ failed.reflections.size());
  return std::string(text::trim(backend.complete(req).front()));
}

std::vector<Trajectory> run_with_reflexion(const TaskSpec& spec, const PromptTemplate& tmpl, HistoryPolicy policy,
                                           ChatBackend& backend, const ReflexionOptions& opts) {
  if (opts.trials < 1) throw std::invalid_argument("trials must be >= 1");
  if (opts.trials > 1 && !policy.include_reflections)
    throw InconsistentPolicy("reflexion trials need a history policy that includes reflections");
  std::vector<Trajectory> out;
  std::vector<std::string> reflections;
  for (int trial = 1; trial <= opts.trials; ++trial) {
    auto env = reset(spec, opts.seed);
    out.push_back(run_episode(*env, tmpl, policy, backend, opts.limits, opts.hooks, reflections));
    if (out.back().outcome == Outcome::Success || trial == opts.trials) break;
    reflections.push_back(generate_reflection(out.back(), opts.reflexion_template, spec.goal, backend));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sample and select

std::vector<ParsedTurn> tot_sample(const ChatRequest& req, const PromptTemplate& tmpl, ChatBackend& backend, int n) {
  if (n < 2) throw std::invalid_argument("tot_sample needs n >= 2");
  auto sampled = req;
  sampled.n_samples = n;
  std::vector<ParsedTurn> out;
  for (const auto& text : backend.complete(sampled)) {
    try {
      out.push_back(parse_turn(text, tmpl));
    } catch (const ParseError&) {
    }
  }
  if (out.empty()) throw AllCandidatesUnparseable("none of " + std::to_string(n) + " samples could be parsed");
  return out;
}

ChatRequest vote_request(const ChatRequest& context, std::span<const ParsedTurn> candidates,
                         const PromptTemplate& tmpl) {
  ChatRequest req;
  req.system = context.system;
  req.turns = context.turns;
  std::string body = "Several candidate next responses were proposed for this turn.\n";
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    body += "\nCandidate " + std::to_string(i + 1) + ":\n" +
            format_assistant_turn(tmpl, c.thought, c.action, c.predictions) + "\n";
  }
  body += "\nWhich candidate is most likely to complete the task? Reply with the candidate number only.";
  if (!req.turns.empty() && req.turns.back().role == Role::User) {
    req.turns.back().content += "\n\n" + body;
  } else {
    req.turns.push_back({Role::User, body});
  }
  req.seed = splitmix64(context.seed ^ 0x766f7465ULL);
  return req;
}

std::size_t tot_select_index(const ChatRequest& context, std::span<const ParsedTurn> candidates,
                             const PromptTemplate& tmpl, ChatBackend& backend) {
  if (candidates.empty()) throw std::invalid_argument("tot_select needs at least one candidate");
  if (candidates.size() == 1) return 0;
  auto vote = backend.complete(vote_request(context, candidates, tmpl)).front();
  for (std::size_t i = 0; i < vote.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(vote[i]))) continue;
    std::size_t v = 0;
    while (i < vote.size() && std::isdigit(static_cast<unsigned char>(vote[i])) && v < 100000)
      v = v * 10 + static_cast<std::size_t>(vote[i++] - '0');
    return v >= 1 && v <= candidates.size() ? v - 1 : 0;
  }
  return 0;
}

ParsedTurn tot_select(const ChatRequest& context, std::span<const ParsedTurn> candidates, const PromptTemplate& tmpl,
                      ChatBackend& backend) {
  return candidates[tot_select_index(context, candidates, tmpl, backend)];
}

EpisodeHooks tot_hooks(int n, const PromptTemplate& tmpl, ChatBackend& backend) {
  if (n < 1) throw std::invalid_argument("TOT needs n >= 1");
  EpisodeHooks hooks;
  hooks.samples = n;
  hooks.select = [&tmpl, &backend](const ChatRequest& req, std::span<const ParsedTurn> cands) {
    return tot_select_index(req, cands, tmpl, backend);
  };
  return hooks;
}

// ---------------------------------------------------------------------------
// Prediction bank

void PredictionBank::add(std::string task_id, int round, Block block) {
  if (block.empty()) return;
  entries_[{std::move(task_id), round}].push_back(std::move(block));
}

void PredictionBank::merge(const PredictionBank& other) {
  for (const auto& [key, blocks] : other.entries_)
    for (const auto& b : blocks) entries_[key].push_back(b);
}

std::vector<const PredictionBank::Block*> PredictionBank::donors(int round, std::string_view exclude_task) const {
  std::vector<const Block*> out;
  for (const auto& [key, blocks] : entries_) {
    if (key.second != round || key.first == exclude_task) continue;
    for (const auto& b : blocks) out.push_back(&b);
  }
  return out;
}

std::size_t PredictionBank::size() const {
  std::size_t n = 0;
  for (const auto& [_, blocks] : entries_) n += blocks.size();
  return n;
}

std::string PredictionBank::serialize() const {
  std::string out;
  for (const auto& [key, blocks] : entries_) {
    for (const auto& b : blocks) {
      ordered_json j;
      j["task_id"] = key.first;
      j["round"] = key.second;
      auto preds = ordered_json::array();
      for (const auto& p : b) preds.push_back({{"category", p.category}, {"measure", p.measure}});
      j["predictions"] = std::move(preds);
      out += j.dump() + "\n";
    }
  }
  return out;
}

PredictionBank PredictionBank::parse(std::string_view text) {
  PredictionBank bank;
  int lineno = 0;
  for (auto line : text::split_lines(text)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      auto j = ordered_json::parse(line);
      Block block;
      for (const auto& p : j.at("predictions"))
        block.push_back({p.at("category").get<std::string>(), p.value("measure", std::string())});
      if (block.empty()) throw MalformedRecord("bank line " + std::to_string(lineno) + ": empty prediction block");
      auto round = j.at("round").get<int>();
      if (round < 1) throw MalformedRecord("bank line " + std::to_string(lineno) + ": round must be >= 1");
      bank.add(j.at("task_id").get<std::string>(), round, std::move(block));
    } catch (const nlohmann::json::exception& e) {
      throw MalformedRecord("bank line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return bank;
}

PredictionBank PredictionBank::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open prediction bank " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void PredictionBank::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write prediction bank " + path.string());
  out << serialize();
}

// ---------------------------------------------------------------------------
// Injection

double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

ParsedTurn inject_hallucination(ParsedTurn turn, int round, std::string_view task_id, const PredictionBank& bank,
                                double h, std::mt19937_64& rng, bool* replaced) {
  if (!(h >= 0.0 && h <= 1.0)) throw std::invalid_argument("hallucination rate must lie in [0, 1]");
  if (replaced) *replaced = false;
  if (turn.predictions.empty()) return turn;
  if (unit_draw(rng) >= h) return turn;
  auto pool = bank.donors(round, task_id);
  if (pool.empty()) throw EmptyBankForRound("no donor prediction for round " + std::to_string(round));
  turn.predictions = *pool[rng() % pool.size()];
  if (replaced) *replaced = true;
  return turn;
}

std::function<ParsedTurn(ParsedTurn, int)> injection_transform(const PredictionBank& bank, double h,
                                                               std::uint64_t seed, std::string task_id,
                                                               InjectionCounter* counter) {
  auto rng = std::make_shared<std::mt19937_64>(splitmix64(seed ^ fnv1a64(task_id)));
  return [&bank, h, rng, task_id = std::move(task_id), counter](ParsedTurn turn, int round) {
    bool replaced = false;
    bool had = !turn.predictions.empty();
    turn = inject_hallucination(std::move(turn), round, task_id, bank, h, *rng, &replaced);
    if (counter && had) {
      ++counter->blocks;
      if (replaced) ++counter->replaced;
    }
    return turn;
  };
}

std::function<void(const ParsedTurn&, int)> harvest_observer(PredictionBank& bank, std::string task_id) {
  return [&bank, task_id = std::move(task_id)](const ParsedTurn& turn, int round) {
    bank.add(task_id, round, turn.predictions);
  };
}

}  // namespace preact
