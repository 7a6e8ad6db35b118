// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstddef>
#include <filesystem>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "preact/agent.hpp"

namespace preact {

class AllCandidatesUnparseable : public Error {
 public:
  using Error::Error;
};

class EmptyBankForRound : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Reflexion

/// Observation/Thought/Action/Predicted Feedback lines, starting with o_0.
/// `upto` limits the steps included; the last included observation is
/// dropped when `with_last_observation` is false.
std::string transcript(const Trajectory& t, bool with_predictions = true, std::size_t upto = SIZE_MAX,
                       bool with_last_observation = true);

/// Fills the reflexion template ({question}, {scratchpad}, empty {examples})
/// and returns the backend's trimmed answer. Throws std::invalid_argument for
/// a successful trajectory.
std::string generate_reflection(const Trajectory& failed, std::string_view reflexion_template,
                                std::string_view question, ChatBackend& backend);

struct ReflexionOptions {
  int trials = 1;
  std::uint64_t seed = 0;
  EpisodeLimits limits;
  EpisodeHooks hooks;
  std::string reflexion_template;
};

/// One trajectory per trial, stopping at the first success. Trial i starts
/// with the reflections of trials 1..i-1.
std::vector<Trajectory> run_with_reflexion(const TaskSpec& spec, const PromptTemplate& tmpl, HistoryPolicy policy,
                                           ChatBackend& backend, const ReflexionOptions& opts);

// ---------------------------------------------------------------------------
// Per-turn sample and select

/// Parses n samples of `req`; unparseable ones are dropped.
std::vector<ParsedTurn> tot_sample(const ChatRequest& req, const PromptTemplate& tmpl, ChatBackend& backend, int n);

/// Numbered vote prompt built on top of the turn's request.
ChatRequest vote_request(const ChatRequest& context, std::span<const ParsedTurn> candidates,
                         const PromptTemplate& tmpl);

/// 0-based index of the chosen candidate. The first integer of the vote
/// names a 1-based candidate; anything else picks the first.
std::size_t tot_select_index(const ChatRequest& context, std::span<const ParsedTurn> candidates,
                             const PromptTemplate& tmpl, ChatBackend& backend);

ParsedTurn tot_select(const ChatRequest& context, std::span<const ParsedTurn> candidates, const PromptTemplate& tmpl,
                      ChatBackend& backend);

/// Hooks running n samples per turn and the vote selector.
EpisodeHooks tot_hooks(int n, const PromptTemplate& tmpl, ChatBackend& backend);

// ---------------------------------------------------------------------------
// Prediction bank and hallucination injection

/// Prediction blocks keyed by (task id, round).
class PredictionBank {
 public:
  using Block = std::vector<PredictedOutcome>;

  void add(std::string task_id, int round, Block block);
  void merge(const PredictionBank& other);

  /// Blocks stored for `round` by tasks other than `exclude_task`.
  std::vector<const Block*> donors(int round, std::string_view exclude_task) const;

  std::size_t size() const;
  bool empty() const { return entries_.empty(); }
  const std::map<std::pair<std::string, int>, std::vector<Block>>& entries() const { return entries_; }

  /// One JSON line per block: {"task_id", "round", "predictions"}.
  std::string serialize() const;
  static PredictionBank parse(std::string_view text);
  static PredictionBank load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

 private:
  std::map<std::pair<std::string, int>, std::vector<Block>> entries_;
};

/// Uniform double in [0, 1) from the top 53 bits of one draw.
double unit_draw(std::mt19937_64& rng);

/// With probability h the prediction block is replaced by a uniformly drawn
/// donor block of the same round. Turns without predictions are left alone.
ParsedTurn inject_hallucination(ParsedTurn turn, int round, std::string_view task_id, const PredictionBank& bank,
                                double h, std::mt19937_64& rng, bool* replaced = nullptr);

struct InjectionCounter {
  int blocks = 0;
  int replaced = 0;
};

/// transform hook for an injection run. `counter` may be null.
std::function<ParsedTurn(ParsedTurn, int)> injection_transform(const PredictionBank& bank, double h,
                                                               std::uint64_t seed, std::string task_id,
                                                               InjectionCounter* counter = nullptr);

/// observe hook archiving every non-empty prediction block.
std::function<void(const ParsedTurn&, int)> harvest_observer(PredictionBank& bank, std::string task_id);

}  // namespace preact
