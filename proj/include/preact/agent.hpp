// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "preact/chat.hpp"
#include "preact/core.hpp"
#include "preact/envs.hpp"
#include "preact/llm.hpp"
#include "preact/templates.hpp"

namespace preact {

class ParseError : public Error {
 public:
  using Error::Error;
};
class EmptyResponse : public ParseError {
 public:
  using ParseError::ParseError;
};
class MissingAction : public ParseError {
 public:
  using ParseError::ParseError;
};
class MissingPrediction : public ParseError {
 public:
  using ParseError::ParseError;
};

class InconsistentPolicy : public Error {
 public:
  using Error::Error;
};

struct ParsedTurn {
  std::string thought;
  std::string action;
  std::vector<PredictedOutcome> predictions;

  bool operator==(const ParsedTurn&) const = default;
};

/// Extracts (thought, action, predictions) using the template's labels.
/// PreAct templates require a prediction list unless the action is terminal.
ParsedTurn parse_turn(std::string_view response, const PromptTemplate& tmpl);

/// Items of a "1. ... 2. ..." list. Multi-line lists split at line-leading
/// markers; single-line lists split at successive inline markers.
std::vector<PredictedOutcome> parse_prediction_list(std::string_view block, bool single_line = false);

/// Category up to the first sentence end, the rest as measure.
PredictedOutcome split_prediction(std::string_view item);

struct MismatchReport {
  std::optional<std::size_t> matched_index;
  bool matched = false;
};

/// Index of the first prediction whose category covers the observation.
using MismatchMatcher =
    std::function<std::optional<std::size_t>(std::span<const PredictedOutcome>, std::string_view)>;

/// Content words of a category: lower-cased alphanumeric runs minus stopwords.
/// Negations are kept ("no", "not").
std::vector<std::string> content_words(std::string_view s);

/// Matches when at least `threshold` of a category's content words occur in
/// the observation.
MismatchMatcher keyword_matcher(double threshold = 0.5);

/// Asks the backend which numbered scenario the feedback falls under.
MismatchMatcher llm_matcher(ChatBackend& backend);

/// Default matcher is keyword_matcher().
MismatchReport detect_mismatch(std::span<const PredictedOutcome> predictions, std::string_view observation,
                               const MismatchMatcher& matcher = {});

struct PromptExtras {
  bool disparity_hint = false;
  std::vector<std::string> available_actions;  // HH only
  std::string format_reminder;                 // set on parse retries
  double temperature = 0.0;
  int n_samples = 1;
  std::uint64_t seed = 0;
};

ChatRequest compose_prompt(const PromptTemplate& tmpl, std::string_view o0, std::span<const Step> steps,
                           std::span<const std::string> reflections, HistoryPolicy policy,
                           const PromptExtras& extras = {});

inline constexpr std::string_view kFormatReminder =
    "Your previous reply did not follow the required output format; answer again using exactly that format.";

struct EpisodeLimits {
  int max_turns = 0;  // 0: the task's own limit
  int max_parse_retries = 1;
  std::vector<std::string> refusal_phrases{"I'm sorry", "I cannot assist"};
  int refusal_limit = 3;
  bool inject_disparity_hint = true;
  MismatchMatcher matcher;
  double temperature = 0.0;
};

/// Extension points shared by plain, TOT, injection and harvest runs.
struct EpisodeHooks {
  int samples = 1;
  /// Picks one of >= 1 candidates; defaults to the first.
  std::function<std::size_t(const ChatRequest&, std::span<const ParsedTurn>)> select;
  /// Applied to the chosen turn before it is executed (round is 1-based).
  std::function<ParsedTurn(ParsedTurn, int round)> transform;
  std::function<void(const ParsedTurn&, int round)> observe;
};

/// Statistics gathered alongside a trajectory.
struct EpisodeStats {
  int mismatches = 0;
  int matches = 0;
  int parse_retries = 0;
  int refusals = 0;
  std::vector<int> branch_counts;
};

/// Runs one episode on a freshly reset environment. Failure modes end up in
/// Trajectory::outcome; backend errors (budget, transport) propagate.
Trajectory run_episode(Environment& env, const PromptTemplate& tmpl, HistoryPolicy policy, ChatBackend& backend,
                       const EpisodeLimits& limits = {}, const EpisodeHooks& hooks = {},
                       std::span<const std::string> reflections = {}, EpisodeStats* stats = nullptr);

bool is_refusal(std::string_view response, std::span<const std::string> phrases);

}  // namespace preact
