// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "preact/core.hpp"
#include "preact/llm.hpp"

namespace preact {

class EmptyInput : public Error {
 public:
  using Error::Error;
};
class AllExcluded : public Error {
 public:
  using Error::Error;
};
class EmptyTrajectory : public Error {
 public:
  using Error::Error;
};
class DegenerateInput : public Error {
 public:
  using Error::Error;
};
class JudgeParseFailure : public Error {
 public:
  using Error::Error;
};
/// Judge score parsed fine but lies outside the allowed range.
class JudgeRangeError : public JudgeParseFailure {
 public:
  using JudgeParseFailure::JudgeParseFailure;
};

enum class VerdictKind { DiversityPair, StrategyTurn };

struct JudgeVerdict {
  VerdictKind kind = VerdictKind::DiversityPair;
  // DiversityPair: {score of A, score of B}; StrategyTurn: {score}.
  std::vector<double> scores;
  std::string raw;
  // DiversityPair: B was shown to the judge as trajectory 1.
  bool swapped = false;
};

/// Fraction of Success outcomes.
double success_rate(std::span<const Trajectory> ts);

/// Mean score over non-Refusal trajectories.
double normalized_gp(std::span<const Trajectory> ts);

/// "80.0": percentage with one decimal.
std::string format_percent(double fraction);

// ---------------------------------------------------------------------------
// Diversity

/// Scores in presentation order, each in [0, 100].
JudgeVerdict parse_diversity_verdict(std::string_view raw);

struct DiversityOptions {
  // Show the pair in a seeded random order; off means A is always first.
  bool randomize_order = true;
  std::uint64_t seed = 0;
};

/// Whether B goes first for this seed and task.
bool diversity_b_first(std::uint64_t seed, std::string_view task_id);

ChatRequest diversity_request(const Trajectory& first, const Trajectory& second, std::string_view judge_template);

/// Verdict mapped back to (A, B) order.
JudgeVerdict judge_diversity(const Trajectory& a, const Trajectory& b, std::string_view judge_template,
                             ChatBackend& backend, const DiversityOptions& opts = {});

struct DiversitySummary {
  double a_wins = 0.0;
  double b_wins = 0.0;
  double ties = 0.0;
  std::size_t pairs = 0;
};

DiversitySummary diversity_summary(std::span<const JudgeVerdict> verdicts);

/// Distinct normalized actions divided by step count.
double action_diversity_proxy(const Trajectory& t);

// ---------------------------------------------------------------------------
// Directional strategy

/// Integer in [-1, 3] after "Last Round Replan Score:" (or "Score:").
JudgeVerdict parse_strategy_verdict(std::string_view raw);

/// Judge prompt for step `turn` (0-based). Predictions are never included.
ChatRequest strategy_request(const Trajectory& t, std::size_t turn, const Trajectory& ground_truth,
                             std::string_view judge_template);

JudgeVerdict strategy_score_turn(const Trajectory& t, std::size_t turn, const Trajectory& ground_truth,
                                 std::string_view judge_template, ChatBackend& backend);

/// Mean over trajectories of the mean turn score (Eq. 1 with an unweighted
/// outer mean). Every score must lie in [-1, 3].
double strategy_metric_from_scores(const std::vector<std::vector<double>>& scores);

double strategy_metric(std::span<const Trajectory> ts, std::span<const Trajectory> ground_truths,
                       std::string_view judge_template, ChatBackend& backend);

// ---------------------------------------------------------------------------
// Correlation

double pearson(std::span<const double> xs, std::span<const double> ys);

/// Share of pairs where the proxy prefers the same side as the judge
/// (proxy ties and judge ties agree with each other only).
double proxy_agreement(std::span<const double> proxy_a, std::span<const double> proxy_b,
                       std::span<const JudgeVerdict> verdicts);

}  // namespace preact
