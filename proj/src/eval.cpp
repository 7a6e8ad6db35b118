// SPDX-License-Identifier: Apache-2.0
#include "preact/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <optional>
#include <set>

#include "preact/hash.hpp"
#include "preact/strategies.hpp"
#include "preact/text.hpp"

namespace preact {

namespace {

// Text after the last "label" occurrence, preferring occurrences that start a
// line.
std::optional<std::string_view> after_label(std::string_view raw, std::string_view label) {
  std::optional<std::size_t> line_hit, any_hit;
  for (std::size_t at = text::ifind(raw, label); at != std::string_view::npos;
       at = text::ifind(raw, label, at + 1)) {
    any_hit = at;
    std::size_t k = at;
    while (k > 0 && (raw[k - 1] == ' ' || raw[k - 1] == '\t' || raw[k - 1] == '"' || raw[k - 1] == '*')) --k;
    if (k == 0 || raw[k - 1] == '\n') line_hit = at;
  }
  auto hit = line_hit ? line_hit : any_hit;
  if (!hit) return std::nullopt;
  return raw.substr(*hit + label.size());
}

std::optional<double> leading_number(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '[' || s.front() == '*'))
    s.remove_prefix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr == s.data() || !std::isfinite(v)) return std::nullopt;
  return v;
}

double mean(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

}  // namespace

double success_rate(std::span<const Trajectory> ts) {
  if (ts.empty()) throw EmptyInput("success rate of no trajectories");
  std::size_t ok = 0;
  for (const auto& t : ts) ok += t.outcome == Outcome::Success;
  return static_cast<double>(ok) / static_cast<double>(ts.size());
}

double normalized_gp(std::span<const Trajectory> ts) {
  if (ts.empty()) throw EmptyInput("normalized GP of no trajectories");
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& t : ts) {
    if (t.outcome == Outcome::Refusal) continue;
    sum += t.score;
    ++n;
  }
  if (n == 0) throw AllExcluded("every trajectory ended in refusal");
  return sum / static_cast<double>(n);
}

std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", fraction * 100.0);
  return buf;
}

// ---------------------------------------------------------------------------
// Diversity

JudgeVerdict parse_diversity_verdict(std::string_view raw) {
  JudgeVerdict v;
  v.kind = VerdictKind::DiversityPair;
  v.raw = std::string(raw);
  for (std::string_view label : {"Score 1:", "Score 2:"}) {
    auto rest = after_label(raw, label);
    if (!rest) throw JudgeParseFailure("judge response lacks \"" + std::string(label) + "\"");
    auto num = leading_number(*rest);
    if (!num) throw JudgeParseFailure("no number after \"" + std::string(label) + "\"");
    if (*num < 0.0 || *num > 100.0)
      throw JudgeRangeError("diversity score " + std::to_string(*num) + " outside [0, 100]");
    v.scores.push_back(*num);
  }
  return v;
}

bool diversity_b_first(std::uint64_t seed, std::string_view task_id) {
  return (splitmix64(seed ^ fnv1a64(task_id)) & 1U) != 0;
}

ChatRequest diversity_request(const Trajectory& first, const Trajectory& second, std::string_view judge_template) {
  ChatRequest req;
  req.turns.push_back({Role::User, text::substitute(judge_template, {{"trajectory_1", transcript(first, false)},
                                                                     {"trajectory_2", transcript(second, false)}})});
  return req;
}

JudgeVerdict judge_diversity(const Trajectory& a, const Trajectory& b, std::string_view judge_template,
                             ChatBackend& backend, const DiversityOptions& opts) {
  if (a.task_id != b.task_id) throw std::invalid_argument("diversity pairs must share a task");
  const bool swap = opts.randomize_order && diversity_b_first(opts.seed, a.task_id);
  auto req = swap ? diversity_request(b, a, judge_template) : diversity_request(a, b, judge_template);
  req.seed = opts.seed;
  auto v = parse_diversity_verdict(backend.complete(req).front());
  if (swap) std::swap(v.scores[0], v.scores[1]);
  v.swapped = swap;
  return v;
}

DiversitySummary diversity_summary(std::span<const JudgeVerdict> verdicts) {
  if (verdicts.empty()) throw EmptyInput("no diversity verdicts");
  DiversitySummary s;
  std::size_t a = 0, b = 0, tie = 0;
  for (const auto& v : verdicts) {
    if (v.kind != VerdictKind::DiversityPair || v.scores.size() != 2)
      throw std::invalid_argument("diversity summary needs pair verdicts");
    if (v.scores[0] > v.scores[1]) {
      ++a;
    } else if (v.scores[1] > v.scores[0]) {
      ++b;
    } else {
      ++tie;
    }
  }
  const auto n = static_cast<double>(verdicts.size());
  s.pairs = verdicts.size();
  s.a_wins = static_cast<double>(a) / n;
  s.b_wins = static_cast<double>(b) / n;
  s.ties = static_cast<double>(tie) / n;
  return s;
}

double action_diversity_proxy(const Trajectory& t) {
  if (t.steps.empty()) throw EmptyTrajectory("action diversity of a trajectory without steps");
  std::set<std::string> distinct;
  for (const auto& s : t.steps) distinct.insert(text::normalize_ws(s.action));
  return static_cast<double>(distinct.size()) / static_cast<double>(t.steps.size());
}

// ---------------------------------------------------------------------------
// Directional strategy

JudgeVerdict parse_strategy_verdict(std::string_view raw) {
  JudgeVerdict v;
  v.kind = VerdictKind::StrategyTurn;
  v.raw = std::string(raw);
  auto rest = after_label(raw, "Last Round Replan Score:");
  if (!rest) rest = after_label(raw, "Score:");
  if (!rest) throw JudgeParseFailure("judge response lacks a replan score");
  auto num = leading_number(*rest);
  if (!num) throw JudgeParseFailure("no number after the replan score label");
  if (*num != std::floor(*num)) throw JudgeParseFailure("replan score is not an integer");
  if (*num < -1.0 || *num > 3.0) throw JudgeRangeError("replan score " + std::to_string(*num) + " outside [-1, 3]");
  v.scores.push_back(*num);
  return v;
}

ChatRequest strategy_request(const Trajectory& t, std::size_t turn, const Trajectory& ground_truth,
                             std::string_view judge_template) {
  if (turn >= t.steps.size()) throw std::out_of_range("turn outside trajectory");
  const auto& s = t.steps[turn];
  std::string current;
  if (!s.thought.empty()) current += "Thought: " + s.thought + "\n";
  current += "Action: " + s.action;
  ChatRequest req;
  req.turns.push_back({Role::User, text::substitute(judge_template, {{"ground_truth", transcript(ground_truth, false)},
                                                                     {"history", transcript(t, false, turn)},
                                                                     {"turn", current}})});
  req.seed = splitmix64(t.seed ^ fnv1a64(t.task_id) ^ turn);
  return req;
}

JudgeVerdict strategy_score_turn(const Trajectory& t, std::size_t turn, const Trajectory& ground_truth,
                                 std::string_view judge_template, ChatBackend& backend) {
  return parse_strategy_verdict(backend.complete(strategy_request(t, turn, ground_truth, judge_template)).front());
}

double strategy_metric_from_scores(const std::vector<std::vector<double>>& scores) {
  if (scores.empty()) throw EmptyInput("strategy metric of no trajectories");
  double outer = 0.0;
  for (const auto& per_turn : scores) {
    if (per_turn.empty()) throw EmptyTrajectory("strategy metric needs at least one turn per trajectory");
    for (double x : per_turn)
      if (!(x >= -1.0 && x <= 3.0)) throw JudgeRangeError("turn score outside [-1, 3]");
    outer += mean(per_turn);
  }
  return outer / static_cast<double>(scores.size());
}

double strategy_metric(std::span<const Trajectory> ts, std::span<const Trajectory> ground_truths,
                       std::string_view judge_template, ChatBackend& backend) {
  if (ts.size() != ground_truths.size()) throw std::invalid_argument("one ground truth per trajectory required");
  std::vector<std::vector<double>> scores;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (ts[i].steps.empty()) throw EmptyTrajectory("trajectory " + ts[i].task_id + " has no turns");
    auto& row = scores.emplace_back();
    for (std::size_t k = 0; k < ts[i].steps.size(); ++k)
      row.push_back(strategy_score_turn(ts[i], k, ground_truths[i], judge_template, backend).scores.front());
  }
  return strategy_metric_from_scores(scores);
}

// ---------------------------------------------------------------------------
// Correlation

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw DegenerateInput("pearson needs two equal-length series of size >= 2");
  const double mx = mean(xs), my = mean(ys);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DegenerateInput("pearson of a constant series");
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

double proxy_agreement(std::span<const double> proxy_a, std::span<const double> proxy_b,
                       std::span<const JudgeVerdict> verdicts) {
  if (proxy_a.size() != proxy_b.size() || proxy_a.size() != verdicts.size())
    throw std::invalid_argument("proxy_agreement needs aligned inputs");
  if (verdicts.empty()) throw EmptyInput("no pairs to compare");
  auto sign = [](double d) { return (d > 0) - (d < 0); };
  std::size_t agree = 0;
  for (std::size_t i = 0; i < verdicts.size(); ++i)
    agree += sign(proxy_a[i] - proxy_b[i]) == sign(verdicts[i].scores.at(0) - verdicts[i].scores.at(1));
  return static_cast<double>(agree) / static_cast<double>(verdicts.size());
}

}  // namespace preact
