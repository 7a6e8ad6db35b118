// SPDX-License-Identifier: Apache-2.0
#include "preact/agent.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "preact/hash.hpp"
#include "preact/history.hpp"
#include "preact/text.hpp"

namespace preact {

namespace {

bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string_view ltrim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  return s;
}

// "Predict OS output:" also matches "predict os output  :" at line start.
// Returns the remainder after the colon.
std::optional<std::string_view> match_label(std::string_view line, std::string_view label) {
  auto body = label;
  if (!body.empty() && body.back() == ':') body.remove_suffix(1);
  line = ltrim(line);
  if (!text::istarts_with(line, body)) return std::nullopt;
  auto rest = line.substr(body.size());
  rest = ltrim(rest);
  if (rest.empty() || rest.front() != ':') return std::nullopt;
  return ltrim(rest.substr(1));
}

enum Slot { kThought, kAction, kPrediction, kFinal, kSlots };

struct Sections {
  std::optional<std::string> slot[kSlots];
  std::string preamble;
};

Sections split_sections(std::string_view response, const AssistantFormat& f) {
  const std::string_view labels[kSlots] = {f.thought_label, f.action_label, f.prediction_label,
                                           f.final_answer_label};
  Sections out;
  int current = -1;
  for (auto line : text::split_lines(response)) {
    bool started = false;
    for (int s = 0; s < kSlots && !started; ++s) {
      if (labels[s].empty() || out.slot[s]) continue;
      if (auto rest = match_label(line, labels[s])) {
        out.slot[s] = std::string(*rest);
        current = s;
        started = true;
      }
    }
    if (started) continue;
    auto& target = current < 0 ? out.preamble : *out.slot[current];
    if (!target.empty() || current >= 0) target += "\n";
    target += line;
  }
  return out;
}

std::string first_line(std::string_view s) {
  for (auto line : text::split_lines(s)) {
    auto t = text::trim(line);
    if (!t.empty()) return std::string(t);
  }
  return {};
}

// Body of the first ``` fence, language tag removed. nullopt without a fence.
std::optional<std::string> fenced_code(std::string_view s) {
  auto open = s.find("```");
  if (open == std::string_view::npos) return std::nullopt;
  auto rest = s.substr(open + 3);
  auto eol = rest.find('\n');
  auto tag = text::trim(rest.substr(0, eol));
  std::string_view body = eol == std::string_view::npos ? std::string_view{} : rest.substr(eol + 1);
  auto close = body.find("```");
  if (close != std::string_view::npos) {
    body = body.substr(0, close);
  } else if (eol == std::string_view::npos) {
    // "```SELECT 1```"-style single line fences.
    auto inner_close = rest.find("```");
    body = inner_close == std::string_view::npos ? rest : rest.substr(0, inner_close);
    tag = {};
  }
  std::vector<std::string> lines;
  if (!tag.empty() && !text::iequals(tag, "bash") && !text::iequals(tag, "sh") && !text::iequals(tag, "sql") &&
      !text::iequals(tag, "shell"))
    lines.emplace_back(tag);
  for (auto line : text::split_lines(body)) lines.emplace_back(line);
  auto blank = [](const std::string& l) { return text::trim(l).empty(); };
  while (!lines.empty() && blank(lines.front())) lines.erase(lines.begin());
  if (!lines.empty()) {
    auto t = text::trim(lines.front());
    if (text::iequals(t, "bash") || text::iequals(t, "sh") || text::iequals(t, "sql")) lines.erase(lines.begin());
  }
  while (!lines.empty() && blank(lines.front())) lines.erase(lines.begin());
  while (!lines.empty() && blank(lines.back())) lines.pop_back();
  for (auto& l : lines) {
    while (!l.empty() && is_space(l.back())) l.pop_back();
  }
  return text::join(lines, "\n");
}

std::string os_action(std::string_view content) {
  auto head = first_line(content);
  auto lower = text::to_lower(head);
  if (lower.rfind("answer(", 0) == 0) {
    auto close = head.rfind(')');
    return close == std::string::npos ? head + ")" : head.substr(0, close + 1);
  }
  if (lower == "finish" || lower.rfind("finish", 0) == 0) return "finish";
  if (auto code = fenced_code(content)) return *code;
  if (lower.rfind("bash", 0) == 0) return std::string(text::trim(std::string_view(head).substr(4)));
  return {};
}

std::string sql_action(std::string_view content, const Sections& sec) {
  auto head = text::to_lower(first_line(content));
  if (head.rfind("answer", 0) == 0) {
    if (!sec.slot[kFinal]) return {};
    auto ans = first_line(*sec.slot[kFinal]);
    return ans.empty() ? std::string() : "Answer: " + ans;
  }
  auto code = fenced_code(content);
  if (!code) return {};
  std::vector<std::string> parts;
  for (auto line : text::split_lines(*code)) {
    auto t = text::trim(line);
    if (!t.empty()) parts.emplace_back(t);
  }
  return text::join(parts, " ");
}

// Position of a list marker "12." / "12)" at s[i], returning the index just
// past it, or npos.
std::size_t marker_end(std::string_view s, std::size_t i) {
  std::size_t j = i;
  while (j < s.size() && is_digit(s[j])) ++j;
  if (j == i || j - i > 3 || j >= s.size() || (s[j] != '.' && s[j] != ')')) return std::string_view::npos;
  if (j + 1 < s.size() && is_digit(s[j + 1])) return std::string_view::npos;
  return j + 1;
}

bool only_dots(std::string_view s) {
  s = text::trim(s);
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c == '.'; });
}

std::vector<std::string> inline_items(std::string_view s) {
  std::vector<std::string> items;
  std::size_t pos = 0;
  int expect = 1;
  std::size_t item_start = std::string_view::npos;
  while (pos < s.size()) {
    auto label = std::to_string(expect);
    auto at = s.find(label, pos);
    while (at != std::string_view::npos) {
      bool boundary = at == 0 || is_space(s[at - 1]);
      auto end = marker_end(s, at);
      if (boundary && end != std::string_view::npos && end - at == label.size() + 1) break;
      at = s.find(label, at + 1);
    }
    if (at == std::string_view::npos) break;
    if (item_start != std::string_view::npos) items.emplace_back(text::trim(s.substr(item_start, at - item_start)));
    item_start = at + label.size() + 1;
    pos = item_start;
    ++expect;
  }
  if (item_start == std::string_view::npos) {
    auto t = text::trim(s);
    if (!t.empty()) items.emplace_back(t);
  } else {
    items.emplace_back(text::trim(s.substr(item_start)));
  }
  return items;
}

std::vector<std::string> line_items(std::string_view s) {
  std::vector<std::string> items;
  std::vector<std::string> loose;
  bool numbered = false;
  for (auto line : text::split_lines(s)) {
    auto t = text::trim(line);
    if (t.empty()) continue;
    auto end = marker_end(t, 0);
    if (end != std::string_view::npos) {
      numbered = true;
      items.emplace_back(text::trim(t.substr(end)));
    } else if (only_dots(t)) {
      continue;
    } else if (numbered) {
      auto& cur = items.back();
      cur += cur.empty() ? std::string(t) : " " + std::string(t);
    } else {
      loose.emplace_back(t);
    }
  }
  return numbered ? items : loose;
}

const std::set<std::string, std::less<>>& stopwords() {
  static const std::set<std::string, std::less<>> words{
      "a",     "an",   "the",  "in",   "on",    "at",    "of",    "to",    "is",   "are",   "was",   "were",
      "be",    "been", "it",   "its",  "and",   "or",    "for",   "with",  "you",  "your",  "i",     "me",
      "my",    "we",   "our",  "this", "that",  "these", "those", "there", "will", "would", "can",   "could",
      "should", "may", "might", "then", "if",   "from",  "by",    "as",    "some", "any",   "he",    "she",
      "they",  "them", "their", "see", "do",    "does",  "did",   "have",  "has",  "had",   "so",    "but",
      "into",  "onto", "about", "which", "what", "when",  "where", "who",   "how",  "also",  "just",  "only",
      "again", "next", "its",  "am",   "get",   "got",   "out",   "up",    "down", "over",  "more",  "most",
  };
  return words;
}

std::optional<int> first_integer(std::string_view s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!is_digit(s[i])) continue;
    bool neg = i > 0 && s[i - 1] == '-';
    std::size_t j = i;
    long long v = 0;
    while (j < s.size() && is_digit(s[j]) && v < 1000000) v = v * 10 + (s[j++] - '0');
    return static_cast<int>(neg ? -v : v);
  }
  return std::nullopt;
}

std::uint64_t attempt_seed(std::uint64_t seed, int round, int attempt) {
  return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(round) << 8 | static_cast<std::uint64_t>(attempt)));
}

void append_to_last_user(std::vector<ChatTurn>& turns, std::string_view extra) {
  for (auto it = turns.rbegin(); it != turns.rend(); ++it) {
    if (it->role == Role::User) {
      it->content += "\n\n";
      it->content += extra;
      return;
    }
  }
  turns.push_back({Role::User, std::string(extra)});
}

}  // namespace

// ---------------------------------------------------------------------------
// Parsing

PredictedOutcome split_prediction(std::string_view item) {
  item = text::trim(item);
  for (std::size_t i = 0; i < item.size(); ++i) {
    char c = item[i];
    if ((c == '.' || c == '!' || c == '?') && (i + 1 == item.size() || is_space(item[i + 1]))) {
      return {std::string(item.substr(0, i + 1)), std::string(text::trim(item.substr(i + 1)))};
    }
  }
  return {std::string(item), {}};
}

std::vector<PredictedOutcome> parse_prediction_list(std::string_view block, bool single_line) {
  std::vector<PredictedOutcome> out;
  auto items = single_line ? inline_items(block) : line_items(block);
  for (const auto& item : items) {
    if (text::trim(item).empty() || only_dots(item)) continue;
    out.push_back(split_prediction(item));
  }
  return out;
}

ParsedTurn parse_turn(std::string_view response, const PromptTemplate& tmpl) {
  if (text::trim(response).empty()) throw EmptyResponse("empty response");
  const auto& f = tmpl.assistant_format;
  auto sec = split_sections(response, f);

  ParsedTurn turn;
  if (sec.slot[kThought]) turn.thought = std::string(text::trim(*sec.slot[kThought]));

  if (!sec.slot[kAction]) {
    if (!f.action_label_optional) throw MissingAction("no \"" + f.action_label + "\" section");
    turn.action = first_line(sec.preamble);
  } else {
    const auto& content = *sec.slot[kAction];
    switch (f.syntax) {
      case ActionSyntax::Line:
      case ActionSyntax::Question:
        turn.action = first_line(content);
        break;
      case ActionSyntax::OsCommand:
        turn.action = os_action(content);
        break;
      case ActionSyntax::SqlBlock:
        turn.action = sql_action(content, sec);
        break;
    }
  }
  if (turn.action.empty()) throw MissingAction("action section is empty");

  if (!f.prediction_label.empty()) {
    if (sec.slot[kPrediction]) turn.predictions = parse_prediction_list(*sec.slot[kPrediction], f.single_line);
    if (turn.predictions.empty() && !is_terminal_action(tmpl, turn.action))
      throw MissingPrediction("no \"" + f.prediction_label + "\" list");
  }
  return turn;
}

// ---------------------------------------------------------------------------
// Mismatch detection

std::vector<std::string> content_words(std::string_view s) {
  std::vector<std::string> out;
  for (auto& w : text::words(s))
    if (!stopwords().count(w)) out.push_back(std::move(w));
  return out;
}

MismatchMatcher keyword_matcher(double threshold) {
  return [threshold](std::span<const PredictedOutcome> preds, std::string_view obs) -> std::optional<std::size_t> {
    auto obs_words = text::words(obs);
    std::set<std::string, std::less<>> present(obs_words.begin(), obs_words.end());
    for (std::size_t i = 0; i < preds.size(); ++i) {
      auto words = content_words(preds[i].category);
      if (words.empty()) continue;
      auto hits = std::count_if(words.begin(), words.end(), [&](const std::string& w) { return present.count(w) > 0; });
      if (static_cast<double>(hits) >= threshold * static_cast<double>(words.size())) return i;
    }
    return std::nullopt;
  };
}

MismatchMatcher llm_matcher(ChatBackend& backend) {
  return [&backend](std::span<const PredictedOutcome> preds, std::string_view obs) -> std::optional<std::size_t> {
    if (preds.empty()) return std::nullopt;
    ChatRequest req;
    req.system = "You compare the actual feedback of an environment with a list of predicted feedback scenarios.";
    std::string body = "Predicted scenarios:\n";
    for (std::size_t i = 0; i < preds.size(); ++i) body += std::to_string(i + 1) + ". " + preds[i].category + "\n";
    body += "\nActual feedback:\n" + std::string(obs) +
            "\n\nReply with the number of the scenario the feedback falls under, or 0 if it fits none.";
    req.turns.push_back({Role::User, body});
    auto vote = first_integer(backend.complete(req).front());
    if (!vote || *vote < 1 || static_cast<std::size_t>(*vote) > preds.size()) return std::nullopt;
    return static_cast<std::size_t>(*vote - 1);
  };
}

MismatchReport detect_mismatch(std::span<const PredictedOutcome> predictions, std::string_view observation,
                               const MismatchMatcher& matcher) {
  MismatchReport r;
  if (predictions.empty()) return r;
  r.matched_index = matcher ? matcher(predictions, observation) : keyword_matcher()(predictions, observation);
  if (r.matched_index && *r.matched_index >= predictions.size()) r.matched_index.reset();
  r.matched = r.matched_index.has_value();
  return r;
}

// ---------------------------------------------------------------------------
// Prompt composition

ChatRequest compose_prompt(const PromptTemplate& tmpl, std::string_view o0, std::span<const Step> steps,
                           std::span<const std::string> reflections, HistoryPolicy policy,
                           const PromptExtras& extras) {
  if (tmpl.framework == Framework::ReAct && policy.retention != Retention::None)
    throw InconsistentPolicy("ReAct templates keep no prediction history (retention must be 0)");
  ChatRequest req;
  req.system = tmpl.render_system(o0);
  auto history = build_history(o0, steps, reflections, policy);
  req.turns = render_messages(history, tmpl);
  if (!extras.available_actions.empty())
    append_to_last_user(req.turns, "AVAILABLE ACTIONS: " + text::join(extras.available_actions, ", "));
  if (extras.disparity_hint && !tmpl.disparity_hint.empty()) append_to_last_user(req.turns, tmpl.disparity_hint);
  if (!extras.format_reminder.empty()) append_to_last_user(req.turns, extras.format_reminder);
  req.temperature = extras.temperature;
  req.n_samples = extras.n_samples;
  req.seed = extras.seed;
  return req;
}

// ---------------------------------------------------------------------------
// Episode loop

bool is_refusal(std::string_view response, std::span<const std::string> phrases) {
  for (const auto& p : phrases)
    if (!p.empty() && text::ifind(response, p) != std::string_view::npos) return true;
  return false;
}

Trajectory run_episode(Environment& env, const PromptTemplate& tmpl, HistoryPolicy policy, ChatBackend& backend,
                       const EpisodeLimits& limits, const EpisodeHooks& hooks,
                       std::span<const std::string> reflections, EpisodeStats* stats) {
  const auto& spec = env.spec();
  const int max_turns = limits.max_turns > 0 ? limits.max_turns : spec.max_turns;
  const bool pre = tmpl.framework == Framework::PreAct;
  const auto matcher = limits.matcher ? limits.matcher : keyword_matcher();
  EpisodeStats local;
  auto& st = stats ? *stats : local;

  Trajectory t;
  t.task_id = spec.id;
  t.env_name = std::string(to_string(spec.family));
  t.framework = tmpl.framework;
  t.initial_observation = env.initial_observation();
  t.reflections.assign(reflections.begin(), reflections.end());
  t.seed = env.seed();
  t.outcome = Outcome::MaxTurnsExceeded;

  bool hint = false;
  int consecutive_refusals = 0;
  bool finished = false;

  for (int round = 1; round <= max_turns && !finished; ++round) {
    PromptExtras extras;
    extras.disparity_hint = hint && limits.inject_disparity_hint;
    if (spec.family == EnvFamily::HH) extras.available_actions = env.admissible_actions();
    extras.temperature = limits.temperature;
    extras.n_samples = std::max(1, hooks.samples);

    std::optional<ParsedTurn> chosen;
    bool refused = false;
    for (int attempt = 0; attempt <= limits.max_parse_retries; ++attempt) {
      extras.seed = attempt_seed(t.seed, round, attempt);
      extras.format_reminder = attempt > 0 ? std::string(kFormatReminder) : std::string();
      auto req = compose_prompt(tmpl, t.initial_observation, t.steps, t.reflections, policy, extras);
      auto texts = backend.complete(req);

      std::vector<ParsedTurn> candidates;
      bool all_refusals = true;
      for (const auto& text : texts) {
        try {
          candidates.push_back(parse_turn(text, tmpl));
          all_refusals = false;
        } catch (const ParseError&) {
          if (!is_refusal(text, limits.refusal_phrases)) all_refusals = false;
        }
      }
      if (!candidates.empty()) {
        std::size_t pick = hooks.select && candidates.size() > 1 ? hooks.select(req, candidates) : 0;
        chosen = candidates[std::min(pick, candidates.size() - 1)];
        break;
      }
      if (all_refusals) {
        refused = true;
        break;
      }
      if (attempt < limits.max_parse_retries) ++st.parse_retries;
    }

    if (refused) {
      ++st.refusals;
      if (++consecutive_refusals >= limits.refusal_limit) {
        t.outcome = Outcome::Refusal;
        t.score = env.score();
        finished = true;
      }
      continue;
    }
    if (!chosen) {
      t.outcome = Outcome::ParseFailure;
      t.score = env.score();
      finished = true;
      break;
    }
    consecutive_refusals = 0;

    const int index = static_cast<int>(t.steps.size()) + 1;
    auto turn = std::move(*chosen);
    if (hooks.transform) turn = hooks.transform(std::move(turn), index);
    if (!pre) turn.predictions.clear();
    if (hooks.observe) hooks.observe(turn, index);
    if (pre) st.branch_counts.push_back(static_cast<int>(turn.predictions.size()));

    auto out = env.step(turn.action);
    Step s;
    s.index = index;
    s.thought = std::move(turn.thought);
    s.action = std::move(turn.action);
    s.prediction = std::move(turn.predictions);
    s.observation = truncate_observation(out.observation);

    hint = false;
    if (pre && !s.prediction.empty()) {
      auto report = detect_mismatch(s.prediction, *s.observation, matcher);
      hint = !report.matched;
      ++(report.matched ? st.matches : st.mismatches);
    }
    t.steps.push_back(std::move(s));

    if (out.done) {
      t.score = out.success_score;
      t.outcome = out.success_score >= 1.0 ? Outcome::Success : Outcome::Failure;
      finished = true;
    }
  }
  if (!finished) t.score = env.score();
  validate(t);
  return t;
}

}  // namespace preact
