// SPDX-License-Identifier: Apache-2.0
#include "preact/history.hpp"

#include "preact/text.hpp"

namespace preact {

std::string truncate_observation(std::string_view obs) {
  if (obs.size() <= kObservationLimit) return std::string(obs);
  std::size_t keep = kObservationLimit - kTruncationMarker.size();
  // Back off over UTF-8 continuation bytes.
  while (keep > 0 && (static_cast<unsigned char>(obs[keep]) & 0xC0) == 0x80) --keep;
  std::string out(obs.substr(0, keep));
  out += kTruncationMarker;
  return out;
}

std::vector<HistoryMessage> build_history(std::string_view o0, std::span<const Step> steps,
                                          std::span<const std::string> reflections,
                                          HistoryPolicy policy) {
  std::vector<HistoryMessage> out;
  if (policy.include_reflections) {
    for (const auto& r : reflections)
      if (!r.empty()) out.push_back({Origin::Reflection, Part::Reflection, 0, r, {}});
  }
  if (!o0.empty())
    out.push_back({Origin::Environment, Part::Observation, 0, truncate_observation(o0), {}});

  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& s = steps[i];
    const bool latest = i + 1 == steps.size();
    if (!s.thought.empty())
      out.push_back({Origin::AgentThoughtAction, Part::Thought, s.index, s.thought, {}});
    out.push_back({Origin::AgentThoughtAction, Part::Action, s.index, s.action, {}});

    bool keep_prediction = false;
    switch (policy.retention) {
      case Retention::All: keep_prediction = true; break;
      case Retention::Last: keep_prediction = latest; break;
      case Retention::None: keep_prediction = false; break;
    }
    if (keep_prediction && !s.prediction.empty())
      out.push_back({Origin::AgentPrediction, Part::Prediction, s.index,
                     format_predictions(s.prediction), s.prediction});

    if (s.observation && !s.observation->empty())
      out.push_back({Origin::Environment, Part::Observation, s.index,
                     truncate_observation(*s.observation), {}});
  }
  return out;
}

std::vector<ChatTurn> render_messages(std::span<const HistoryMessage> history,
                                      const PromptTemplate& tmpl) {
  std::vector<ChatTurn> turns;
  std::vector<std::string> reflections;

  // Pending assistant content for the step being assembled.
  int pending_step = -1;
  std::string thought, action;
  std::vector<PredictedOutcome> predictions;

  auto push = [&](Role role, std::string content) {
    if (!turns.empty() && turns.back().role == role) {
      turns.back().content += "\n\n" + content;
    } else {
      turns.push_back({role, std::move(content)});
    }
  };
  auto flush = [&] {
    if (pending_step < 0) return;
    push(Role::Assistant, format_assistant_turn(tmpl, thought, action, predictions));
    pending_step = -1;
    thought.clear();
    action.clear();
    predictions.clear();
  };

  for (const auto& m : history) {
    switch (m.part) {
      case Part::Reflection:
        reflections.push_back(m.text);
        break;
      case Part::Observation:
        flush();
        push(Role::User, m.text);
        break;
      case Part::Thought:
      case Part::Action:
      case Part::Prediction:
        if (pending_step != m.step) flush();
        pending_step = m.step;
        if (m.part == Part::Thought) thought = m.text;
        if (m.part == Part::Action) action = m.text;
        if (m.part == Part::Prediction) predictions = m.predictions;
        break;
    }
  }
  flush();

  if (!reflections.empty()) {
    auto block = text::join(reflections, "\n");
    if (!turns.empty() && turns.front().role == Role::User) {
      turns.front().content = block + "\n\n" + turns.front().content;
    } else {
      turns.insert(turns.begin(), ChatTurn{Role::User, block});
    }
  }
  return turns;
}

}  // namespace preact
