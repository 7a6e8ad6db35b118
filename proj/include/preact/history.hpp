// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "preact/chat.hpp"
#include "preact/core.hpp"
#include "preact/templates.hpp"

namespace preact {

enum class Origin { Environment, AgentThoughtAction, AgentPrediction, Reflection };

/// Which element of a step a message carries. Thought and action share the
/// AgentThoughtAction origin but are kept apart so renderers can label them.
enum class Part { Observation, Thought, Action, Prediction, Reflection };

struct HistoryMessage {
  Origin origin = Origin::Environment;
  Part part = Part::Observation;
  int step = 0;  // 0 for o0 and reflections
  std::string text;
  std::vector<PredictedOutcome> predictions;  // Part::Prediction only

  bool operator==(const HistoryMessage&) const = default;
};

inline constexpr std::size_t kObservationLimit = 4096;
inline constexpr std::string_view kTruncationMarker = "\n[truncated because the output is too long]";

/// Cuts the tail so the result, marker included, is at most kObservationLimit
/// bytes. Idempotent; never splits a UTF-8 sequence.
std::string truncate_observation(std::string_view obs);

/// Sequence ref*, o0, then per step: t, a, [p], o.
std::vector<HistoryMessage> build_history(std::string_view o0, std::span<const Step> steps,
                                          std::span<const std::string> reflections,
                                          HistoryPolicy policy);

/// Maps history onto alternating chat turns in the template's response format.
std::vector<ChatTurn> render_messages(std::span<const HistoryMessage> history,
                                      const PromptTemplate& tmpl);

}  // namespace preact
